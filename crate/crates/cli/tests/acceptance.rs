//! Acceptance suite: one `[PASS]` / `[FAIL]` line per criterion.

use std::process::Command;
use std::time::{Duration, Instant};

use covfuse_cli::verify::{self, Suite, VerifyOptions, VerifyReport};
use covfuse_cli::{plot, random_scenario, RunRecord};
use covfuse_core::maxdet::{self, BarrierConfig, SolverStatus};
use covfuse_core::mee::{assemble, find_interior};
use covfuse_core::sampling::{random_instance, InstanceSpec};
use covfuse_core::{cu_union, kalman_fuse, translate_correlated, translate_independent, Estimate, Tolerance, UnionConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const SWEEP_SEED: u64 = 20_240_501;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn cu_worked_example() -> Outcome {
    let start = Instant::now();
    let es = [
        Estimate::isotropic(&[0.0, 0.0], 1.0).map_err(|e| e.to_string())?,
        Estimate::isotropic(&[4.0, 4.0], 1.0).map_err(|e| e.to_string())?,
    ];
    let r = cu_union(&es, &UnionConfig::default()).map_err(|e| e.to_string())?;
    let u = r.estimate.mean();
    let cov = r.estimate.cov().as_matrix();
    let expected = DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 4.0, 5.0]);
    let err = (u - DVector::from_vec(vec![2.0, 2.0])).amax().max((cov - &expected).amax());
    ensure(err <= 1e-6, format!("max entry error {err:e}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max entry error {err:.1e}, {:.2?}", start.elapsed()))
}

fn translation_chain() -> Outcome {
    let start = Instant::now();
    let origin = Estimate::from_rows(&[0.0], &[vec![0.0]]).map_err(|e| e.to_string())?;
    let one = DVector::from_vec(vec![1.0]);
    let two = DVector::from_vec(vec![2.0]);
    let direct = translate_independent(&origin, &two).map_err(|e| e.to_string())?;
    let step = translate_independent(&origin, &one).map_err(|e| e.to_string())?;
    let chained = translate_independent(&step, &one).map_err(|e| e.to_string())?;
    let pair = |e: &Estimate| (e.mean()[0], e.cov().get(0, 0));
    ensure(pair(&direct) == (2.0, 4.0), format!("direct translation gave {:?}", pair(&direct)))?;
    ensure(pair(&step) == (1.0, 1.0), format!("first step gave {:?}", pair(&step)))?;
    ensure(pair(&chained) == (2.0, 2.0), format!("two-step chain gave {:?}", pair(&chained)))?;
    let correlated = translate_correlated(&translate_correlated(&origin, &one).map_err(|e| e.to_string())?, &one)
        .map_err(|e| e.to_string())?;
    ensure(pair(&correlated) == (2.0, 4.0), format!("correlated chain gave {:?}", pair(&correlated)))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("direct (2, 4), chained (2, 2), correlated chain (2, 4)".into())
}

fn theorem_sweep() -> Result<(VerifyReport, Duration), String> {
    let start = Instant::now();
    let opts = VerifyOptions { count: 100, seed: SWEEP_SEED, trace: false, tol: Tolerance::default() };
    let r = verify::run(Suite::Equivalence, &opts).map_err(|e| e.to_string())?;
    Ok((r, start.elapsed()))
}

fn theorem_reproduction(sweep: &Result<(VerifyReport, Duration), String>) -> Outcome {
    let (r, elapsed) = sweep.as_ref().map_err(Clone::clone)?;
    let gap = r.max_logdet_gap.unwrap_or(f64::NAN);
    ensure(r.checked >= 100, format!("only {} instances", r.checked))?;
    ensure(r.ok(), format!("{} of {} failed: {:?}", r.failed, r.checked, r.failures.first()))?;
    ensure(gap <= 1e-3, format!("max log det gap {gap:e}"))?;
    within(*elapsed, Duration::from_secs(60))?;
    Ok(format!("{} instances, max |Δ log det| {gap:.1e}, {elapsed:.2?}", r.checked))
}

fn tau_bound(sweep: &Result<(VerifyReport, Duration), String>) -> Outcome {
    let (r, _) = sweep.as_ref().map_err(Clone::clone)?;
    let tau = r.max_tau.unwrap_or(f64::NAN);
    ensure(tau <= 1.0 + 1e-8, format!("max τ {tau}"))?;
    ensure(r.ok(), "sweep had failures")?;
    Ok(format!("max τ {tau:.6} over {} solutions", r.checked))
}

fn single_enclosure() -> Outcome {
    let start = Instant::now();
    let opts = VerifyOptions { count: 1000, seed: SWEEP_SEED, trace: false, tol: Tolerance::default() };
    let r = verify::run(Suite::SingleEnclosure, &opts).map_err(|e| e.to_string())?;
    ensure(r.checked == 1000 && r.ok(), format!("{} of {} disagree: {:?}", r.failed, r.checked, r.failures.first()))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("1000/1000 agree ({} near-tangent draws skipped), {:.2?}", r.skipped, start.elapsed()))
}

fn ci_joint_bound() -> Outcome {
    let start = Instant::now();
    let opts = VerifyOptions { count: 100, seed: SWEEP_SEED, trace: false, tol: Tolerance::default() };
    let r = verify::run(Suite::CiBounds, &opts).map_err(|e| e.to_string())?;
    ensure(r.ok(), format!("{} of {} failed: {:?}", r.failed, r.checked, r.failures.first()))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "100 instances x {} cross-covariances, {:.2?}",
        verify::CI_CROSS_SAMPLES,
        start.elapsed()
    ))
}

fn kalman_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED);
    let mut worst = f64::INFINITY;
    for k in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=5);
        let es = random_instance(&mut rng, n, m, &InstanceSpec::default());
        let c = kalman_fuse(&es).map_err(|e| e.to_string())?.estimate;
        for a in &es {
            let diff = a.cov().as_matrix() - c.cov().as_matrix();
            let diff = (&diff + diff.transpose()) * 0.5;
            let scale = diff.trace().abs().max(1.0);
            let min = diff.symmetric_eigenvalues().min() / scale;
            worst = worst.min(min);
            ensure(min >= -1e-9, format!("instance {k}: λ_min(A_i - C) / scale = {min:e}"))?;
        }
    }
    Ok(format!("100 instances, min relative λ_min(A_i - C) {worst:.1e}"))
}

fn maxdet_certification() -> Outcome {
    let es = [
        Estimate::isotropic(&[0.0, 0.0], 1.0).map_err(|e| e.to_string())?,
        Estimate::isotropic(&[0.0, 0.0], 4.0).map_err(|e| e.to_string())?,
    ];
    let solve = || -> Result<_, String> {
        let p = assemble(&es).map_err(|e| e.to_string())?;
        let x0 = find_interior(&p).map_err(|e| e.to_string())?;
        let r = maxdet::solve(p.maxdet(), &x0, &BarrierConfig::default()).map_err(|e| e.to_string())?;
        Ok((p, r))
    };
    let (p, a) = solve()?;
    let (_, b) = solve()?;
    ensure(a.status == SolverStatus::Optimal, format!("status {:?}", a.status))?;
    ensure(a.gap <= 1e-7, format!("gap {:e}", a.gap))?;
    let (w, _, _) = p.unpack(&a.x);
    let err = (w.as_matrix() - DMatrix::identity(2, 2) * 0.25).amax();
    ensure(err <= 1e-7, format!("|W - I/4| = {err:e}"))?;
    let same = a.x.iter().zip(&b.x).all(|(x, y)| x.to_bits() == y.to_bits()) && a.gap.to_bits() == b.gap.to_bits();
    ensure(same, "reruns differ")?;
    Ok(format!("|W - I/4| {err:.1e}, gap {:.1e}, kkt {:.1e}, bit-identical rerun", a.gap, a.kkt))
}

fn figure_reproduction() -> Outcome {
    let dir = std::env::temp_dir().join(format!("covfuse-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let scenario = random_scenario(2, 5, 3.0, SWEEP_SEED).map_err(|e| e.to_string())?;
    let scen = dir.join("five.json");
    std::fs::write(&scen, scenario.to_json()).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_covfuse");
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let out = Command::new(bin).args(args).env_remove("COVFUSE_SEED").output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).to_string())?;
        Ok(out.stdout)
    };
    let rec_path = dir.join("gcu.json");
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let rec = RunRecord::from_json(&run(&["union", "--method", "gcu-mee", "--in", &s(&scen), "--out", &s(&rec_path)])?)
        .map_err(|e| e.to_string())?;
    let (a, b) = (dir.join("a.svg"), dir.join("b.svg"));
    run(&["plot", "--in", &s(&rec_path), "--out", &s(&a)])?;
    run(&["plot", "--in", &s(&rec_path), "--out", &s(&b)])?;
    let bytes_a = std::fs::read(&a).map_err(|e| e.to_string())?;
    let bytes_b = std::fs::read(&b).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    ensure(bytes_a == bytes_b, "SVG differs between runs")?;
    let text = String::from_utf8(bytes_a).map_err(|e| e.to_string())?;
    let inputs = plot::polylines(&text, "input");
    ensure(inputs.len() == 5 && plot::polylines(&text, "solution").len() == 1, "unexpected polyline count")?;
    let solution = &rec.results[0];
    let mut worst: f64 = 0.0;
    for p in inputs.iter().flatten() {
        worst = worst.max(solution.level(&DVector::from_vec(p.to_vec())).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1.0 + 1e-6, format!("input vertex at level {worst}"))?;
    Ok(format!("5 x {} vertices, max level {worst:.9}, byte-identical", plot::SEGMENTS + 1))
}

fn main() {
    let sweep = theorem_sweep();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("worked example: CU of two offset unit disks", cu_worked_example()),
        ("1D translation consistency example", translation_chain()),
        ("GCU direct and enclosing-ellipsoid solutions agree", theorem_reproduction(&sweep)),
        ("single-enclosure predicate equivalence", single_enclosure()),
        ("S-procedure multipliers stay at most 1", tau_bound(&sweep)),
        ("CI joint covariance bound", ci_joint_bound()),
        ("Kalman fused covariance below every input", kalman_dominance()),
        ("maxdet solver certification on concentric disks", maxdet_certification()),
        ("five-ellipse GCU plot", figure_reproduction()),
    ];
    let mut failed = 0;
    for (name, outcome) in &criteria {
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
