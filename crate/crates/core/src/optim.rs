//! Small derivative-free optimizers: golden-section search and an adaptive
//! Nelder-Mead simplex with restarts.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes a unimodal `f` on `[lo, hi]`. The endpoints are evaluated too,
/// so minima on the boundary are returned exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Convergence when the simplex function spread falls below this.
    pub ftol: f64,
    /// ... and every vertex is within this distance of the best one.
    pub xtol: f64,
    /// Number of fresh-simplex restarts around the incumbent.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            ftol: 1e-13,
            xtol: 1e-10,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Adaptive Nelder-Mead (dimension-dependent coefficients) started from the
/// axis-aligned simplex `x0 + steps[i] e_i`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    cfg: &NelderMeadConfig,
) -> NelderMeadResult {
    let n = x0.len();
    assert_eq!(n, steps.len());
    let mut evals = 0usize;
    let mut best_x = x0.to_vec();
    let mut best_f = f(x0);
    evals += 1;
    if n == 0 {
        return NelderMeadResult { x: best_x, f: best_f, evals, converged: true };
    }
    let mut scale: Vec<f64> = steps.to_vec();
    let mut converged = false;
    for round in 0..=cfg.restarts {
        let (x, fx, used, ok) = nm_run(&mut f, &best_x, best_f, &scale, cfg, cfg.max_evals.saturating_sub(evals));
        evals += used;
        let improvement = best_f - fx;
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        converged = ok;
        if evals >= cfg.max_evals {
            break;
        }
        if round > 0 && improvement <= cfg.ftol {
            break;
        }
        // restart with a smaller simplex around the incumbent
        for s in scale.iter_mut() {
            *s *= 0.1;
        }
    }
    NelderMeadResult { x: best_x, f: best_f, evals, converged }
}

fn nm_run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    steps: &[f64],
    cfg: &NelderMeadConfig,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let mut used = 0usize;
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    pts.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = f(&x);
        used += 1;
        pts.push((x, fx));
    }
    let mut converged = false;
    while used < budget {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = pts[n].1 - pts[0].1;
        let size = pts[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&pts[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= cfg.ftol && size <= cfg.xtol {
            converged = true;
            break;
        }
        if size <= 1e-15 {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let worst = pts[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        used += 1;
        if fr < pts[0].1 {
            let xe = along(alpha * beta);
            let fe = f(&xe);
            used += 1;
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(alpha * gamma);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = f(&xc);
            (xc, fc)
        };
        used += 1;
        if fc < worst.1.min(fr) {
            pts[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = pts[0].0.clone();
        for p in pts.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&p.0)
                .map(|(b, v)| b + delta * (v - b))
                .collect();
            let fx = f(&x);
            used += 1;
            *p = (x, fx);
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = pts.swap_remove(0);
    (x, fx, used, converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_and_endpoint_minima() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
        let (x, fx) = golden_section(|x| -x, 0.0, 1.0, 1e-12);
        assert_eq!(x, 1.0);
        assert_eq!(fx, -1.0);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], &[0.5, 0.5], &NelderMeadConfig::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn nelder_mead_one_dimensional() {
        let r = nelder_mead(|x| (x[0] + 2.0).abs(), &[5.0], &[1.0], &NelderMeadConfig::default());
        assert!((r.x[0] + 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn nelder_mead_kinked_max() {
        let f = |x: &[f64]| (x[0] - 1.0).abs().max((x[1] + 2.0).abs()) + 0.1 * x[2].powi(2);
        let r = nelder_mead(f, &[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0], &NelderMeadConfig::default());
        assert!(r.f < 1e-6, "{r:?}");
    }
}
