//! Small dense quasi-Newton minimizer for the variance-component criterion.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Settings {
    pub max_iter: usize,
    /// Stop when the relative change of the objective drops below this.
    pub rel_tol: f64,
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-5 * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        g[i] = if up.is_finite() && down.is_finite() {
            (up - down) / (2.0 * h)
        } else if up.is_finite() {
            (up - fx) / h
        } else {
            (fx - down) / h
        };
    }
    g
}

/// BFGS with a backtracking Armijo line search and central-difference
/// gradients. `f` may return `+inf` outside its domain.
pub(crate) fn bfgs<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], settings: &Settings) -> Minimum {
    let n = start.len();
    let mut x = DVector::from_column_slice(start);
    let mut fx = f(x.as_slice());
    let mut g = gradient(&f, x.as_slice(), fx);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut restarted = false;

    for iter in 1..=settings.max_iter {
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if restarted || g.norm() < 1e-8 {
                return Minimum { x: x.as_slice().to_vec(), iterations: iter, converged: true };
            }
            hinv = DMatrix::identity(n, n);
            restarted = true;
            continue;
        };
        restarted = false;
        let g_new = gradient(&f, x_new.as_slice(), f_new);
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        let change = (fx - f_new).abs() / fx.abs().max(1e-10);
        x = x_new;
        fx = f_new;
        g = g_new;
        if change < settings.rel_tol {
            return Minimum { x: x.as_slice().to_vec(), iterations: iter, converged: true };
        }
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv +=
                (&s * s.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
    }
    Minimum { x: x.as_slice().to_vec(), iterations: settings.max_iter, converged: false }
}
