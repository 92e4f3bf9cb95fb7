//! Nelder-Mead simplex minimisation.

use alloc::vec;
use alloc::vec::Vec;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Largest vertex distance (max norm) from the best vertex.
    pub x_tol: f64,
    /// Largest objective difference across the simplex.
    pub f_tol: f64,
    /// Per-coordinate offsets of the initial simplex; `None` uses
    /// `0.1 * |x0_i|`, or 0.1 for coordinates near zero.
    pub steps: Option<Vec<f64>>,
    /// Record the best objective after every iteration.
    pub trace: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            x_tol: 1e-8,
            f_tol: 1e-8,
            steps: None,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective per iteration when tracing was requested.
    pub trace: Vec<f64>,
}

/// Minimises `f` starting from `x0`.
///
/// NaN objective values are treated as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let dim = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        let step = match &opts.steps {
            Some(s) => s[i],
            None if x0[i].abs() > 1e-8 => 0.1 * x0[i].abs(),
            None => 0.1,
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..=dim).collect();
    let mut centroid = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;

    let point = |c: &[f64], towards: &[f64], coef: f64| -> Vec<f64> {
        c.iter().zip(towards).map(|(ci, ti)| ci + coef * (ti - ci)).collect()
    };

    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim.saturating_sub(1)];

        let spread = values[worst] - values[best];
        let size = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size <= opts.x_tol && (spread <= opts.f_tol || (values[worst] == values[best])) {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        let xr = point(&centroid, &simplex[worst], -REFLECT);
        let fr = eval(&xr);
        if fr < values[best] {
            let xe = point(&centroid, &xr, EXPAND);
            let fe = eval(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            let outside = fr < values[worst];
            let (xc, fc) = if outside {
                let xc = point(&centroid, &xr, CONTRACT);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = point(&centroid, &simplex[worst], CONTRACT);
                let fc = eval(&xc);
                (xc, fc)
            };
            let accept = if outside { fc <= fr } else { fc < values[worst] };
            if accept {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                let anchor = simplex[best].clone();
                for &i in &order[1..] {
                    simplex[i] = point(&anchor, &simplex[i], SHRINK);
                    values[i] = eval(&simplex[i]);
                }
            }
        }
        if opts.trace {
            trace.push(values.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }

    let best = (0..=dim).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    Minimum {
        x: simplex.swap_remove(best),
        f: values[best],
        iterations,
        evaluations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            x_tol: 1e-10,
            f_tol: 1e-14,
            trace: true,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_bowl_in_five_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - i as f64).powi(2)).sum::<f64>();
        let m = nelder_mead(f, &[0.0; 5], &NelderMeadOptions::default());
        assert!(m.converged);
        for (i, v) in m.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn iteration_cap_reported() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_iter: 5,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &opts);
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
    }

    #[test]
    fn nan_treated_as_infinite() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        let m = nelder_mead(f, &[0.5], &NelderMeadOptions::default());
        assert!((m.x[0] - 2.0).abs() < 1e-6);
    }
}
