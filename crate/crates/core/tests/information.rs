//! Expected information against Monte Carlo averages of numeric derivatives of
//! an independently written per-observation log density.

use evinlier_core::inference::{fisher_information, FisherMatrix};
use evinlier_core::sampler::{sample, SampleSpec};
use evinlier_core::FevimmParams;
use statrs::function::gamma::{gamma_lr, ln_gamma};

const DRAWS: usize = 1_000_000;

/// Log density with the threshold held fixed, parameterised in the label
/// order of the information matrix.
struct LogDensity {
    u: f64,
    ln_atom: f64,
    bulk_const: f64,
    eta: f64,
    beta: f64,
    tail_const: f64,
    xi: f64,
    sigma: f64,
}

impl LogDensity {
    fn new(p: &[f64], u: f64) -> Self {
        let (phi1, eta, beta) = (p[0], p[1], p[2]);
        let (xi, sigma, phi2) = if p.len() == 6 { (p[3], p[4], p[5]) } else { (0.0, p[3], p[4]) };
        let w = 1.0 - phi1 - phi2;
        Self {
            u,
            ln_atom: phi1.ln(),
            bulk_const: w.ln() - ln_gamma(eta) - eta * beta.ln() - gamma_lr(eta, u / beta).ln(),
            eta,
            beta,
            tail_const: phi2.ln() - sigma.ln(),
            xi,
            sigma,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.ln_atom
        } else if x < self.u {
            self.bulk_const + (self.eta - 1.0) * x.ln() - x / self.beta
        } else {
            let y = (x - self.u) / self.sigma;
            if self.xi == 0.0 {
                self.tail_const - y
            } else {
                self.tail_const - (1.0 / self.xi + 1.0) * (self.xi * y).ln_1p()
            }
        }
    }
}

fn mean_loglik(p: &[f64], u: f64, xs: &[f64]) -> f64 {
    let f = LogDensity::new(p, u);
    xs.iter().map(|&x| f.eval(x)).sum::<f64>() / xs.len() as f64
}

fn steps(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| 1e-3 * v.abs().max(0.1)).collect()
}

/// Negative Hessian of the mean log-likelihood by central differences.
fn mc_information(p: &[f64], u: f64, xs: &[f64]) -> Vec<Vec<f64>> {
    let k = p.len();
    let h = steps(p);
    let at = |d: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(i, s) in d {
            q[i] += s;
        }
        mean_loglik(&q, u, xs)
    };
    let c = at(&[]);
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = -(at(&[(i, h[i])]) - 2.0 * c + at(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])]) - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]);
            m[i][j] = -v / (4.0 * h[i] * h[j]);
            m[j][i] = m[i][j];
        }
    }
    m
}

fn draws(theta: &FevimmParams, seed: u64) -> Vec<f64> {
    sample(&SampleSpec {
        n: DRAWS,
        theta: *theta,
        seed,
    })
    .unwrap()
}

fn assert_matches_mc(fisher: &FisherMatrix, mc: &[Vec<f64>]) {
    let labels = fisher.labels();
    for (i, ri) in labels.iter().enumerate() {
        for (j, rj) in labels.iter().enumerate() {
            let a = fisher.matrix()[(i, j)];
            let b = mc[i][j];
            let ok = if a.abs() >= 0.01 {
                (a - b).abs() <= 0.02 * a.abs()
            } else {
                (a - b).abs() <= 0.002
            };
            assert!(ok, "I[{ri},{rj}]: closed form {a}, Monte Carlo {b}");
        }
    }
}

fn params_of(theta: &FevimmParams, with_xi: bool) -> Vec<f64> {
    let t = theta;
    if with_xi {
        vec![t.phi1, t.eta, t.beta, t.xi, t.sigma, t.phi2]
    } else {
        vec![t.phi1, t.eta, t.beta, t.sigma, t.phi2]
    }
}

#[test]
fn information_matches_monte_carlo_hessian() {
    let theta = FevimmParams::new(0.4, 1.0, 5.0, 11.5129, 0.2, 5.0, 0.1).unwrap();
    let xs = draws(&theta, 11);
    let mc = mc_information(&params_of(&theta, true), theta.u, &xs);
    assert_matches_mc(&fisher_information(&theta, theta.u).unwrap(), &mc);
}

#[test]
fn exponential_tail_information_matches_monte_carlo_hessian() {
    let theta = FevimmParams::new(0.3, 2.0, 2.0, 6.0, 0.0, 3.0, 0.15).unwrap();
    let xs = draws(&theta, 12);
    let mc = mc_information(&params_of(&theta, false), theta.u, &xs);
    assert_matches_mc(&fisher_information(&theta, theta.u).unwrap(), &mc);
}

#[test]
fn bounded_tail_information_matches_monte_carlo_hessian() {
    let theta = FevimmParams::new(0.2, 0.8, 3.0, 7.0, -0.25, 4.0, 0.2).unwrap();
    let xs = draws(&theta, 13);
    let mc = mc_information(&params_of(&theta, true), theta.u, &xs);
    assert_matches_mc(&fisher_information(&theta, theta.u).unwrap(), &mc);
}

#[test]
fn score_has_mean_zero() {
    let theta = FevimmParams::new(0.4, 1.0, 5.0, 11.5129, 0.2, 5.0, 0.1).unwrap();
    let xs = draws(&theta, 14);
    let p = params_of(&theta, true);
    let h = steps(&p);
    for i in 0..p.len() {
        let mut up = p.clone();
        let mut down = p.clone();
        up[i] += h[i];
        down[i] -= h[i];
        let (fu, fd) = (LogDensity::new(&up, theta.u), LogDensity::new(&down, theta.u));
        let scores: Vec<f64> = xs.iter().map(|&x| (fu.eval(x) - fd.eval(x)) / (2.0 * h[i])).collect();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(mean.abs() <= 3.0 * se, "score {i}: mean {mean}, se {se}");
    }
}
