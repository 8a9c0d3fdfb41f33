//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use fgof::rng::stream_rng;
use fgof::{Kernel, ScoreMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn epanechnikov(x: f64) -> f64 {
    if x.abs() < 1.0 {
        1.0 - x * x
    } else {
        0.0
    }
}

pub fn gaussian(x: f64) -> f64 {
    (-0.5 * x * x).exp()
}

pub fn kernel_fn(k: Kernel) -> fn(f64) -> f64 {
    match k {
        Kernel::Epanechnikov => epanechnikov,
        Kernel::Gaussian => gaussian,
    }
}

fn proj(row: &[f64], gamma: &[f64]) -> f64 {
    row.iter().zip(gamma).map(|(a, b)| a * b).sum()
}

/// `⟨X_i − X_j, γ⟩` computed from the raw difference.
fn diff_proj(xi: &[f64], xj: &[f64], gamma: &[f64]) -> f64 {
    xi.iter()
        .zip(xj)
        .zip(gamma)
        .map(|((a, b), g)| (a - b) * g)
        .sum()
}

pub fn naive_q(u: &[f64], x: &[Vec<f64>], gamma: &[f64], h: f64, k: Kernel) -> f64 {
    let n = u.len();
    let kf = kernel_fn(k);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += u[i] * u[j] * kf(diff_proj(&x[i], &x[j], gamma) / h);
            }
        }
    }
    s / (n as f64 * (n as f64 - 1.0) * h)
}

pub fn naive_tau(u: &[f64], x: &[Vec<f64>], gamma: &[f64], h: f64, k: Kernel) -> f64 {
    let n = u.len();
    let kf = kernel_fn(k);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = kf(diff_proj(&x[i], &x[j], gamma) / h);
                s += u[i] * u[i] * u[j] * u[j] * w * w;
            }
        }
    }
    2.0 * s / (n as f64 * (n as f64 - 1.0) * h)
}

pub fn naive_sigma(t: f64, u: &[f64], x: &[Vec<f64>], gamma: &[f64], h_v: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ui, xi) in u.iter().zip(x) {
        if (proj(xi, gamma) - t).abs() <= h_v {
            num += ui * ui;
            den += 1.0;
        }
    }
    if den == 0.0 {
        u.iter().map(|v| v * v).sum::<f64>() / u.len() as f64
    } else {
        num / den
    }
}

pub fn naive_v_cond(u: &[f64], x: &[Vec<f64>], gamma0: &[f64], h: f64, h_v: f64, k: Kernel) -> f64 {
    let n = u.len();
    let kf = kernel_fn(k);
    let sig: Vec<f64> = x
        .iter()
        .map(|xi| naive_sigma(proj(xi, gamma0), u, x, gamma0, h_v))
        .collect();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = kf(diff_proj(&x[i], &x[j], gamma0) / h);
                s += sig[i] * sig[j] * w * w;
            }
        }
    }
    2.0 * s / (n as f64 * (n as f64 - 1.0) * h)
}

pub struct Instance {
    pub u: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub h: f64,
}

impl Instance {
    pub fn scores(&self) -> ScoreMatrix<f64> {
        ScoreMatrix::from_rows(&self.x).unwrap()
    }
}

pub fn random_unit<R: Rng>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// A random statistic instance with `2 ≤ n ≤ max_n`, `1 ≤ p ≤ max_p`.
pub fn random_instance(seed: u64, max_n: usize, max_p: usize) -> Instance {
    let mut rng = stream_rng(seed, &[42]);
    let n = rng.random_range(2..=max_n);
    let p = rng.random_range(1..=max_p);
    let u = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5)
                .collect()
        })
        .collect();
    let gamma = random_unit(p, &mut rng);
    let h = rng.random_range(0.2..1.5);
    Instance { u, x, gamma, h }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Brownian curves with `Y = ∫X + N(0,1)` noise.
pub fn linear_null(n: usize, seed: u64, grid_size: usize) -> (Vec<fgof::Curve64>, Vec<f64>) {
    use fgof::simulate::{generate_scenario, Scenario, ScenarioKind};
    let s = Scenario {
        grid_size,
        ..Scenario::new(ScenarioKind::LinearNull, n, 0.0)
    };
    generate_scenario(&s, &mut stream_rng(seed, &[fgof::rng::tag::DATA])).unwrap()
}

/// Scores on the KL sine basis of dimension `p`.
pub fn kl_scores(curves: &[fgof::Curve64], p: usize) -> ScoreMatrix<f64> {
    let basis = fgof::kl_sine_basis(curves[0].grid().clone(), p).unwrap();
    fgof::project(curves, &basis).unwrap()
}
