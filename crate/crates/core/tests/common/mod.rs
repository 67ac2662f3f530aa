//! Oracles shared by the theorem and acceptance suites.
#![allow(dead_code)]

use std::collections::HashSet;

use kgacc::sampling::{estimate_srs, estimate_twcs, srs_draw, twcs_draw, AnnotatedSample};
use kgacc::{BetaParams, KnowledgeGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shortest `[Q(p), Q(p + 1 - alpha)]` over `p` on a grid of step `h` in
/// lower-tail probability, endpoints included.
pub fn quantile_grid_oracle(p: BetaParams, alpha: f64, h: f64) -> (f64, f64) {
    let steps = (alpha / h).ceil() as usize;
    let mut best = (0.0, 1.0);
    for i in 0..=steps {
        let lo_mass = (i as f64 * h).min(alpha);
        let l = p.quantile(lo_mass);
        let u = if lo_mass == alpha {
            1.0
        } else {
            1.0 - p.reflect().quantile(alpha - lo_mass)
        };
        if u - l < best.1 - best.0 {
            best = (l, u);
        }
    }
    best
}

/// Shortest interval holding `1 - alpha` of a finite density tabulated on a
/// uniform grid. Needs nothing but the unnormalised density.
pub fn density_grid_oracle(a: f64, b: f64, alpha: f64, cells: usize) -> (f64, f64) {
    let h = 1.0 / cells as f64;
    let ln_f = |x: f64| (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p();
    let xs: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
    let peak = xs[1..cells]
        .iter()
        .map(|&x| ln_f(x))
        .fold(f64::MIN, f64::max);
    let f: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let v = ln_f(x) - peak;
            if v.is_nan() {
                0.0
            } else {
                v.exp()
            }
        })
        .collect();
    let mut cum = vec![0.0; cells + 1];
    for i in 1..=cells {
        cum[i] = cum[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    let target = (1.0 - alpha) * cum[cells];
    let mut best = (0.0, 1.0);
    let mut j = 0;
    for i in 0..=cells {
        while j < cells && cum[j] - cum[i] < target {
            j += 1;
        }
        if cum[j] - cum[i] < target {
            break;
        }
        // linear interpolation inside the last cell
        let over = cum[j] - cum[i] - target;
        let cell = cum[j] - cum[j - 1];
        let u = xs[j] - if cell > 0.0 { over / cell * h } else { 0.0 };
        if u - xs[i] < best.1 - best.0 {
            best = (xs[i], u);
        }
    }
    best
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn srs_estimates(kg: &KnowledgeGraph, n: usize, draws: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..draws)
        .map(|_| {
            let mut drawn = HashSet::new();
            let mut s = AnnotatedSample::srs();
            for t in srs_draw(kg, n, &mut drawn, &mut rng).unwrap() {
                s.push(kg, t, kg.label(t).unwrap());
            }
            estimate_srs(&s).unwrap().mu_hat
        })
        .collect()
}

pub fn twcs_estimates(kg: &KnowledgeGraph, clusters: usize, m: usize, draws: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    (0..draws)
        .map(|_| {
            let mut s = AnnotatedSample::twcs();
            for d in twcs_draw(kg, clusters, m, &mut rng).unwrap() {
                let labelled: Vec<(usize, bool)> = d
                    .triples
                    .iter()
                    .map(|&t| (t, kg.label(t).unwrap()))
                    .collect();
                s.push_group(kg, d.cluster, &labelled);
            }
            estimate_twcs(&s).unwrap().mu_hat
        })
        .collect()
}
