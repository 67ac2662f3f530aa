use kgacc::bench::{binomial_weights, default_mu_grid, expected_width};
use kgacc::intervals::{et_cri, hpd_cri, posterior_update, wilson, Method};
use kgacc::BetaParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{density_grid_oracle, quantile_grid_oracle};

const ALPHAS: [f64; 3] = [0.1, 0.05, 0.01];
const PRIORS: [BetaParams; 3] = [
    BetaParams::KERMAN,
    BetaParams::JEFFREYS,
    BetaParams::UNIFORM,
];

fn random_posterior(rng: &mut ChaCha8Rng) -> BetaParams {
    let prior = PRIORS[rng.random_range(0..3)];
    let n = rng.random_range(1..=400) as f64;
    let tau = rng.random_range(0..=n as usize) as f64;
    posterior_update(prior, tau, n).unwrap()
}

#[test]
fn hpd_never_wider_than_et() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let p = random_posterior(&mut rng);
        for alpha in ALPHAS {
            let hpd = hpd_cri(p, alpha).unwrap();
            let et = et_cri(p, alpha).unwrap();
            assert!(
                hpd.width() <= et.width() + 1e-9,
                "{p:?} {alpha}: {hpd:?} vs {et:?}"
            );
        }
    }
}

#[test]
fn coverage_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let p = random_posterior(&mut rng);
        for alpha in ALPHAS {
            for ci in [hpd_cri(p, alpha).unwrap(), et_cri(p, alpha).unwrap()] {
                let mass = p.cdf(ci.upper) - p.cdf(ci.lower);
                assert!(
                    (mass - (1.0 - alpha)).abs() <= 1e-8,
                    "{p:?} {alpha}: {mass}"
                );
            }
        }
    }
}

#[test]
fn interior_hpd_matches_quantile_grid() {
    let p = BetaParams::new(8.0, 3.0).unwrap();
    let (l, u) = quantile_grid_oracle(p, 0.05, 1e-5);
    let hpd = hpd_cri(p, 0.05).unwrap();
    assert!((hpd.lower - l).abs() < 1e-4 && (hpd.upper - u).abs() < 1e-4);
    assert!(hpd.width() < et_cri(p, 0.05).unwrap().width());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let p =
            BetaParams::new(rng.random_range(1.2..200.0), rng.random_range(1.2..200.0)).unwrap();
        let alpha = ALPHAS[rng.random_range(0..3)];
        let (l, u) = quantile_grid_oracle(p, alpha, 1e-5);
        let hpd = hpd_cri(p, alpha).unwrap();
        assert!(
            (hpd.lower - l).abs() < 1e-4,
            "{p:?} {alpha}: {} vs {l}",
            hpd.lower
        );
        assert!(
            (hpd.upper - u).abs() < 1e-4,
            "{p:?} {alpha}: {} vs {u}",
            hpd.upper
        );
    }
}

#[test]
fn hpd_matches_density_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..60 {
        // a, b >= 1 keeps the density finite on [0, 1]
        let n = rng.random_range(1..300) as f64;
        let tau = rng.random_range(0..=n as usize) as f64;
        let p = posterior_update(BetaParams::UNIFORM, tau, n).unwrap();
        let alpha = ALPHAS[rng.random_range(0..3)];
        let (l, u) = density_grid_oracle(p.a(), p.b(), alpha, 200_000);
        let hpd = hpd_cri(p, alpha).unwrap();
        assert!(
            (hpd.lower - l).abs() < 1e-4,
            "{p:?} {alpha}: {} vs {l}",
            hpd.lower
        );
        assert!(
            (hpd.upper - u).abs() < 1e-4,
            "{p:?} {alpha}: {} vs {u}",
            hpd.upper
        );
    }
}

#[test]
fn monotone_posteriors_use_closed_forms() {
    for n in [1.0, 5.0, 30.0, 200.0] {
        for alpha in ALPHAS {
            // all correct: increasing density, interval reaches 1
            let up = posterior_update(BetaParams::UNIFORM, n, n).unwrap();
            let hpd = hpd_cri(up, alpha).unwrap();
            assert_eq!(hpd.upper, 1.0);
            assert!((hpd.lower - alpha.powf(1.0 / (n + 1.0))).abs() < 1e-12);
            let (l, u) = density_grid_oracle(up.a(), up.b(), alpha, 200_000);
            assert!((hpd.lower - l).abs() < 1e-4 && (1.0 - u).abs() < 1e-4);

            // all incorrect: decreasing density, interval starts at 0
            let down = posterior_update(BetaParams::UNIFORM, 0.0, n).unwrap();
            let hpd = hpd_cri(down, alpha).unwrap();
            assert_eq!(hpd.lower, 0.0);
            assert!((hpd.upper - (1.0 - alpha.powf(1.0 / (n + 1.0)))).abs() < 1e-12);

            for prior in [BetaParams::KERMAN, BetaParams::JEFFREYS] {
                let p = posterior_update(prior, n, n).unwrap();
                let (l, u) = quantile_grid_oracle(p, alpha, 1e-5);
                let hpd = hpd_cri(p, alpha).unwrap();
                assert!((hpd.lower - l).abs() < 1e-4 && (hpd.upper - u).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn monotone_hpd_cannot_be_shifted() {
    for prior in PRIORS {
        for n in [1.0, 10.0, 30.0, 100.0] {
            for tau in [0.0, n] {
                let p = posterior_update(prior, tau, n).unwrap();
                for alpha in ALPHAS {
                    let hpd = hpd_cri(p, alpha).unwrap();
                    let cover = |l: f64, u: f64| p.cdf(u.min(1.0)) - p.cdf(l.max(0.0));
                    for delta in [1e-3, 1e-2] {
                        // same width moved either way loses mass
                        for shift in [-delta, delta] {
                            let (l, u) = (hpd.lower + shift, hpd.upper + shift);
                            if l < 0.0 || u > 1.0 {
                                continue;
                            }
                            assert!(cover(l, u) < 1.0 - alpha, "{p:?} {alpha} {shift}");
                        }
                        // same coverage from a moved open end needs more width
                        let moved = if tau == 0.0 {
                            let l = delta;
                            let u = p.quantile((p.cdf(l) + 1.0 - alpha).min(1.0));
                            (l, u)
                        } else {
                            let u = 1.0 - delta;
                            let l = p.quantile((p.cdf(u) - (1.0 - alpha)).max(0.0));
                            (l, u)
                        };
                        let mass = cover(moved.0, moved.1);
                        assert!(
                            moved.1 - moved.0 > hpd.width() || mass < 1.0 - alpha - 1e-12,
                            "{p:?} {alpha} {delta}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn symmetric_hpd_equals_et() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let k = rng.random_range(1.0001..500.0);
        let p = BetaParams::new(k, k).unwrap();
        for alpha in ALPHAS {
            let hpd = hpd_cri(p, alpha).unwrap();
            let et = et_cri(p, alpha).unwrap();
            assert!((hpd.lower - et.lower).abs() <= 1e-6 && (hpd.upper - et.upper).abs() <= 1e-6);
        }
    }
}

#[test]
fn expected_widths_respect_dominance() {
    let grid = default_mu_grid();
    for &mu in &grid {
        for n in [1, 30, 200] {
            let s: f64 = binomial_weights(n, mu).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "{n} {mu}: {s}");
        }
    }
    for prior in PRIORS {
        for n in [1, 10, 30] {
            for alpha in ALPHAS {
                let hpd = expected_width(prior, n, alpha, &grid, Method::Hpd).unwrap();
                let et = expected_width(prior, n, alpha, &grid, Method::Et).unwrap();
                for (h, e) in hpd.iter().zip(&et) {
                    assert!(h <= &(e + 1e-9));
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn wilson_stays_inside_unit_interval(mu in 0.0f64..=1.0, n in 1.0f64..5000.0, ai in 0usize..3) {
        let ci = wilson(mu, n, ALPHAS[ai]).unwrap();
        prop_assert!(ci.lower <= mu + 1e-12 && mu <= ci.upper + 1e-12);
        if mu > 0.0 && mu < 1.0 {
            prop_assert!(ci.lower > 0.0 && ci.upper < 1.0);
        } else {
            prop_assert!(ci.lower >= 0.0 && ci.upper <= 1.0);
        }
    }
}
