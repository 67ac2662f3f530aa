use kgacc::special::{beta_cdf, beta_pdf, beta_quantile, log_gamma, normal_quantile};
use kgacc::BetaParams;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = f64> {
    // log-uniform over [0.1, 500]
    (0.1f64.ln()..500f64.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 2000,
        max_global_rejects: 20_000,
        ..ProptestConfig::default()
    })]

    #[test]
    fn reflection(x in 0.0f64..=1.0, a in shape(), b in shape()) {
        let p = BetaParams::new(a, b).unwrap();
        let lhs = beta_cdf(x, p).unwrap() + beta_cdf(1.0 - x, p.reflect()).unwrap();
        prop_assert!((lhs - 1.0).abs() <= 1e-10, "{lhs}");
    }

    #[test]
    fn quantile_inverts_cdf(x in 0.001f64..=0.999, a in shape(), b in shape()) {
        let p = BetaParams::new(a, b).unwrap();
        // where the density is negligible the CDF is flat to double precision
        // and x is not recoverable from F(x)
        prop_assume!(beta_pdf(x, p).unwrap() >= 1e-6);
        let back = beta_quantile(beta_cdf(x, p).unwrap(), p).unwrap();
        prop_assert!((back - x).abs() <= 1e-8, "{x} -> {back}");
    }

    #[test]
    fn cdf_derivative_is_pdf(x in 0.05f64..=0.95, a in 0.5f64..60.0, b in 0.5f64..60.0) {
        let p = BetaParams::new(a, b).unwrap();
        let f = beta_pdf(x, p).unwrap();
        prop_assume!(f > 1e-3);
        let h = 1e-5;
        let fd = (beta_cdf(x + h, p).unwrap() - beta_cdf(x - h, p).unwrap()) / (2.0 * h);
        prop_assert!((fd - f).abs() <= 1e-5 * f, "{fd} vs {f}");
    }

    #[test]
    fn cdf_and_quantile_are_monotone(
        x in 0.0f64..=1.0, dx in 0.0f64..0.2,
        q in 0.0f64..=1.0, dq in 0.0f64..0.2,
        a in shape(), b in shape(),
    ) {
        let p = BetaParams::new(a, b).unwrap();
        let x2 = (x + dx).min(1.0);
        let q2 = (q + dq).min(1.0);
        prop_assert!(beta_cdf(x, p).unwrap() <= beta_cdf(x2, p).unwrap());
        prop_assert!(beta_quantile(q, p).unwrap() <= beta_quantile(q2, p).unwrap());
    }

    #[test]
    fn log_gamma_recurrence(x in 1e-3f64..1e5) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0) * 4.0, "{lhs} {rhs}");
    }

    #[test]
    fn normal_quantile_is_odd(q in 1e-6f64..0.5) {
        let lo = normal_quantile(q).unwrap();
        let hi = normal_quantile(1.0 - q).unwrap();
        prop_assert!((lo + hi).abs() <= 1e-9 * hi.abs().max(1.0));
    }
}

#[test]
fn normal_critical_value() {
    assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-6);
}
