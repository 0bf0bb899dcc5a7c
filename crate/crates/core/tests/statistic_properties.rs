use covrank::{csv_statistic, CsvInput, QuadratureSettings, Scale};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn stat(eigs: &[f64], k: usize, scale: Scale) -> f64 {
    csv_statistic(&CsvInput::new(eigs.to_vec(), k, scale).unwrap(), &QuadratureSettings::default()).unwrap()
}

/// With `(λ, 0, …, 0)` the step-1 integrand is `u^{2(p−1)} e^{−u²/2σ²}` with
/// `σ = λ/p`, so the statistic is the chi-square tail `P(χ²_{2p−1} > p²)`.
#[test]
fn rank_one_spectrum_is_a_chi_square_tail() {
    for p in 2..=10usize {
        let mut eigs = vec![0.0; p];
        eigs[0] = 3.7;
        let expected = 1.0 - ChiSquared::new((2 * p - 1) as f64).unwrap().cdf((p * p) as f64);
        let got = stat(&eigs, 1, Scale::PlugIn);
        assert!((got - expected).abs() <= 1e-9, "p={p}: {got} vs {expected}");
    }
}

/// With an explicit scale the same spectrum gives `P(χ²_{2p−1} > λ²/σ²)`.
#[test]
fn explicit_scale_rank_one() {
    let eigs = [2.0, 0.0, 0.0, 0.0];
    for s2 in [0.25, 1.0, 4.0] {
        let expected = 1.0 - ChiSquared::new(7.0).unwrap().cdf(4.0 / s2);
        assert!((stat(&eigs, 1, Scale::Explicit(s2)) - expected).abs() <= 1e-9);
    }
}

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 3..=10).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn statistic_in_unit_interval(eigs in spectrum(), k_frac in 0.0f64..1.0) {
        let k = 1 + (k_frac * (eigs.len() - 1) as f64) as usize;
        let s = stat(&eigs, k.min(eigs.len() - 1), Scale::PlugIn);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn scale_invariant(eigs in spectrum(), k_frac in 0.0f64..1.0, c in prop::sample::select(vec![1e-3, 0.37, 1e3])) {
        let k = (1 + (k_frac * (eigs.len() - 1) as f64) as usize).min(eigs.len() - 1);
        let scaled: Vec<f64> = eigs.iter().map(|l| l * c).collect();
        let a = stat(&eigs, k, Scale::PlugIn);
        let b = stat(&scaled, k, Scale::PlugIn);
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn nonincreasing_in_lambda_k(eigs in spectrum(), k_frac in 0.0f64..1.0, s2 in 0.01f64..1.0) {
        let p = eigs.len();
        let k = (1 + (k_frac * (p - 1) as f64) as usize).min(p - 1);
        let lower = eigs[k];
        let upper = if k == 1 { lower + 2.0 } else { eigs[k - 2] };
        let mut prev = f64::INFINITY;
        for t in 0..=20 {
            let mut e = eigs.clone();
            e[k - 1] = (lower + (upper - lower) * t as f64 / 20.0).min(upper);
            let s = stat(&e, k, Scale::Explicit(s2));
            prop_assert!(s <= prev + 1e-9, "step {}: {} after {}", t, s, prev);
            prev = s;
        }
    }
}
