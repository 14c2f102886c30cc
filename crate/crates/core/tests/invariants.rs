//! Structural properties that must hold for any transform series.

use discgof::bootstrap::p_value;
use discgof::process::{r1m_eval, r1m_profile, r2m_eval, r2m_surface, s1_eval, s1_profile, s2_eval, s2_surface, GridSettings};
use discgof::stat::{cvm_1d, cvm_2d, ks_1d, ks_2d, Measure};
use discgof::transform::{NoiseMatrix, PitPair, TransformSeries};
use proptest::prelude::*;

fn series() -> impl Strategy<Value = TransformSeries> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..25).prop_map(|cells| {
        TransformSeries::new(
            cells
                .into_iter()
                .map(|(a, b)| {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    PitPair::new(lo, hi.max(lo + 1e-6).min(1.0)).unwrap()
                })
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_is_a_cdf_on_the_unit_interval(ts in series(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        for p in ts.pairs() {
            let (a, b) = (p.transform(u.min(v)), p.transform(u.max(v)));
            prop_assert!((0.0..=1.0).contains(&a) && a <= b);
            prop_assert_eq!(p.transform(0.0), 0.0);
            prop_assert_eq!(p.transform(1.0), 1.0);
        }
    }

    #[test]
    fn univariate_processes_pin_at_the_ends(ts in series(), seed in any::<u64>()) {
        prop_assert!(s1_eval(&ts, 0.0).abs() < 1e-12 && s1_eval(&ts, 1.0).abs() < 1e-12);
        let noise = NoiseMatrix::seeded(ts.len(), 3, seed, 0).unwrap();
        prop_assert!(r1m_eval(&ts, &noise, 1.0).unwrap().abs() < 1e-12);
        let bound = (ts.len() as f64).sqrt();
        prop_assert!(ks_1d(&s1_profile(&ts)).value <= bound);
    }

    #[test]
    fn profiles_agree_with_direct_evaluation(ts in series(), seed in any::<u64>(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let s1 = s1_profile(&ts);
        prop_assert!((s1.eval(u) - s1_eval(&ts, u)).abs() < 1e-12);
        let noise = NoiseMatrix::seeded(ts.len(), 2, seed, 1).unwrap();
        let r1 = r1m_profile(&ts, &noise).unwrap();
        prop_assert!((r1.eval(u) - r1m_eval(&ts, &noise, u).unwrap()).abs() < 1e-12);
        let s2 = s2_surface(&ts, GridSettings::exact()).unwrap();
        prop_assert!((s2.eval(u, v) - s2_eval(&ts, u, v).unwrap()).abs() < 1e-12);
        let r2 = r2m_surface(&ts, &noise, GridSettings::exact()).unwrap();
        prop_assert!((r2.eval(u, v) - r2m_eval(&ts, &noise, u, v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn integral_never_exceeds_squared_supremum(ts in series(), seed in any::<u64>()) {
        let p = s1_profile(&ts);
        prop_assert!(cvm_1d(&p, Measure::Lebesgue).value <= ks_1d(&p).value.powi(2) + 1e-12);
        let s = s2_surface(&ts, GridSettings::exact()).unwrap();
        prop_assert!(cvm_2d(&s, Measure::Lebesgue).value <= ks_2d(&s).value.powi(2) + 1e-12);
        let noise = NoiseMatrix::seeded(ts.len(), 2, seed, 2).unwrap();
        let r = r2m_surface(&ts, &noise, GridSettings::exact()).unwrap();
        prop_assert!(cvm_2d(&r, Measure::Lebesgue).value <= ks_2d(&r).value.powi(2) + 1e-12);
    }

    #[test]
    fn bivariate_surface_vanishes_on_the_axes(ts in series(), u in 0.0f64..1.0) {
        prop_assert!(s2_eval(&ts, u, 0.0).unwrap().abs() < 1e-12);
        prop_assert!(s2_eval(&ts, 0.0, u).unwrap().abs() < 1e-12);
    }

    #[test]
    fn p_values_are_valid_and_monotone(draws in prop::collection::vec(0.0f64..5.0, 1..200), a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let n = draws.len() as f64;
        let (pa, pb) = (p_value(a, &draws), p_value(b, &draws));
        prop_assert!(pa >= 1.0 / (n + 1.0) && pa <= 1.0);
        if a <= b {
            prop_assert!(pa >= pb);
        }
    }
}
