use std::f64::consts::PI;

use proptest::prelude::*;
use resoforge::cover::{free_params, Classifier, RegionKind};
use resoforge::fourier::OneDTrigPoly;
use resoforge::morse::{critical_points, DEFAULT_TOL};

fn unit_ball_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2..=3)
        .prop_filter("inside the unit ball", |y| y.iter().map(|v| v * v).sum::<f64>() < 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn every_ball_point_is_labelled(y in unit_ball_point(), alpha in 0.005f64..0.05) {
        let classifier = Classifier::new(&free_params(y.len(), 1.0, alpha, 2, 12).unwrap());
        prop_assert!(!classifier.classify(&y).unwrap().is_empty());
    }

    #[test]
    fn labels_match_their_defining_inequalities(y in unit_ball_point()) {
        let alpha = 0.02;
        let params = free_params(y.len(), 1.0, alpha, 2, 12).unwrap();
        let classifier = Classifier::new(&params);
        for label in classifier.classify(&y).unwrap() {
            match label.kind {
                RegionKind::R0 => {
                    for k in classifier.low_generators() {
                        prop_assert!(k.dot(&y).abs() > alpha / 2.0);
                    }
                }
                RegionKind::R1 => {
                    let k = label.k.unwrap();
                    prop_assert!(k.dot(&y).abs() < alpha);
                }
                RegionKind::R2 => {
                    let k = label.k.unwrap();
                    prop_assert!(label.l.unwrap() != k);
                }
            }
        }
    }

    #[test]
    fn labels_are_homogeneous_in_width(y in unit_ball_point(), t in 0.3f64..0.9) {
        let alpha = 0.03;
        let wide = Classifier::new(&free_params(y.len(), 1.0, alpha, 2, 10).unwrap());
        let narrow = Classifier::new(&free_params(y.len(), 1.0, alpha * t, 2, 10).unwrap());
        let scaled: Vec<f64> = y.iter().map(|v| v * t).collect();
        let a = wide.summary(&y);
        let b = narrow.summary(&scaled);
        // strict inequalities can flip only on a measure-zero boundary
        prop_assert_eq!(a.r0, b.r0);
        prop_assert_eq!(a.r1, b.r1);
    }

    #[test]
    fn morse_constant_scales_and_ignores_shifts(
        a in 0.2f64..1.0,
        b in -0.3f64..0.3,
        c in -0.1f64..0.1,
        lambda in 0.1f64..10.0,
        shift in -PI..PI,
    ) {
        let g = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, a, b), OneDTrigPoly::cos_sin(2, c, 0.0)]);
        let base = critical_points(&g, DEFAULT_TOL).unwrap();
        let moved = critical_points(&g.scaled(lambda).shifted(shift), DEFAULT_TOL).unwrap();
        prop_assert!((moved.beta - lambda * base.beta).abs() < 1e-9 * lambda);
        prop_assert_eq!(base.count(), moved.count());
        prop_assert!(base.count().is_multiple_of(2));
        prop_assert!(base.alternates());
        prop_assert!(base.within_count_bound());
    }

    #[test]
    fn pure_cosine_has_beta_equal_to_amplitude(a in 0.01f64..5.0, phase in -PI..PI) {
        let g = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, a * phase.cos(), a * phase.sin())]);
        let report = critical_points(&g, DEFAULT_TOL).unwrap();
        prop_assert!((report.beta - a).abs() < 1e-9 * a);
        prop_assert!((report.min_value_gap - 2.0 * a).abs() < 1e-9 * a);
        prop_assert_eq!(report.count(), 2);
    }
}
