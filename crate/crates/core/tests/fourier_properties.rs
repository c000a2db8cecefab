use std::f64::consts::PI;

use num_complex::Complex64;
use num_integer::Integer;
use proptest::prelude::*;
use resoforge::fourier::{generators, ModeVector, OneDTrigPoly, TrigPoly};

fn poly_strategy() -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec(((-3i64..=3, -3i64..=3), (-1.0f64..1.0, -1.0f64..1.0)), 1..8).prop_filter_map(
        "needs a nonzero mode",
        |entries| {
            let modes: Vec<(ModeVector, Complex64)> = entries
                .into_iter()
                .filter(|((a, b), _)| (*a, *b) != (0, 0))
                .map(|((a, b), (re, im))| (ModeVector::new(vec![a, b]).starred().0, Complex64::new(re, im)))
                .collect();
            if modes.is_empty() {
                return None;
            }
            let mut f = TrigPoly::zero(2);
            for (k, c) in modes {
                f.insert(k.clone(), f.coeff(&k) + c).ok()?;
            }
            Some(f)
        },
    )
}

proptest! {
    #[test]
    fn generators_are_primitive_starred_and_bounded(n in 1usize..=4, k in 1u32..=6) {
        let gens = generators(n, k as f64);
        for g in &gens {
            prop_assert!(g.is_starred());
            prop_assert_eq!(g.0.iter().fold(0i64, |a, &b| a.gcd(&b)), 1);
            prop_assert!(g.l1() <= k as i64);
        }
        for w in gens.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn every_primitive_vector_has_one_representative(v in prop::collection::vec(-5i64..=5, 2..=3)) {
        let k = ModeVector::new(v.clone());
        prop_assume!(!k.is_zero() && k.gcd() == 1);
        let gens = generators(v.len(), k.l1() as f64);
        let (star, _) = k.starred();
        prop_assert_eq!(gens.iter().filter(|g| **g == star || **g == star.neg()).count(), 1);
    }

    #[test]
    fn mode_vectors_parse_back(v in prop::collection::vec(-40i64..=40, 1..=5)) {
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        prop_assert_eq!(ModeVector::parse(&text).unwrap().0, v);
    }

    #[test]
    fn norms_are_ordered(f in poly_strategy(), s in 0.1f64..2.0) {
        let sup = f.norm_weighted_sup(s).unwrap();
        let maj = f.norm_majorant(s).unwrap();
        prop_assert!(sup <= maj * (1.0 + 1e-12));
        prop_assert!(maj <= 2.0 * f.len() as f64 * sup * (1.0 + 1e-12));
    }

    #[test]
    fn real_evaluation_matches_conjugate_sum(f in poly_strategy(), x1 in -PI..PI, x2 in -PI..PI) {
        let direct: f64 = f
            .modes()
            .map(|(k, c)| 2.0 * (c * Complex64::new(0.0, k.dot(&[x1, x2])).exp()).re)
            .sum();
        prop_assert!((f.evaluate_real(&[x1, x2]) - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(f in poly_strategy(), x1 in -PI..PI, x2 in -PI..PI) {
        let g = f.gradient_real(&[x1, x2]);
        let h = 1e-5;
        for (i, gi) in g.iter().enumerate() {
            let mut xp = [x1, x2];
            let mut xm = [x1, x2];
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.evaluate_real(&xp) - f.evaluate_real(&xm)) / (2.0 * h);
            prop_assert!((gi - fd).abs() < 1e-7 * (1.0 + f.norm_majorant(0.0).unwrap()));
        }
    }

    #[test]
    fn strip_sup_interval_encloses_samples(f in poly_strategy(), s in 0.05f64..1.0, y in -1.0f64..1.0, x in -PI..PI) {
        let interval = f.strip_sup_interval(s).unwrap();
        let z = [Complex64::new(x, y * s), Complex64::new(0.3 * x, -y * s)];
        prop_assert!(f.evaluate(&z).norm() <= interval.upper * (1.0 + 1e-12));
        prop_assert!(interval.lower <= interval.upper * (1.0 + 1e-12));
    }

    #[test]
    fn one_d_shift_moves_the_graph(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -0.5f64..0.5, t in -PI..PI, shift in -PI..PI) {
        let g = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, a, b), OneDTrigPoly::cos_sin(3, c, 0.0)]);
        prop_assert!((g.shifted(shift).eval(t) - g.eval(t - shift)).abs() < 1e-12);
        let explicit = a * t.cos() + b * t.sin() + c * (3.0 * t).cos();
        prop_assert!((g.eval(t) - explicit).abs() < 1e-12);
    }
}
