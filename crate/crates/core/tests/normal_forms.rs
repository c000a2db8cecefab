use std::f64::consts::PI;

use proptest::prelude::*;
use resoforge::averaging::{lie_step_nonres, lie_step_res, verify_conjugacy, AveragingOptions, NaturalHam};
use resoforge::cover::free_params;
use resoforge::fourier::ModeVector;
use resoforge::presets::{two_mode_potential, TwoModeBenchmark};
use resoforge::standard_form::{fd_jacobian, symplectic_residual, FixedPointOptions, GDagger, Stage, StandardForm};

fn conjugacy_residual(epsilon: f64, order: usize) -> f64 {
    let f = two_mode_potential().unwrap();
    let params = free_params(2, 1.0, 0.05, 3, 12).unwrap();
    let ham = NaturalHam::new(epsilon, f).unwrap();
    let opts = AveragingOptions {
        order,
        degree: 3,
        extra_orders: 2,
    };
    let y0 = [0.7, 0.31];
    let nf = lie_step_nonres(&ham, &params, &y0, opts).unwrap();
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..8)
        .map(|i| (y0.to_vec(), vec![0.7 * i as f64, 2.0 * PI - 0.45 * i as f64]))
        .collect();
    verify_conjugacy(&ham, &nf, &points, false).unwrap().max_residual
}

#[test]
fn conjugacy_residual_drops_with_epsilon() {
    for order in 1..=2 {
        let coarse = conjugacy_residual(2e-3, order);
        let fine = conjugacy_residual(1e-3, order);
        let ratio = coarse / fine;
        // residual is O(eps^(order + 1)) at the base point
        let expected = 2f64.powi(order as i32 + 1);
        assert!(
            ratio > 0.7 * expected,
            "order {order}: ratio {ratio}, expected about {expected}"
        );
    }
}

#[test]
fn resonant_normal_form_keeps_only_the_lattice_in_band() {
    let f = two_mode_potential().unwrap();
    let params = free_params(2, 1.0, 0.01, 2, 12).unwrap();
    let ham = NaturalHam::new(1e-6, f).unwrap();
    let k = ModeVector(vec![1, 0]);
    let nf = lie_step_res(&ham, &k, &params, &[0.0, 0.6], AveragingOptions::default()).unwrap();
    for p in 1..=nf.order {
        for m in nf.order_series(p).modes() {
            let on_lattice = ModeVector(m.clone()).multiple_of(&k).is_some();
            assert!(on_lattice || !nf.in_band(&m), "order {p} keeps band mode {m:?}");
        }
    }
}

fn benchmark() -> StandardForm {
    let bench = TwoModeBenchmark::default();
    let f = two_mode_potential().unwrap();
    let params = free_params(2, bench.s, bench.alpha, bench.k0, bench.k_cut).unwrap();
    let ham = NaturalHam::new(bench.epsilon, f.clone()).unwrap();
    let opts = AveragingOptions {
        order: bench.order,
        degree: bench.degree,
        extra_orders: 2,
    };
    let nf = lie_step_res(&ham, &ModeVector(bench.k.clone()), &params, &bench.base_point, opts).unwrap();
    StandardForm::build(&nf, &f, bench.beta, bench.delta, &params, FixedPointOptions::default()).unwrap()
}

#[test]
fn benchmark_pipeline_identities_hold() {
    let sf = benchmark();
    for (p, q) in sf.sample_points(12, 3) {
        let fp = sf.solve(&p[1..]).unwrap();
        assert!(fp.residual <= 1e-13);
        let pt = sf.energy_identity(&fp, &p, &q).unwrap();
        assert!((pt.lhs - pt.rhs).abs() <= 1e-10 * pt.rhs.abs());
        assert!(sf.decoupling_defect(&p, q[0]).unwrap() <= 1e-12);
    }
}

#[test]
fn finite_difference_jacobians_are_symplectic() {
    let sf = benchmark();
    for (p, q) in sf.sample_points(3, 9) {
        let z: Vec<f64> = p.iter().chain(&q).copied().collect();
        for stage in [Stage::Phi3, Stage::Phi2, Stage::Phi1, Stage::Diamond] {
            let j = fd_jacobian(|w: &[f64]| sf.stage_maps(&[stage], w), &z, 1e-3).unwrap();
            let residual = symplectic_residual(&j);
            assert!(residual < 1e-9, "{stage:?}: {residual}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shear_group_law(
        w1 in prop::collection::vec(-1.0f64..1.0, 2),
        w2 in prop::collection::vec(-1.0f64..1.0, 2),
        z in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let quad = |w: Vec<f64>| {
            GDagger::new(move |ph: &[f64]| {
                let a = w[0] * ph[0] * ph[0] + w[1] * ph[0] * ph[1];
                (a, vec![2.0 * w[0] * ph[0] + w[1] * ph[1], w[1] * ph[0]])
            })
        };
        let (a, b) = (quad(w1.clone()), quad(w2.clone()));
        let sum = quad(vec![w1[0] + w2[0], w1[1] + w2[1]]);
        let (p, q) = (&z[..3], &z[3..]);
        let (p1, q1) = b.apply(p, q);
        let (p2, q2) = a.apply(&p1, &q1);
        let (p3, q3) = sum.apply(p, q);
        for i in 0..3 {
            prop_assert!((p2[i] - p3[i]).abs() < 1e-12 && (q2[i] - q3[i]).abs() < 1e-12);
        }
        let inv = a.inverse();
        let (p4, q4) = inv.apply(&a.apply(p, q).0, &a.apply(p, q).1);
        for i in 0..3 {
            prop_assert!((p4[i] - p[i]).abs() < 1e-12 && (q4[i] - q[i]).abs() < 1e-12);
        }
    }
}
