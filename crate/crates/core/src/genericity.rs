//! Membership machinery for generic potentials.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{
    generators, generators_in_shell, starred_modes, CoefficientRule, ModeVector, OneDTrigPoly, TrigPoly,
};
use crate::morse::{critical_points, DEFAULT_TOL};

/// c_d = 2^44 (2n/e)^n.
pub fn c_d(n: usize) -> f64 {
    2f64.powi(44) * (2.0 * n as f64 / E).powi(n as i32)
}

/// c_s = max{1, 1/s}.
pub fn c_s(s: f64) -> f64 {
    1f64.max(1.0 / s)
}

/// Threshold N(δ) separating low modes from cosine-like high modes.
pub fn threshold_n(n: usize, s: f64, delta: f64) -> f64 {
    let log_branch = (c_d(n) / (s.powi(n as i32) * delta)).ln() / s;
    2.0 * log_branch.max(1.0)
}

/// δ|k|_1^{-n} e^{-|k|_1 s}.
pub fn lower_bound_threshold(n: usize, l1: i64, s: f64, delta: f64) -> f64 {
    delta * (l1 as f64).powi(-(n as i32)) * (-(l1 as f64) * s).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityParams {
    pub n: usize,
    pub s: f64,
    pub delta: f64,
    pub beta: f64,
    pub threshold: f64,
    pub k_max: u32,
}

impl GenericityParams {
    pub fn new(n: usize, s: f64, delta: f64, beta: f64, k_max: u32) -> Result<Self> {
        if n == 0 || !(s > 0.0) || !(delta > 0.0 && delta <= 1.0) || !(beta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "genericity parameters out of range: n={n}, s={s}, delta={delta}, beta={beta}"
            )));
        }
        Ok(GenericityParams {
            n,
            s,
            delta,
            beta,
            threshold: threshold_n(n, s, delta),
            k_max,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    LowerBound,
    Morse,
    DistinctValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub k: ModeVector,
    pub reason: FailureReason,
    pub value: f64,
    pub required: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub in_class: bool,
    pub failures: Vec<Failure>,
    pub checked_range: (f64, f64),
    pub delta: f64,
    pub beta: f64,
    pub modes_checked: usize,
    /// Smallest |f_k|e^{|k|s} − δ|k|^{-n} over the lower-bound window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_margin: Option<f64>,
    /// Smallest β_k − β over the low-mode projections.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morse_margin: Option<f64>,
    /// Set when a coefficient rule proves the lower bound for every |k|_1 ≥ N.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic_proof: Option<bool>,
}

impl MembershipReport {
    fn finish(mut self) -> Self {
        self.in_class = self.failures.is_empty();
        self
    }

    pub fn merge(&self, other: &MembershipReport) -> MembershipReport {
        let mut failures = self.failures.clone();
        failures.extend(other.failures.iter().cloned());
        MembershipReport {
            in_class: false,
            failures,
            checked_range: (
                self.checked_range.0.min(other.checked_range.0),
                self.checked_range.1.max(other.checked_range.1),
            ),
            delta: self.delta,
            beta: self.beta,
            modes_checked: self.modes_checked + other.modes_checked,
            lower_margin: self.lower_margin.or(other.lower_margin),
            morse_margin: self.morse_margin.or(other.morse_margin),
            symbolic_proof: self.symbolic_proof.or(other.symbolic_proof),
        }
        .finish()
    }
}

fn rule_proves_lower_bound(f: &TrigPoly, params: &GenericityParams) -> Option<bool> {
    let info = f.rule()?;
    match info.rule {
        CoefficientRule::ExpLacunary { s, amplitude } => {
            let first = params.threshold.ceil().max(1.0);
            Some(s == params.s && amplitude * first.powi(params.n as i32) >= params.delta)
        }
    }
}

/// Lower bound |f_k| ≥ δ|k|^{-n}e^{-|k|s} on generators with N ≤ |k|_1 ≤ K_max.
pub fn check_lower_bound(f: &TrigPoly, params: &GenericityParams) -> Result<MembershipReport> {
    if (params.k_max as f64) < params.threshold {
        return Err(Error::CutoffBelowThreshold {
            k_max: params.k_max as f64,
            threshold: params.threshold,
        });
    }
    let window = generators_in_shell(params.n, params.threshold, params.k_max as f64);
    let results: Vec<(Option<Failure>, f64)> = window
        .par_iter()
        .map(|k| {
            let l1 = k.l1();
            let required = lower_bound_threshold(params.n, l1, params.s, params.delta);
            let value = f.coeff(k).norm();
            let margin = value * (l1 as f64 * params.s).exp() - params.delta * (l1 as f64).powi(-(params.n as i32));
            let failure = (value < required).then(|| Failure {
                k: k.clone(),
                reason: FailureReason::LowerBound,
                value,
                required,
            });
            (failure, margin)
        })
        .collect();
    let lower_margin = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(MembershipReport {
        in_class: false,
        failures: results.into_iter().filter_map(|r| r.0).collect(),
        checked_range: (params.threshold, params.k_max as f64),
        delta: params.delta,
        beta: params.beta,
        modes_checked: window.len(),
        lower_margin: lower_margin.is_finite().then_some(lower_margin),
        morse_margin: None,
        symbolic_proof: rule_proves_lower_bound(f, params),
    }
    .finish())
}

/// β-Morse with distinct critical values for every projection with |k|_1 ≤ N.
pub fn check_low_mode_morse(f: &TrigPoly, params: &GenericityParams) -> Result<MembershipReport> {
    let low = generators(params.n, params.threshold);
    let results: Vec<(Vec<Failure>, f64)> = low
        .par_iter()
        .map(|k| {
            let projection = f.project_lattice(k).expect("enumerated generator");
            morse_failures(k, &projection, params.beta)
        })
        .collect();
    let morse_margin = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(MembershipReport {
        in_class: false,
        failures: results.into_iter().flat_map(|r| r.0).collect(),
        checked_range: (1.0, params.threshold),
        delta: params.delta,
        beta: params.beta,
        modes_checked: low.len(),
        lower_margin: None,
        morse_margin: morse_margin.is_finite().then_some(morse_margin),
        symbolic_proof: None,
    }
    .finish())
}

fn morse_failures(k: &ModeVector, projection: &OneDTrigPoly, beta: f64) -> (Vec<Failure>, f64) {
    match critical_points(projection, DEFAULT_TOL) {
        Err(_) => (
            vec![Failure {
                k: k.clone(),
                reason: FailureReason::Morse,
                value: 0.0,
                required: beta,
            }],
            -beta,
        ),
        Ok(report) => {
            let mut failures = Vec::new();
            if report.beta < beta || report.beta == 0.0 {
                failures.push(Failure {
                    k: k.clone(),
                    reason: FailureReason::Morse,
                    value: report.beta,
                    required: beta,
                });
            }
            if !report.distinct_values {
                failures.push(Failure {
                    k: k.clone(),
                    reason: FailureReason::DistinctValues,
                    value: report.min_value_gap,
                    required: 0.0,
                });
            }
            (failures, report.beta - beta)
        }
    }
}

/// Both membership checks over the finite window.
pub fn check_membership(f: &TrigPoly, params: &GenericityParams) -> Result<MembershipReport> {
    let lower = check_lower_bound(f, params)?;
    let morse = check_low_mode_morse(f, params)?;
    Ok(lower.merge(&morse))
}

/// Weighted-sup radius of perturbations that keep a passing report passing.
pub fn perturbation_radius(report: &MembershipReport, s: f64) -> f64 {
    let weight: f64 = 2.0 * (1..200).map(|j| (j * j) as f64 * (-(j as f64) * s).exp()).sum::<f64>();
    let lower = report.lower_margin.unwrap_or(f64::INFINITY);
    let morse = report.morse_margin.map(|m| m / (2.0 * weight)).unwrap_or(f64::INFINITY);
    let r = 0.5 * lower.min(morse);
    if r.is_finite() {
        r.max(0.0)
    } else {
        0.0
    }
}

/// Stream `trial` of the seeded generator.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform point of the closed unit disk by rejection from the square.
pub fn unit_disk<R: Rng>(rng: &mut R) -> Complex64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let v: f64 = rng.gen_range(-1.0..=1.0);
        if u * u + v * v <= 1.0 {
            return Complex64::new(u, v);
        }
    }
}

fn sample_modes<R: Rng>(n: usize, s: f64, modes: &[ModeVector], rng: &mut R) -> TrigPoly {
    let mut f = TrigPoly::zero(n);
    for k in modes {
        let w = unit_disk(rng);
        f.insert(k.clone(), w * (-(k.l1() as f64) * s).exp())
            .expect("starred mode");
    }
    f
}

/// f_k = w_k e^{-|k|_1 s}, w_k uniform on the unit disk, for every k ∈ Z^n_* with |k|_1 ≤ K_max.
pub fn sample_product_measure(n: usize, s: f64, k_max: u32, seed: u64) -> TrigPoly {
    let modes = starred_modes(n, k_max);
    sample_modes(n, s, &modes, &mut trial_rng(seed, 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityEstimate {
    pub trials: u64,
    pub passes: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub window: (f64, f64),
    /// (1 − fraction)/δ², the empirical constant in the 1 − cδ² trend.
    pub fitted_c: f64,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of sampled potentials passing the lower-bound check.
pub fn empirical_genericity(
    n: usize,
    s: f64,
    delta: f64,
    k_max: u32,
    trials: u64,
    seed: u64,
) -> Result<GenericityEstimate> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let params = GenericityParams::new(n, s, delta, 0.0, k_max)?;
    if (k_max as f64) < params.threshold {
        return Err(Error::CutoffBelowThreshold {
            k_max: k_max as f64,
            threshold: params.threshold,
        });
    }
    let modes = starred_modes(n, k_max);
    let passes: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = sample_modes(n, s, &modes, &mut trial_rng(seed, t));
            let report = check_lower_bound(&f, &params).expect("cutoff checked above");
            report.in_class as u64
        })
        .sum();
    let fraction = passes as f64 / trials as f64;
    let (ci_low, ci_high) = wilson_interval(passes, trials);
    Ok(GenericityEstimate {
        trials,
        passes,
        fraction,
        ci_low,
        ci_high,
        window: (params.threshold, k_max as f64),
        fitted_c: (1.0 - fraction) / (delta * delta),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyLocus {
    /// Shifts producing a degenerate critical point.
    pub gamma1: Vec<Complex64>,
    /// Shifts producing two critical points with equal values.
    pub gamma2: Vec<Complex64>,
}

impl DegeneracyLocus {
    pub fn distance(&self, z: Complex64) -> f64 {
        self.gamma1
            .iter()
            .chain(&self.gamma2)
            .map(|p| (p - z).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

fn pair_condition(g: &OneDTrigPoly, t1: f64, t2: f64) -> f64 {
    let d = t1 - t2;
    (1.0 - d.cos()) * (g.eval_deriv(t1, 1) + g.eval_deriv(t2, 1)) - d.sin() * (g.eval(t1) - g.eval(t2))
}

fn pair_shift(g: &OneDTrigPoly, t1: f64, t2: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let num = Complex64::new(g.eval_deriv(t1, 1) - g.eval_deriv(t2, 1), g.eval(t1) - g.eval(t2));
    let den = 2.0 * (Complex64::from_polar(1.0, t1) - Complex64::from_polar(1.0, t2));
    i * num / den
}

/// Set of first-mode coefficients z for which z e^{iθ} + c.c. + G fails to be Morse
/// with distinct critical values.
pub fn degeneracy_locus(g: &OneDTrigPoly, resolution: usize) -> Result<DegeneracyLocus> {
    if g.coeff(1).norm() != 0.0 {
        return Err(Error::InvalidInput(
            "the fixed part must have modes |j| >= 2 only".into(),
        ));
    }
    if g.is_zero() {
        return Ok(DegeneracyLocus {
            gamma1: vec![Complex64::new(0.0, 0.0)],
            gamma2: Vec::new(),
        });
    }
    let m = resolution.max(8);
    let h = 2.0 * PI / m as f64;
    let i = Complex64::new(0.0, 1.0);
    let gamma1: Vec<Complex64> = (0..m)
        .map(|a| {
            let t = a as f64 * h;
            0.5 * Complex64::from_polar(1.0, -t) * (i * g.eval_deriv(t, 1) + g.eval_deriv(t, 2))
        })
        .collect();

    let grid: Vec<f64> = (0..m * m)
        .map(|idx| pair_condition(g, (idx / m) as f64 * h, (idx % m) as f64 * h))
        .collect();
    let near_diagonal = |a: usize, b: usize| {
        let d = (a as i64 - b as i64).rem_euclid(m as i64) as usize;
        d.min(m - d) <= 3
    };
    let bisect = |p: (f64, f64), q: (f64, f64), fp: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let v = pair_condition(g, p.0 + mid * (q.0 - p.0), p.1 + mid * (q.1 - p.1));
            if (v > 0.0) == (fp > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    let gamma2: Vec<Complex64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut out = Vec::new();
            for b in 0..m {
                let here = grid[a * m + b];
                for (da, db) in [(1usize, 0usize), (0, 1)] {
                    let (a2, b2) = ((a + da) % m, (b + db) % m);
                    if near_diagonal(a, b) || near_diagonal(a2, b2) {
                        continue;
                    }
                    let there = grid[a2 * m + b2];
                    if here == 0.0 || (here > 0.0) != (there > 0.0) {
                        let p = (a as f64 * h, b as f64 * h);
                        let q = (p.0 + da as f64 * h, p.1 + db as f64 * h);
                        let (t1, t2) = if here == 0.0 { p } else { bisect(p, q, here) };
                        out.push(pair_shift(g, t1, t2));
                    }
                }
            }
            out
        })
        .collect();
    Ok(DegeneracyLocus { gamma1, gamma2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn threshold_examples() {
        let expected = 2.0 * (44.0 * 2f64.ln() + 2.0 * (4.0 / E).ln());
        assert_relative_eq!(threshold_n(2, 1.0, 1.0), expected, epsilon = 1e-12);
        assert!((threshold_n(2, 1.0, 1.0) - 62.54).abs() < 0.01);
        let d = threshold_n(3, 0.7, 0.25) - threshold_n(3, 0.7, 0.5);
        assert_relative_eq!(d, 2.0 * 2f64.ln() / 0.7, epsilon = 1e-12);
        assert_eq!(threshold_n(2, 40.0, 1.0), 2.0);
    }

    #[test]
    fn lower_bound_boundary_and_zero() {
        let params = GenericityParams::new(2, 2.0, 0.5, 0.0, 40).unwrap();
        let window = generators_in_shell(2, params.threshold, 40.0);
        let mut f = TrigPoly::zero(2);
        for k in &window {
            f.insert(
                k.clone(),
                Complex64::new(lower_bound_threshold(2, k.l1(), 2.0, 0.5), 0.0),
            )
            .unwrap();
        }
        assert!(check_lower_bound(&f, &params).unwrap().in_class);
        let missing = window[window.len() / 2].clone();
        f.insert(missing.clone(), Complex64::new(0.0, 0.0)).unwrap();
        let report = check_lower_bound(&f, &params).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].k, missing);
        let short = GenericityParams::new(2, 2.0, 0.5, 0.0, 10).unwrap();
        assert!(matches!(
            check_lower_bound(&f, &short),
            Err(Error::CutoffBelowThreshold { .. })
        ));
    }

    #[test]
    fn lacunary_has_proof_flag() {
        let params = GenericityParams::new(2, 1.0, 1.0, 0.0, 70).unwrap();
        let f = TrigPoly::from_rule(2, CoefficientRule::ExpLacunary { s: 1.0, amplitude: 1.0 }, 70);
        let report = check_lower_bound(&f, &params).unwrap();
        assert!(report.in_class);
        assert_eq!(report.symbolic_proof, Some(true));
    }

    #[test]
    fn equal_values_fail_low_mode_check() {
        let params = GenericityParams::new(2, 40.0, 1.0, 0.0, 3).unwrap();
        let k = ModeVector(vec![1, 0]);
        let f = TrigPoly::from_modes(
            2,
            [
                (k.clone(), Complex64::new(0.5, 0.0)),
                (k.scale(2), Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap();
        let report = check_low_mode_morse(&f, &params).unwrap();
        assert!(report
            .failures
            .iter()
            .any(|x| x.k == k && x.reason == FailureReason::DistinctValues));
        // projections vanishing on other low generators are recorded as Morse failures
        assert!(report.failures.iter().any(|x| x.reason == FailureReason::Morse));
    }

    #[test]
    fn sampling_is_deterministic_and_in_disk() {
        let a = sample_product_measure(2, 1.0, 6, 7);
        let b = sample_product_measure(2, 1.0, 6, 7);
        assert_eq!(a, b);
        for (k, c) in a.modes() {
            assert!(c.norm() * (k.l1() as f64).exp() <= 1.0 + 1e-12);
        }
        assert_ne!(a, sample_product_measure(2, 1.0, 6, 8));
    }

    #[test]
    fn disk_second_moment() {
        let mut rng = trial_rng(11, 3);
        let m: f64 = (0..100_000).map(|_| unit_disk(&mut rng).norm_sqr()).sum::<f64>() / 1e5;
        assert!((m - 0.5).abs() < 0.01, "{m}");
    }

    #[test]
    fn locus_examples() {
        let zero = degeneracy_locus(&OneDTrigPoly::zero(), 64).unwrap();
        assert_eq!(zero.gamma1, vec![Complex64::new(0.0, 0.0)]);
        let g = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(2, 1.0, 0.0)]);
        let locus = degeneracy_locus(&g, 128).unwrap();
        assert_relative_eq!(locus.gamma1[0].re, -2.0, epsilon = 1e-14);
        assert!(locus.gamma1[0].im.abs() < 1e-14);
        assert!(degeneracy_locus(&OneDTrigPoly::from_pairs([(1, Complex64::new(1.0, 0.0))]), 16).is_err());
    }

    #[test]
    fn locus_points_have_equal_values() {
        let g = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(2, 0.6, 0.2), OneDTrigPoly::cos_sin(3, 0.1, -0.3)]);
        let locus = degeneracy_locus(&g, 128).unwrap();
        assert!(!locus.gamma2.is_empty());
        for z in locus.gamma2.iter().step_by(17).take(20) {
            let mut f = g.clone();
            f.set(1, *z);
            let report = critical_points(&f, DEFAULT_TOL).unwrap();
            let scale = f.derivative_bound(0);
            assert!(report.min_value_gap < 1e-6 * scale || report.min_grad_plus_hess < 1e-6 * scale);
        }
    }
}
