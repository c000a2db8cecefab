//! Morse analysis of one-dimensional projections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{golden_max, ModeVector, OneDTrigPoly, TrigPoly};

pub const GRID_POINTS: usize = 1 << 14;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const MERGE_RADIUS: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 50;
const REFINE_CANDIDATES: usize = 8;
/// Relative size below which two critical values count as equal.
const DISTINCT_REL: f64 = 1e-9;
/// γ threshold for the high-mode cosine-likeness hypothesis.
pub const HIGH_MODE_GAMMA: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    pub critical_points: Vec<f64>,
    pub critical_values: Vec<f64>,
    pub beta: f64,
    pub min_value_gap: f64,
    pub min_grad_plus_hess: f64,
    pub distinct_values: bool,
    pub max_abs_second_derivative: f64,
    /// π√(2 max|F''|/β); absent when β = 0.
    pub count_bound: Option<f64>,
}

impl MorseReport {
    pub fn count(&self) -> usize {
        self.critical_points.len()
    }

    /// Strict max/min alternation of the critical values around the circle.
    pub fn alternates(&self) -> bool {
        let v = &self.critical_values;
        let m = v.len();
        if m < 2 || m % 2 == 1 {
            return false;
        }
        (0..m).all(|i| {
            let prev = v[(i + m - 1) % m];
            let next = v[(i + 1) % m];
            (v[i] > prev && v[i] > next) || (v[i] < prev && v[i] < next)
        })
    }

    pub fn within_count_bound(&self) -> bool {
        match self.count_bound {
            Some(b) => self.count() as f64 <= b,
            None => true,
        }
    }

    pub fn is_morse(&self, beta: f64) -> bool {
        self.beta >= beta && self.distinct_values && self.beta > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineCertificate {
    pub eta: f64,
    pub theta0: f64,
    pub residual_majorant: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighModeMorse {
    pub mode: ModeVector,
    pub certified: f64,
    pub computed: f64,
    pub gamma: f64,
}

struct Table {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Table {
    fn new(m: usize) -> Self {
        let (sin, cos) = (0..m).map(|i| (2.0 * PI * i as f64 / m as f64).sin_cos()).unzip();
        Table { cos, sin }
    }

    fn len(&self) -> usize {
        self.cos.len()
    }

    fn theta(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.len() as f64
    }

    /// Samples of F^{(order)} on the grid.
    fn derivative(&self, f: &OneDTrigPoly, order: u32) -> Vec<f64> {
        let m = self.len();
        let mut out = vec![0.0; m];
        let i = Complex64::new(0.0, 1.0);
        for (&j, &c) in f.modes() {
            let w = 2.0 * c * (i * j as f64).powu(order);
            let step = j as usize % m;
            let mut idx = 0usize;
            for v in out.iter_mut() {
                *v += w.re * self.cos[idx] - w.im * self.sin[idx];
                idx += step;
                if idx >= m {
                    idx -= m;
                }
            }
        }
        out
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Indices of grid local minima of `v`, best first.
fn local_extrema(v: &[f64], maxima: bool, limit: usize) -> Vec<usize> {
    let m = v.len();
    let mut idx: Vec<usize> = (0..m)
        .filter(|&i| {
            let (a, b, c) = (v[(i + m - 1) % m], v[i], v[(i + 1) % m]);
            if maxima {
                b >= a && b >= c
            } else {
                b <= a && b <= c
            }
        })
        .collect();
    idx.sort_by(|&a, &b| {
        let o = v[a].partial_cmp(&v[b]).unwrap();
        if maxima {
            o.reverse()
        } else {
            o
        }
    });
    idx.truncate(limit);
    idx
}

/// Sup over T of |F^{(order)}|, grid plus local refinement.
pub fn sup_derivative(f: &OneDTrigPoly, order: u32) -> f64 {
    let table = Table::new(GRID_POINTS);
    sup_on_table(&table, f, order)
}

fn sup_on_table(table: &Table, f: &OneDTrigPoly, order: u32) -> f64 {
    let vals: Vec<f64> = table.derivative(f, order).into_iter().map(f64::abs).collect();
    let h = 2.0 * PI / table.len() as f64;
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for i in local_extrema(&vals, true, REFINE_CANDIDATES) {
        let t = table.theta(i);
        let (_, v) = golden_max(|x| f.eval_deriv(x, order).abs(), t - h, t + h, 60);
        best = best.max(v);
    }
    best
}

fn find_root(f: &OneDTrigPoly, mut a: f64, mut b: f64, fa: f64, tol_abs: f64) -> f64 {
    // invariant: sign(F'(a)) = sign(fa), F' changes sign on [a, b]
    let mut x = 0.5 * (a + b);
    for _ in 0..NEWTON_MAX_ITER {
        let fx = f.eval_deriv(x, 1);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
        } else {
            b = x;
        }
        let d2 = f.eval_deriv(x, 2);
        let newton = if d2 != 0.0 { x - fx / d2 } else { f64::NAN };
        let next = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let step = (next - x).abs();
        x = next;
        if fx.abs() < tol_abs && step < 1e-13 {
            break;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    x
}

/// Critical points, critical values and the Morse constant of F.
pub fn critical_points(f: &OneDTrigPoly, tol: f64) -> Result<MorseReport> {
    if f.is_zero() {
        return Err(Error::ConstantFunction);
    }
    let table = Table::new(GRID_POINTS);
    let m = table.len();
    let h = 2.0 * PI / m as f64;
    let scale = f.derivative_bound(1);
    let tol_abs = tol * scale;
    let d1 = table.derivative(f, 1);
    let d2 = table.derivative(f, 2);

    let mut roots = Vec::new();
    for i in 0..m {
        let j = (i + 1) % m;
        if d1[i] == 0.0 {
            roots.push(table.theta(i));
        } else if d1[j] != 0.0 && (d1[i] > 0.0) != (d1[j] > 0.0) {
            let a = table.theta(i);
            roots.push(wrap(find_root(f, a, a + h, d1[i], tol_abs)));
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last() {
            Some(&last) if r - last < MERGE_RADIUS => {}
            _ => merged.push(r),
        }
    }
    if merged.len() > 1 && merged[0] + 2.0 * PI - merged[merged.len() - 1] < MERGE_RADIUS {
        merged.pop();
    }
    let values: Vec<f64> = merged.iter().map(|&t| f.eval(t)).collect();

    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            gap = gap.min((values[i] - values[j]).abs());
        }
    }
    if values.len() < 2 {
        gap = 0.0;
    }

    let gh: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a.abs() + b.abs()).collect();
    let mut min_gh = gh.iter().copied().fold(f64::INFINITY, f64::min);
    let combined = |x: f64| -(f.eval_deriv(x, 1).abs() + f.eval_deriv(x, 2).abs());
    for i in local_extrema(&gh, false, REFINE_CANDIDATES) {
        let t = table.theta(i);
        let (_, v) = golden_max(combined, t - h, t + h, 60);
        min_gh = min_gh.min(-v);
    }
    for &t in &merged {
        min_gh = min_gh.min(f.eval_deriv(t, 2).abs() + f.eval_deriv(t, 1).abs());
    }

    let max2 = sup_on_table(&table, f, 2);
    let value_scale = f.derivative_bound(0);
    let distinct = values.len() >= 2 && gap > DISTINCT_REL * value_scale;
    let beta = min_gh.min(gap).max(0.0);
    let count_bound = if beta > 0.0 {
        Some(PI * (2.0 * max2 / beta).sqrt())
    } else {
        None
    };
    Ok(MorseReport {
        critical_points: merged,
        critical_values: values,
        beta,
        min_value_gap: gap,
        min_grad_plus_hess: min_gh,
        distinct_values: distinct,
        max_abs_second_derivative: max2,
        count_bound,
    })
}

/// F − cos(θ + θ0) as a trigonometric polynomial.
pub fn cosine_defect(f: &OneDTrigPoly, theta0: f64) -> OneDTrigPoly {
    let mut d = f.clone();
    d.set(1, f.coeff(1) - 0.5 * Complex64::from_polar(1.0, theta0));
    d
}

/// max_{j=0,1,2} sup |∂^j (F − cos(θ + θ0))|.
pub fn c2_distance_to_cosine(f: &OneDTrigPoly, theta0: f64) -> f64 {
    let d = cosine_defect(f, theta0);
    if d.is_zero() {
        return 0.0;
    }
    let table = Table::new(GRID_POINTS);
    (0..=2).map(|j| sup_on_table(&table, &d, j)).fold(0.0, f64::max)
}

/// Shift θ̄ read off the phase of the first coefficient.
pub fn cosine_phase(f: &OneDTrigPoly) -> f64 {
    wrap(f.coeff(1).arg())
}

/// Checks that a C²-small perturbation of a cosine has exactly two critical points
/// and Morse constant at least 1 − 2c.
pub fn two_point_morse_check(f: &OneDTrigPoly, c: f64) -> Result<MorseReport> {
    let theta0 = cosine_phase(f);
    let distance = c2_distance_to_cosine(f, theta0);
    if !(c < 0.5) || distance > c {
        return Err(Error::NotCosineClose { distance, bound: c });
    }
    let report = critical_points(f, DEFAULT_TOL)?;
    if report.count() != 2 || report.beta < 1.0 - 2.0 * c {
        return Err(Error::HypothesisViolated(format!(
            "two-point conclusion failed: {} critical points, beta {} vs {}",
            report.count(),
            report.beta,
            1.0 - 2.0 * c
        )));
    }
    Ok(report)
}

/// Certificate that π_k f is close to η·cos(θ + θ0).
pub fn cosine_certificate(f: &TrigPoly, k: &ModeVector) -> Result<CosineCertificate> {
    let projection = f.project_lattice(k)?;
    cosine_certificate_1d(&projection).map_err(|e| match e {
        Error::VanishingLeadingMode(_) => Error::VanishingLeadingMode(k.0.clone()),
        other => other,
    })
}

pub fn cosine_certificate_1d(projection: &OneDTrigPoly) -> Result<CosineCertificate> {
    let lead = projection.coeff(1);
    if lead.norm() == 0.0 {
        return Err(Error::VanishingLeadingMode(vec![]));
    }
    let eta = 2.0 * lead.norm();
    let residual: f64 = projection
        .modes()
        .filter(|(&j, _)| j >= 2)
        .map(|(&j, c)| 2.0 * c.norm() * (j as f64).exp())
        .fold(0.0, |a, b| a + b);
    Ok(CosineCertificate {
        eta,
        theta0: wrap(lead.arg()),
        residual_majorant: residual,
        gamma: residual / eta,
    })
}

/// Certified (|f_k|) and computed Morse constants of a high-mode projection.
pub fn morse_constant_high_mode(f: &TrigPoly, k: &ModeVector) -> Result<HighModeMorse> {
    let cert = cosine_certificate(f, k)?;
    if cert.gamma > HIGH_MODE_GAMMA {
        return Err(Error::HypothesisFails {
            mode: k.0.clone(),
            reason: format!("cosine-likeness gamma {} exceeds 2^-40", cert.gamma),
        });
    }
    let certified = cert.eta / 2.0;
    let report = critical_points(&f.project_lattice(k)?, DEFAULT_TOL)?;
    if report.beta < certified {
        return Err(Error::HypothesisFails {
            mode: k.0.clone(),
            reason: format!("computed beta {} below certified {}", report.beta, certified),
        });
    }
    Ok(HighModeMorse {
        mode: k.clone(),
        certified,
        computed: report.beta,
        gamma: cert.gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_cos() {
        let f = OneDTrigPoly::from_pairs([(1, c(1.0, 0.0))]);
        let r = critical_points(&f, DEFAULT_TOL).unwrap();
        assert_eq!(r.count(), 2);
        assert!(r.critical_points[0].abs() < 1e-12);
        assert_relative_eq!(r.critical_points[1], PI, epsilon = 1e-12);
        assert_relative_eq!(r.critical_values[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.critical_values[1], -2.0, epsilon = 1e-12);
        assert_relative_eq!(r.beta, 2.0, epsilon = 1e-9);
        assert!(r.alternates() && r.within_count_bound());
    }

    #[test]
    fn sine() {
        let f = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, 0.0, 1.0)]);
        let r = critical_points(&f, DEFAULT_TOL).unwrap();
        assert_eq!(r.count(), 2);
        assert_relative_eq!(r.critical_points[0], PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.critical_points[1], 1.5 * PI, epsilon = 1e-12);
        assert_relative_eq!(r.min_value_gap, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.beta, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn small_second_harmonic_keeps_two_points() {
        let f = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, 1.0, 0.0), OneDTrigPoly::cos_sin(2, 0.1, 0.0)]);
        let r = critical_points(&f, DEFAULT_TOL).unwrap();
        assert_eq!(r.count(), 2);
    }

    #[test]
    fn zero_is_constant() {
        assert!(matches!(
            critical_points(&OneDTrigPoly::zero(), 1e-12),
            Err(Error::ConstantFunction)
        ));
    }

    #[test]
    fn equal_critical_values_detected() {
        let f = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, 1.0, 0.0), OneDTrigPoly::cos_sin(2, 1.0, 0.0)]);
        let r = critical_points(&f, DEFAULT_TOL).unwrap();
        assert_eq!(r.count(), 4);
        assert!(!r.distinct_values);
        assert!(r.alternates());
    }

    #[test]
    fn c2_distance_examples() {
        let cosine = |a: f64| OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, a, 0.0)]);
        assert_eq!(c2_distance_to_cosine(&cosine(1.0), 0.0), 0.0);
        assert_relative_eq!(c2_distance_to_cosine(&cosine(1.3), 0.0), 0.3, epsilon = 1e-12);
        let shifted = cosine(1.0).shifted(-0.7);
        assert!(c2_distance_to_cosine(&shifted, 0.7) < 1e-15);
        let b = 0.05;
        let f = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, 1.0, 0.0), OneDTrigPoly::cos_sin(2, b, 0.0)]);
        assert_relative_eq!(c2_distance_to_cosine(&f, 0.0), 4.0 * b, epsilon = 1e-12);
    }

    #[test]
    fn two_point_examples() {
        let cosine = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, 1.0, 0.0)]);
        let r = two_point_morse_check(&cosine, 0.0).unwrap();
        assert!(r.beta >= 1.0 - 1e-12);
        let f = OneDTrigPoly::from_pairs([OneDTrigPoly::cos_sin(1, 1.0, 0.0), OneDTrigPoly::cos_sin(3, 0.0, 0.05)]);
        let c = c2_distance_to_cosine(&f, 0.0);
        assert_relative_eq!(c, 0.45, epsilon = 1e-9);
        let r = two_point_morse_check(&f, c).unwrap();
        assert!(r.beta >= 1.0 - 2.0 * c);
        assert!(matches!(
            two_point_morse_check(&f, 0.1),
            Err(Error::NotCosineClose { .. })
        ));
    }

    #[test]
    fn certificate_examples() {
        let k = ModeVector(vec![1, 2]);
        let pure = TrigPoly::from_modes(2, [(k.clone(), c(0.3, 0.4))]).unwrap();
        let cert = cosine_certificate(&pure, &k).unwrap();
        assert_eq!(cert.gamma, 0.0);
        assert_relative_eq!(cert.eta, 1.0, epsilon = 1e-15);
        assert_relative_eq!(cert.theta0, (0.4f64).atan2(0.3), epsilon = 1e-15);
        let eps2 = 1e-3;
        let two = TrigPoly::from_modes(2, [(k.clone(), c(1.0, 0.0)), (k.scale(2), c(eps2, 0.0))]).unwrap();
        // both signs ±2 enter the majorant
        assert_relative_eq!(
            cosine_certificate(&two, &k).unwrap().gamma,
            eps2 * 2f64.exp(),
            epsilon = 1e-15
        );
        let none = TrigPoly::from_modes(2, [(k.scale(2), c(1.0, 0.0))]).unwrap();
        assert!(matches!(
            cosine_certificate(&none, &k),
            Err(Error::VanishingLeadingMode(_))
        ));
    }

    #[test]
    fn high_mode_pure_cosine() {
        let k = ModeVector(vec![3, 5]);
        let a = 1e-20;
        let f = TrigPoly::from_modes(2, [(k.clone(), c(a, 0.0))]).unwrap();
        let h = morse_constant_high_mode(&f, &k).unwrap();
        assert_relative_eq!(h.computed, 2.0 * a, max_relative = 1e-9);
        assert!(h.computed >= h.certified);
        assert!(morse_constant_high_mode(&TrigPoly::zero(2), &k).is_err());
    }
}
