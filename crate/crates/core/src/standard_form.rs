//! Reduction of a simply-resonant normal form to the one-degree-of-freedom standard form
//! (1 + ν) p₁² + G(p̂, q₁) plus an adiabatic part h₀(p̂).

use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::averaging::{AveragedNF, NfKind};
use crate::cover::CoveringParams;
use crate::error::{Error, Result};
use crate::fourier::{generators, ModeVector, OneDTrigPoly, TrigPoly};
use crate::genericity::{c_s, threshold_n, trial_rng};
use crate::morse::{critical_points, DEFAULT_TOL};
use crate::series::{linear_power, TaylorFourierSeries, MAX_DIM};
use crate::unimodular::{apply_phi1, complete_to_sl, decoupling_matrix, DecouplingMatrix, UnimodularMatrix};

/// Characteristic quantities of the standard form attached to a resonance k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub k: Vec<i64>,
    pub n: usize,
    pub s: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub alpha: f64,
    pub threshold_n: f64,
    pub high_mode: bool,
    pub c1: f64,
    pub c2: f64,
    pub c_s: f64,
    pub r_big: f64,
    pub r: f64,
    pub eps_k: f64,
    pub chi_k: f64,
    pub m: f64,
    pub sigma: f64,
    pub s_hat: f64,
    pub eps_hat: f64,
    pub lambda: f64,
    pub kappa: f64,
}

pub fn c1(n: usize) -> f64 {
    5.0 * n as f64 * ((n - 1) as f64).powf((n - 1) as f64 / 2.0)
}

pub fn c2(n: usize) -> f64 {
    4.0 * (n as f64).powf(1.5) * c1(n)
}

/// κ(n, s, β) = max{c₂, 4c_s, c_s/β}; independent of k.
pub fn kappa(n: usize, s: f64, beta: f64) -> f64 {
    let cs = c_s(s);
    c2(n).max(4.0 * cs).max(cs / beta)
}

pub fn characteristics(
    k: &ModeVector,
    epsilon: f64,
    beta: f64,
    delta: f64,
    f: &TrigPoly,
    params: &CoveringParams,
) -> Result<Characteristics> {
    let n = params.n;
    if !k.is_generator() || k.dim() != n || k.l1() > params.k0 as i64 {
        return Err(Error::NotAGenerator(k.0.clone()));
    }
    if !(beta > 0.0) || !(delta > 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon, beta and delta must be positive".into()));
    }
    let s = params.s;
    let big_n = threshold_n(n, s, delta);
    let high_mode = k.l1() as f64 >= big_n;
    let k2 = k.norm2_sq() as f64;
    let r_big = params.alpha / k2;
    let (c1v, c2v) = (c1(n), c2(n));
    let eps_k = 2.0 * epsilon / k2;
    let fk = f.coeff(k).norm();
    let cs = c_s(s);
    let (m, chi_k, sigma, s_hat) = if high_mode {
        (eps_k * fk, fk, 1.0, 1.0)
    } else {
        (eps_k * beta, 1.0, (s / 2.0).min(1.0), params.s_k_prime(k))
    };
    Ok(Characteristics {
        k: k.0.clone(),
        n,
        s,
        epsilon,
        beta,
        alpha: params.alpha,
        threshold_n: big_n,
        high_mode,
        c1: c1v,
        c2: c2v,
        c_s: cs,
        r_big,
        r: r_big / c2v,
        eps_k,
        chi_k,
        m,
        sigma,
        s_hat,
        eps_hat: 4.0 * cs * eps_k * chi_k,
        lambda: (params.k_cut as f64).powi(-5 * n as i32),
        kappa: kappa(n, s, beta),
    })
}

/// Ĥ_k(ỹ, x̃₁) = ½|Aᵀỹ|² + ε g_o(Aᵀỹ) + ε g_res(Aᵀỹ, x̃₁).
#[derive(Clone, Debug)]
pub struct SecularHam {
    pub k: ModeVector,
    pub um: UnimodularMatrix,
    pub dm: DecouplingMatrix,
    pub epsilon: f64,
    pub base: Vec<f64>,
    pub g: TaylorFourierSeries,
}

impl SecularHam {
    pub fn from_nf(nf: &AveragedNF) -> Result<Self> {
        let k = match &nf.kind {
            NfKind::Resonant { k } => k.clone(),
            NfKind::Nonresonant => {
                return Err(Error::InvalidInput(
                    "secular Hamiltonian needs a resonant normal form".into(),
                ))
            }
        };
        let um = complete_to_sl(&k)?;
        let dm = decoupling_matrix(&um);
        let mut g = nf.g_o();
        g.add_assign(&nf.g_res());
        Ok(SecularHam {
            k,
            um,
            dm,
            epsilon: nf.epsilon,
            base: nf.base.clone(),
            g,
        })
    }

    pub fn n(&self) -> usize {
        self.k.dim()
    }

    pub fn value(&self, yt: &[f64], xt1: f64) -> f64 {
        let y = self.um.a_f64().transpose() * DVector::from_column_slice(yt);
        let k2 = self.k.norm2_sq() as f64;
        let x: Vec<f64> = self.k.0.iter().map(|&v| v as f64 * xt1 / k2).collect();
        0.5 * y.norm_squared() + self.epsilon * self.g.evaluate_at(y.as_slice(), &x)
    }

    /// M = AᵀU, so that y = M Y.
    pub fn m_matrix(&self) -> DMatrix<f64> {
        self.um.a_f64().transpose() * self.dm.u_f64()
    }
}

type Exponent = [u8; MAX_DIM];

/// Polynomial in Z = Y − center times a Fourier series in the resonant angle.
#[derive(Clone, Debug, PartialEq)]
pub struct SecularSeries {
    n: usize,
    center: Vec<f64>,
    degree: u32,
    terms: BTreeMap<(i64, Exponent), Complex64>,
}

fn exponent_degree(b: &Exponent) -> u32 {
    b.iter().map(|&v| v as u32).sum()
}

fn falling(b: u32, d: u32) -> f64 {
    (0..d).map(|i| (b - i) as f64).product()
}

fn poly_mul(a: &BTreeMap<Exponent, f64>, b: &BTreeMap<Exponent, f64>) -> BTreeMap<Exponent, f64> {
    let mut out = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let mut e = [0u8; MAX_DIM];
            for i in 0..MAX_DIM {
                e[i] = ea[i] + eb[i];
            }
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out
}

impl SecularSeries {
    pub fn zero(n: usize, center: Vec<f64>, degree: u32) -> Self {
        SecularSeries {
            n,
            center,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds c·Z^b·e^{ijq}; the caller supplies both ±j for a real function.
    pub fn add_term(&mut self, j: i64, b: &[u32], c: Complex64) {
        let mut e = [0u8; MAX_DIM];
        for (i, &v) in b.iter().enumerate() {
            e[i] = v as u8;
        }
        self.degree = self.degree.max(exponent_degree(&e));
        let entry = self.terms.entry((j, e)).or_default();
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(j, e));
        }
    }

    /// Adds the real term 2 Re(c Z^b e^{ijq}) for j > 0, or c Z^b for j = 0.
    pub fn add_real_term(&mut self, j: u32, b: &[u32], c: Complex64) {
        if j == 0 {
            self.add_term(0, b, Complex64::new(c.re, 0.0));
        } else {
            self.add_term(j as i64, b, c);
            self.add_term(-(j as i64), b, c.conj());
        }
    }

    /// G♯(Y, X₁) = ε_k (g_o + g_res)(AᵀUY − y0, ·), expanded around Y* = (AᵀU)⁻¹ y0.
    pub fn from_secular(sec: &SecularHam, eps_k: f64) -> Result<Self> {
        let n = sec.n();
        let m = sec.m_matrix();
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular decoupled frame".into()))?;
        let center = (m_inv * DVector::from_column_slice(&sec.base)).as_slice().to_vec();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|l| m[(i, l)]).collect()).collect();
        let linear: Vec<BTreeMap<Exponent, f64>> = rows
            .iter()
            .map(|row| {
                linear_power(row, 1)
                    .into_iter()
                    .filter(|(_, c)| *c != 0.0)
                    .map(|(b, c)| {
                        let mut e = [0u8; MAX_DIM];
                        for (i, &v) in b.iter().enumerate() {
                            e[i] = v as u8;
                        }
                        (e, c)
                    })
                    .collect()
            })
            .collect();
        let mut out = SecularSeries::zero(n, center, sec.g.degree());
        let mut cache: BTreeMap<Vec<u32>, BTreeMap<Exponent, f64>> = BTreeMap::new();
        for (key, c) in sec.g.terms() {
            let mode = ModeVector(key.mode(n));
            let j = if mode.is_zero() {
                0
            } else {
                mode.multiple_of(&sec.k)
                    .ok_or_else(|| Error::InvalidInput(format!("mode {:?} is not on the resonant lattice", mode.0)))?
            };
            let a = key.multi_index(n);
            let poly = cache.entry(a.clone()).or_insert_with(|| {
                let mut p: BTreeMap<Exponent, f64> = BTreeMap::from([([0u8; MAX_DIM], 1.0)]);
                for (i, &ai) in a.iter().enumerate() {
                    for _ in 0..ai {
                        p = poly_mul(&p, &linear[i]);
                    }
                }
                p
            });
            for (e, pc) in poly.iter() {
                let b: Vec<u32> = e[..n].iter().map(|&v| v as u32).collect();
                out.add_term(j, &b, *c * (eps_k * pc));
            }
        }
        Ok(out)
    }

    /// ∂^{dy}_Y ∂^{dq}_q at real (Y, q).
    pub fn deriv(&self, y: &[f64], q: f64, dy: &[u32], dq: u32) -> f64 {
        let z: Vec<f64> = y.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut total = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut phase_cache: BTreeMap<i64, Complex64> = BTreeMap::new();
        'terms: for ((j, b), c) in &self.terms {
            let mut mono = 1.0;
            for l in 0..self.n {
                let (bl, dl) = (b[l] as u32, dy.get(l).copied().unwrap_or(0));
                if bl < dl {
                    continue 'terms;
                }
                mono *= falling(bl, dl) * z[l].powi((bl - dl) as i32);
            }
            let phase = *phase_cache
                .entry(*j)
                .or_insert_with(|| (i * *j as f64).powu(dq) * Complex64::from_polar(1.0, *j as f64 * q));
            total += c * phase * mono;
        }
        total.re
    }

    pub fn value(&self, y: &[f64], q: f64) -> f64 {
        self.deriv(y, q, &[], 0)
    }

    pub fn filter<F: Fn(i64, &[u32]) -> bool>(&self, keep: F) -> Self {
        let mut out = SecularSeries::zero(self.n, self.center.clone(), self.degree);
        for ((j, b), c) in &self.terms {
            let bv: Vec<u32> = b[..self.n].iter().map(|&v| v as u32).collect();
            if keep(*j, &bv) {
                out.terms.insert((*j, *b), *c);
            }
        }
        out
    }

    /// Angle-independent part.
    pub fn mean_part(&self) -> Self {
        self.filter(|j, _| j == 0)
    }

    pub fn oscillating_part(&self) -> Self {
        self.filter(|j, _| j != 0)
    }

    /// Self minus a Y-independent potential.
    pub fn minus_potential(&self, g: &OneDTrigPoly) -> Self {
        let mut out = self.clone();
        let zero = vec![0u32; self.n];
        for (&j, &c) in g.modes() {
            out.add_real_term(j, &zero, -c);
        }
        out
    }

    /// Upper bound for Σ|c| ρ^{|b|} e^{|j|σ} after recentring at `at`.
    pub fn majorant_at(&self, at: &[f64], rho: f64, sigma: f64) -> f64 {
        let d: Vec<f64> = at.iter().zip(&self.center).map(|(a, b)| (a - b).abs()).collect();
        self.terms
            .iter()
            .map(|((j, b), c)| {
                let radial: f64 = (0..self.n).map(|l| (rho + d[l]).powi(b[l] as i32)).product();
                c.norm() * radial * (j.unsigned_abs() as f64 * sigma).exp()
            })
            .sum()
    }

    /// Random real series: modes |j| ≤ max_mode, degree ≤ degree, coefficients in the unit disk times e^{-|j|}.
    pub fn random(n: usize, center: Vec<f64>, degree: u32, max_mode: u32, seed: u64) -> Self {
        let mut rng = trial_rng(seed, 0);
        let mut out = SecularSeries::zero(n, center, degree);
        for m in 0..=degree {
            for b in crate::series::multi_indices(n, m) {
                for j in 0..=max_mode {
                    let re: f64 = rng.gen_range(-1.0..1.0);
                    let im: f64 = if j == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                    out.add_real_term(j, &b, Complex64::new(re, im) * (-(j as f64)).exp());
                }
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= lambda;
        }
        out
    }
}

/// Size hypothesis β_o / r² < 2^{-10} σ / (π + σ) for the fixed-point construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub beta_o: f64,
    pub r: f64,
    pub sigma: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub holds: bool,
}

pub fn hypothesis_threshold(sigma: f64) -> f64 {
    2f64.powi(-10) * sigma / (std::f64::consts::PI + sigma)
}

/// β_o is the majorant of G♯ − Ḡ on the 4r-ball around (0, p̂) and the σ-strip.
pub fn hypothesis_check(g: &SecularSeries, g_bar: &OneDTrigPoly, p_hat: &[f64], r: f64, sigma: f64) -> HypothesisCheck {
    let mut at = vec![0.0];
    at.extend_from_slice(p_hat);
    let beta_o = g.minus_potential(g_bar).majorant_at(&at, 4.0 * r, sigma);
    let ratio = beta_o / (r * r);
    let threshold = hypothesis_threshold(sigma);
    HypothesisCheck {
        beta_o,
        r,
        sigma,
        ratio,
        threshold,
        holds: ratio < threshold,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub quadrature_nodes: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            grid: 256,
            tol: 1e-13,
            max_iter: 200,
            quadrature_nodes: 32,
        }
    }
}

fn full_point(u: f64, p_hat: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(p_hat.len() + 1);
    y.push(u);
    y.extend_from_slice(p_hat);
    y
}

fn unit(n: usize, idx: &[usize]) -> Vec<u32> {
    let mut d = vec![0u32; n];
    for &i in idx {
        d[i] += 1;
    }
    d
}

#[derive(Clone, Copy, Debug)]
struct PointSolve {
    u: f64,
    iterations: usize,
    residual: f64,
    ratio: f64,
}

/// Solves 2u + ∂_{Y₁}G♯(u, p̂, q) = 0 by Picard iteration, polished by Newton.
fn solve_point(g: &SecularSeries, p_hat: &[f64], q: f64, opts: &FixedPointOptions) -> Result<PointSolve> {
    let n = g.n();
    let d1 = unit(n, &[0]);
    let d2 = unit(n, &[0, 0]);
    let map = |u: f64| -0.5 * g.deriv(&full_point(u, p_hat), q, &d1, 0);
    let mut u = 0.0;
    let mut next = map(u);
    let mut prev_step = (next - u).abs();
    let mut ratio: f64 = 0.0;
    let mut iterations = 1;
    let mut growing = 0;
    while iterations < opts.max_iter {
        u = next;
        next = map(u);
        let step = (next - u).abs();
        iterations += 1;
        if prev_step > 0.0 && step > 0.0 {
            let rho = step / prev_step;
            ratio = ratio.max(rho);
            growing = if rho >= 1.0 { growing + 1 } else { 0 };
            if growing >= 3 {
                return Err(Error::Divergence(format!(
                    "fixed-point iteration ratio {rho:.3} at q = {q}"
                )));
            }
        }
        if step <= 1e-17 * (1.0 + next.abs()) || step == 0.0 {
            break;
        }
        prev_step = step;
    }
    u = next;
    for _ in 0..2 {
        let y = full_point(u, p_hat);
        let f = 2.0 * u + g.deriv(&y, q, &d1, 0);
        let df = 2.0 + g.deriv(&y, q, &d2, 0);
        u -= f / df;
    }
    let residual = (u - map(u)).abs();
    if !residual.is_finite() {
        return Err(Error::Divergence("non-finite fixed point".into()));
    }
    Ok(PointSolve {
        u,
        iterations,
        residual,
        ratio,
    })
}

/// Values of u, u_i, u_q at one angle (i indexes p̂).
#[derive(Clone, Debug)]
pub struct PointJet {
    pub u: f64,
    pub u_hat: Vec<f64>,
    pub u_q: f64,
    pub u_hat2: Vec<Vec<f64>>,
}

fn point_jet(g: &SecularSeries, p_hat: &[f64], q: f64, u: f64) -> PointJet {
    let n = g.n();
    let m = n - 1;
    let y = full_point(u, p_hat);
    let d = |idx: &[usize], dq: u32| g.deriv(&y, q, &unit(n, idx), dq);
    let denom = 2.0 + d(&[0, 0], 0);
    let u_hat: Vec<f64> = (0..m).map(|i| -d(&[0, i + 1], 0) / denom).collect();
    let u_q = -d(&[0], 1) / denom;
    let g111 = d(&[0, 0, 0], 0);
    let mut u_hat2 = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let num = g111 * u_hat[i] * u_hat[j]
                + d(&[0, 0, j + 1], 0) * u_hat[i]
                + d(&[0, 0, i + 1], 0) * u_hat[j]
                + d(&[0, i + 1, j + 1], 0);
            u_hat2[i][j] = -num / denom;
            u_hat2[j][i] = u_hat2[i][j];
        }
    }
    PointJet { u, u_hat, u_q, u_hat2 }
}

/// Fourier coefficients c_j (|j| < N/2) of grid samples on [0, 2π).
fn spectral_coeffs(values: &[f64]) -> Vec<(i64, Complex64)> {
    let len = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = (len / 2) as i64;
    buf.iter()
        .enumerate()
        .filter_map(|(b, c)| {
            let j = if (b as i64) < half {
                b as i64
            } else {
                b as i64 - len as i64
            };
            (j.abs() < half).then(|| (j, c / len as f64))
        })
        .collect()
}

/// ∫₀^q of the trigonometric interpolant.
fn primitive(coeffs: &[(i64, Complex64)], q: f64) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    coeffs
        .iter()
        .map(|(j, c)| {
            if *j == 0 {
                c.re * q
            } else {
                (c / (i * *j as f64) * (Complex64::from_polar(1.0, *j as f64 * q) - 1.0)).re
            }
        })
        .sum()
}

/// Fixed point p(p̂, ·) on the angle grid, with its average and primitive.
#[derive(Clone, Debug)]
pub struct FixedPointSolution {
    pub p_hat: Vec<f64>,
    pub grid: Vec<f64>,
    pub p: Vec<f64>,
    pub p_o: f64,
    pub grad_p_o: Vec<f64>,
    pub hess_p_o: Vec<Vec<f64>>,
    pub residual: f64,
    pub iteration_ratio: f64,
    pub contraction: f64,
    pub iterations: usize,
    pub max_abs_p: f64,
    pub hypothesis: Option<HypothesisCheck>,
    /// |p| < β_o/(3r), when the hypothesis data are available.
    pub p_bound_ok: Option<bool>,
    tilde: Vec<(i64, Complex64)>,
    tilde_hat: Vec<Vec<(i64, Complex64)>>,
    tilde_hat2: Vec<Vec<Vec<(i64, Complex64)>>>,
}

impl FixedPointSolution {
    /// φ(q) = ∫₀^q p̃.
    pub fn phi(&self, q: f64) -> f64 {
        primitive(&self.tilde, q)
    }

    /// ∂_{p̂_i} φ.
    pub fn dphi(&self, i: usize, q: f64) -> f64 {
        primitive(&self.tilde_hat[i], q)
    }

    pub fn d2phi(&self, i: usize, j: usize, q: f64) -> f64 {
        primitive(&self.tilde_hat2[i][j], q)
    }

    /// q̂ = −∂_{p̂} φ.
    pub fn q_hat(&self, q: f64) -> Vec<f64> {
        (0..self.p_hat.len()).map(|i| -self.dphi(i, q)).collect()
    }

    pub fn p_tilde_mean(&self) -> f64 {
        self.tilde
            .iter()
            .find(|(j, _)| *j == 0)
            .map(|(_, c)| c.re)
            .unwrap_or(0.0)
    }

    pub fn periodicity_defect(&self) -> f64 {
        (self.phi(2.0 * std::f64::consts::PI) - self.phi(0.0)).abs()
    }
}

/// Extra inputs for the size checks of the fixed-point problem.
#[derive(Clone, Debug)]
pub struct FixedPointSetup {
    pub r: f64,
    pub sigma: f64,
    pub g_bar: OneDTrigPoly,
}

/// Solves p = −½ ∂_{Y₁}G♯(p, p̂, q₁) on the angle grid.
pub fn solve_fixed_point(
    g: &SecularSeries,
    p_hat: &[f64],
    opts: &FixedPointOptions,
    setup: Option<&FixedPointSetup>,
) -> Result<FixedPointSolution> {
    let n = g.n();
    if p_hat.len() + 1 != n || n < 2 {
        return Err(Error::InvalidInput("p̂ must have n − 1 components".into()));
    }
    let m = n - 1;
    let len = opts.grid;
    let grid: Vec<f64> = (0..len)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / len as f64)
        .collect();
    let solves: Vec<Result<PointSolve>> = grid.par_iter().map(|&q| solve_point(g, p_hat, q, opts)).collect();
    let mut points = Vec::with_capacity(len);
    for s in solves {
        points.push(s?);
    }
    let residual = points.iter().map(|s| s.residual).fold(0.0, f64::max);
    if residual >= opts.tol {
        return Err(Error::Divergence(format!(
            "fixed-point residual {residual:.3e} above tolerance"
        )));
    }
    let jets: Vec<PointJet> = grid
        .iter()
        .zip(&points)
        .map(|(&q, s)| point_jet(g, p_hat, q, s.u))
        .collect();
    let mean = |v: &dyn Fn(&PointJet) -> f64| jets.iter().map(v).sum::<f64>() / len as f64;
    let p: Vec<f64> = jets.iter().map(|j| j.u).collect();
    let p_o = mean(&|j| j.u);
    let grad_p_o: Vec<f64> = (0..m).map(|i| mean(&|j| j.u_hat[i])).collect();
    let hess_p_o: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|l| mean(&|j| j.u_hat2[i][l])).collect())
        .collect();
    let tilde = spectral_coeffs(&p.iter().map(|v| v - p_o).collect::<Vec<_>>());
    let tilde_hat: Vec<Vec<(i64, Complex64)>> = (0..m)
        .map(|i| spectral_coeffs(&jets.iter().map(|j| j.u_hat[i] - grad_p_o[i]).collect::<Vec<_>>()))
        .collect();
    let tilde_hat2: Vec<Vec<Vec<(i64, Complex64)>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|l| spectral_coeffs(&jets.iter().map(|j| j.u_hat2[i][l] - hess_p_o[i][l]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    let max_abs_p = p.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let iteration_ratio = points.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let d2 = unit(n, &[0, 0]);
    let contraction = match setup {
        Some(st) => {
            let samples: Vec<f64> = (0..=8).map(|i| -st.r / 2.0 + st.r * i as f64 / 8.0).collect();
            grid.iter()
                .step_by(8)
                .flat_map(|&q| samples.iter().map(move |&u| (q, u)))
                .map(|(q, u)| 0.5 * g.deriv(&full_point(u, p_hat), q, &d2, 0).abs())
                .fold(iteration_ratio, f64::max)
        }
        None => iteration_ratio,
    };
    let hypothesis = setup.map(|st| hypothesis_check(g, &st.g_bar, p_hat, st.r, st.sigma));
    let p_bound_ok = hypothesis.as_ref().map(|h| max_abs_p < h.beta_o / (3.0 * h.r));
    Ok(FixedPointSolution {
        p_hat: p_hat.to_vec(),
        grid,
        p,
        p_o,
        grad_p_o,
        hess_p_o,
        residual,
        iteration_ratio,
        contraction,
        iterations: points.iter().map(|s| s.iterations).max().unwrap_or(0),
        max_abs_p,
        hypothesis,
        p_bound_ok,
        tilde,
        tilde_hat,
        tilde_hat2,
    })
}

/// Member Ψ_a of the group of maps (p, q) ↦ (p₁ + a(p̂), p̂, q₁, q̂ − q₁ ∂a(p̂)).
pub struct GDagger<'a> {
    pub a: Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Sync + 'a>,
}

impl<'a> GDagger<'a> {
    pub fn new<F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync + 'a>(a: F) -> Self {
        GDagger { a: Box::new(a) }
    }

    pub fn apply(&self, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (a, da) = (self.a)(&p[1..]);
        let mut pp = p.to_vec();
        let mut qq = q.to_vec();
        pp[0] += a;
        for i in 0..da.len() {
            qq[i + 1] -= q[0] * da[i];
        }
        (pp, qq)
    }

    /// Ψ_{−a}.
    pub fn inverse(&'a self) -> GDagger<'a> {
        GDagger::new(move |ph: &[f64]| {
            let (a, da) = (self.a)(ph);
            (-a, da.iter().map(|v| -v).collect())
        })
    }
}

/// Linear member with a(p̂) = w·p̂.
pub fn linear_gdagger(w: Vec<f64>) -> GDagger<'static> {
    GDagger::new(move |ph: &[f64]| (w.iter().zip(ph).map(|(a, b)| a * b).sum(), w.clone()))
}

/// max |JᵀΩJ − Ω| with Ω = [[0, I], [−I, 0]].
pub fn symplectic_residual(j: &DMatrix<f64>) -> f64 {
    let dim = j.nrows();
    let n = dim / 2;
    let mut omega = DMatrix::zeros(dim, dim);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    (j.transpose() * &omega * j - &omega).abs().max()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Phi3,
    Phi2,
    Phi1,
    Diamond,
}

/// Central-difference Jacobian with one Richardson step (error O(h⁴)).
pub fn fd_jacobian<F>(map: F, z: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let dim = z.len();
    let rows = map(z)?.len();
    let mut jac = DMatrix::zeros(rows, dim);
    let central = |c: usize, step: f64| -> Result<Vec<f64>> {
        let mut plus = z.to_vec();
        let mut minus = z.to_vec();
        plus[c] += step;
        minus[c] -= step;
        let (fp, fm) = (map(&plus)?, map(&minus)?);
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    };
    for c in 0..dim {
        let coarse = central(c, h)?;
        let fine = central(c, h / 2.0)?;
        for r in 0..rows {
            jac[(r, c)] = (4.0 * fine[r] - coarse[r]) / 3.0;
        }
    }
    Ok(jac)
}

/// One point of the full pipeline.
#[derive(Clone, Debug)]
pub struct PipelinePoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub yt: Vec<f64>,
    pub xt: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// The standard form with its transforms.
pub struct StandardForm {
    pub k: ModeVector,
    pub um: UnimodularMatrix,
    pub dm: DecouplingMatrix,
    pub eps_k: f64,
    pub g_sharp: SecularSeries,
    pub g_bar: OneDTrigPoly,
    pub r: f64,
    pub sigma: f64,
    pub characteristics: Option<Characteristics>,
    pub secular: Option<SecularHam>,
    pub options: FixedPointOptions,
    quad: GaussLegendre,
}

impl StandardForm {
    /// Standard form of a resonant normal form.
    pub fn build(
        nf: &AveragedNF,
        f: &TrigPoly,
        beta: f64,
        delta: f64,
        params: &CoveringParams,
        options: FixedPointOptions,
    ) -> Result<Self> {
        let secular = SecularHam::from_nf(nf)?;
        let chars = characteristics(&secular.k, nf.epsilon, beta, delta, f, params)?;
        let g_sharp = build_phi1(&secular, chars.eps_k)?;
        let g_bar = f.project_lattice(&secular.k)?.scaled(chars.eps_k);
        let mut sf = StandardForm::from_series(
            secular.k.clone(),
            g_sharp,
            g_bar,
            chars.eps_k,
            chars.r,
            chars.sigma,
            options,
        )?;
        sf.characteristics = Some(chars);
        sf.secular = Some(secular);
        Ok(sf)
    }

    /// Standard form of an arbitrary G♯ (no secular Hamiltonian attached).
    pub fn from_series(
        k: ModeVector,
        g_sharp: SecularSeries,
        g_bar: OneDTrigPoly,
        eps_k: f64,
        r: f64,
        sigma: f64,
        options: FixedPointOptions,
    ) -> Result<Self> {
        let um = complete_to_sl(&k)?;
        let dm = decoupling_matrix(&um);
        if g_sharp.n() != k.dim() {
            return Err(Error::InvalidInput("G♯ dimension differs from k".into()));
        }
        let nodes = NonZeroUsize::new(options.quadrature_nodes.max(1)).expect("positive");
        Ok(StandardForm {
            k,
            um,
            dm,
            eps_k,
            g_sharp,
            g_bar,
            r,
            sigma,
            characteristics: None,
            secular: None,
            options,
            quad: GaussLegendre::new(nodes),
        })
    }

    pub fn n(&self) -> usize {
        self.k.dim()
    }

    pub fn setup(&self) -> FixedPointSetup {
        FixedPointSetup {
            r: self.r,
            sigma: self.sigma,
            g_bar: self.g_bar.clone(),
        }
    }

    pub fn solve(&self, p_hat: &[f64]) -> Result<FixedPointSolution> {
        solve_fixed_point(&self.g_sharp, p_hat, &self.options, Some(&self.setup()))
    }

    /// Π⊥ Âᵀ p̂.
    pub fn perp(&self, p_hat: &[f64]) -> Vec<f64> {
        let n = self.n();
        let a_hat = self.um.a_hat();
        let w: Vec<f64> = (0..n)
            .map(|c| (0..n - 1).map(|r| a_hat[r][c] as f64 * p_hat[r]).sum())
            .collect();
        let kf = self.k.to_f64();
        let proj = w.iter().zip(&kf).map(|(a, b)| a * b).sum::<f64>() / self.k.norm2_sq() as f64;
        w.iter().zip(&kf).map(|(a, b)| a - proj * b).collect()
    }

    /// Centre of the adiabatic actions: Ŷ* with Π⊥ÂᵀŶ* = Π⊥ y0.
    pub fn p_hat_center(&self) -> Vec<f64> {
        self.g_sharp.center()[1..].to_vec()
    }

    fn point_u(&self, p_hat: &[f64], q1: f64) -> Result<f64> {
        Ok(solve_point(&self.g_sharp, p_hat, q1, &self.options)?.u)
    }

    /// ν = ∫₀¹ (1 − t) ∂²_{Y₁}G♯(p + t p₁) dt with p the fixed point at (p̂, q₁).
    pub fn nu(&self, p_hat: &[f64], p1: f64, q1: f64) -> Result<f64> {
        let u = self.point_u(p_hat, q1)?;
        let d2 = unit(self.n(), &[0, 0]);
        Ok(self.quad.integrate(0.0, 1.0, |t| {
            (1.0 - t) * self.g_sharp.deriv(&full_point(u + t * p1, p_hat), q1, &d2, 0)
        }))
    }

    fn energy_density(&self, p_hat: &[f64], q1: f64, u: f64) -> f64 {
        u * u + self.g_sharp.value(&full_point(u, p_hat), q1)
    }

    /// G₀(p̂) = ⟨p² + G♯(p)⟩.
    pub fn g0(&self, fp: &FixedPointSolution) -> f64 {
        fp.grid
            .iter()
            .zip(&fp.p)
            .map(|(&q, &u)| self.energy_density(&fp.p_hat, q, u))
            .sum::<f64>()
            / fp.grid.len() as f64
    }

    /// G(p̂, q₁) = p² + G♯(p) − G₀.
    pub fn potential(&self, fp: &FixedPointSolution, q1: f64) -> Result<f64> {
        let u = self.point_u(&fp.p_hat, q1)?;
        Ok(self.energy_density(&fp.p_hat, q1, u) - self.g0(fp))
    }

    /// h₀(p̂) = |Π⊥Âᵀp̂|²/|k|² + G₀(p̂).
    pub fn h0(&self, fp: &FixedPointSolution) -> f64 {
        let perp = self.perp(&fp.p_hat);
        perp.iter().map(|v| v * v).sum::<f64>() / self.k.norm2_sq() as f64 + self.g0(fp)
    }

    /// H_k(p, q₁) = (1 + ν) p₁² + G(p̂, q₁).
    pub fn h_k(&self, fp: &FixedPointSolution, p1: f64, q1: f64) -> Result<f64> {
        Ok((1.0 + self.nu(&fp.p_hat, p1, q1)?) * p1 * p1 + self.potential(fp, q1)?)
    }

    /// H♯(Y, X₁) = Y₁² + G♯(Y, X₁).
    pub fn h_sharp(&self, y: &[f64], x1: f64) -> f64 {
        y[0] * y[0] + self.g_sharp.value(y, x1)
    }

    pub fn phi3(&self, fp: &FixedPointSolution, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pp = p.to_vec();
        let mut qq = q.to_vec();
        pp[0] += fp.p_o;
        for i in 0..fp.grad_p_o.len() {
            qq[i + 1] -= q[0] * fp.grad_p_o[i];
        }
        (pp, qq)
    }

    pub fn phi2(&self, fp: &FixedPointSolution, big_p: &[f64], big_q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let u = self.point_u(&big_p[1..], big_q[0])?;
        let mut y = big_p.to_vec();
        let mut x = big_q.to_vec();
        y[0] += u - fp.p_o;
        let q_hat = fp.q_hat(big_q[0]);
        for i in 0..q_hat.len() {
            x[i + 1] += q_hat[i];
        }
        Ok((y, x))
    }

    pub fn phi1(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        apply_phi1(&self.dm, y, x)
    }

    /// Φ◇ = Φ₁ ∘ Φ₂ ∘ Φ₃.
    pub fn phi_diamond(&self, fp: &FixedPointSolution, p: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (pp, qq) = self.phi3(fp, p, q);
        let (y, x) = self.phi2(fp, &pp, &qq)?;
        Ok(self.phi1(&y, &x))
    }

    /// Φ₁ as Ψ_a with a(Ŷ) = −(Âk)·Ŷ/|k|².
    pub fn phi1_as_gdagger(&self) -> GDagger<'static> {
        let k2 = self.k.norm2_sq() as f64;
        linear_gdagger(self.um.a_hat_k().iter().map(|&v| -(v as f64) / k2).collect())
    }

    /// Jacobians of Φ₃, Φ₂, Φ₁ and Φ◇ at (p, q); the fixed point must be solved at p̂.
    pub fn jacobians(&self, fp: &FixedPointSolution, p: &[f64], q: &[f64]) -> Result<[DMatrix<f64>; 4]> {
        let n = self.n();
        let m = n - 1;
        let dim = 2 * n;
        let mut j3 = DMatrix::identity(dim, dim);
        for i in 0..m {
            j3[(0, 1 + i)] = fp.grad_p_o[i];
            j3[(n + 1 + i, n)] = -fp.grad_p_o[i];
            for l in 0..m {
                j3[(n + 1 + i, 1 + l)] = -q[0] * fp.hess_p_o[i][l];
            }
        }
        let q1 = q[0];
        let u = self.point_u(&p[1..], q1)?;
        let jet = point_jet(&self.g_sharp, &p[1..], q1, u);
        let mut j2 = DMatrix::identity(dim, dim);
        j2[(0, n)] = jet.u_q;
        for i in 0..m {
            let dtilde = jet.u_hat[i] - fp.grad_p_o[i];
            j2[(0, 1 + i)] = dtilde;
            j2[(n + 1 + i, n)] = -dtilde;
            for l in 0..m {
                j2[(n + 1 + i, 1 + l)] = -fp.d2phi(i, l, q1);
            }
        }
        let mut j1 = DMatrix::zeros(dim, dim);
        let u_mat = self.dm.u_f64();
        let u_inv_t = self.dm.u_inv_f64().transpose();
        j1.view_mut((0, 0), (n, n)).copy_from(&u_mat);
        j1.view_mut((n, n), (n, n)).copy_from(&u_inv_t);
        let jd = &j1 * &j2 * &j3;
        Ok([j3, j2, j1, jd])
    }

    /// Ĥ_k(Φ◇(p, q)) against (|k|²/2)(H_k(p, q₁) + h₀(p̂)).
    pub fn energy_identity(&self, fp: &FixedPointSolution, p: &[f64], q: &[f64]) -> Result<PipelinePoint> {
        let secular = self
            .secular
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("energy identity needs the secular Hamiltonian".into()))?;
        let (yt, xt) = self.phi_diamond(fp, p, q)?;
        let lhs = secular.value(&yt, xt[0]);
        let rhs = 0.5 * self.k.norm2_sq() as f64 * (self.h_k(fp, p[0], q[0])? + self.h0(fp));
        Ok(PipelinePoint {
            p: p.to_vec(),
            q: q.to_vec(),
            yt,
            xt,
            lhs,
            rhs,
        })
    }

    /// Stage maps on the stacked point z = (p, q), concatenated; one fixed-point solve at the incoming p̂.
    pub fn stage_maps(&self, stages: &[Stage], z: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let (p, q) = z.split_at(n);
        let fp = self.solve(&p[1..])?;
        let mut out = Vec::with_capacity(stages.len() * 2 * n);
        for stage in stages {
            let (a, b) = match stage {
                Stage::Phi3 => self.phi3(&fp, p, q),
                Stage::Phi2 => self.phi2(&fp, p, q)?,
                Stage::Phi1 => self.phi1(p, q),
                Stage::Diamond => self.phi_diamond(&fp, p, q)?,
            };
            out.extend(a);
            out.extend(b);
        }
        Ok(out)
    }

    /// |Ĥ_k∘Φ₁ − ((|k|²/2) H♯ + ½|Π⊥ÂᵀŶ|²)| at (Y, X₁).
    pub fn decoupling_defect(&self, y: &[f64], x1: f64) -> Result<f64> {
        let secular = self
            .secular
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("decoupling check needs the secular Hamiltonian".into()))?;
        let mut x = vec![0.0; self.n()];
        x[0] = x1;
        let (yt, xt) = self.phi1(y, &x);
        let lhs = secular.value(&yt, xt[0]);
        let perp = self.perp(&y[1..]);
        let rhs = 0.5 * self.k.norm2_sq() as f64 * self.h_sharp(y, x1) + 0.5 * perp.iter().map(|v| v * v).sum::<f64>();
        Ok((lhs - rhs).abs() / lhs.abs().max(1e-300))
    }

    /// Sample points (p, q) near the resonance: p̂ within r of the centre, |p₁| ≤ r/2.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let center = self.p_hat_center();
        (0..count)
            .map(|i| {
                let mut rng = trial_rng(seed, i as u64);
                let mut p = vec![rng.gen_range(-0.5..0.5) * self.r];
                p.extend(center.iter().map(|c| c + rng.gen_range(-1.0..1.0) * self.r));
                let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI)).collect();
                (p, q)
            })
            .collect()
    }

    /// Whether Π⊥Âᵀp̂ satisfies the single-resonance separation from every other generator.
    pub fn domain_contains(&self, p_hat: &[f64], params: &CoveringParams) -> bool {
        let perp = self.perp(p_hat);
        let knorm = self.k.norm2();
        let bound = 3.0 * params.alpha * params.k_cut as f64 / knorm;
        perp.iter().map(|v| v * v).sum::<f64>() < 1.0
            && generators(params.n, params.k_cut as f64)
                .iter()
                .filter(|l| *l != &self.k)
                .all(|l| l.dot(&perp).abs() > bound)
    }
}

/// The decoupled form: G♯ such that Ĥ_k∘Φ₁ = (|k|²/2)(Y₁² + G♯) + ½|Π⊥ÂᵀŶ|².
pub fn build_phi1(secular: &SecularHam, eps_k: f64) -> Result<SecularSeries> {
    SecularSeries::from_secular(secular, eps_k)
}

/// One checked inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl BoundCheck {
    fn new(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        BoundCheck {
            name: name.to_string(),
            value,
            lower,
            upper,
            pass,
        }
    }

    /// Signed distance to the nearest violated or active bound (positive when satisfied).
    pub fn margin(&self) -> f64 {
        let lo = self.lower.map(|l| self.value - l).unwrap_or(f64::INFINITY);
        let hi = self.upper.map(|u| u - self.value).unwrap_or(f64::INFINITY);
        lo.min(hi)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StandardReport {
    pub characteristics: Characteristics,
    pub checks: Vec<BoundCheck>,
    pub g_bar_morse_beta: f64,
    pub hypothesis: Option<HypothesisCheck>,
    pub samples: usize,
}

/// Evaluates every size estimate of the standard form on sampled points.
pub fn verify_standard(sf: &StandardForm, samples: usize, seed: u64) -> Result<StandardReport> {
    let chars = sf
        .characteristics
        .clone()
        .ok_or_else(|| Error::InvalidInput("verification needs characteristics".into()))?;
    let points = sf.sample_points(samples.max(1), seed);
    let center_fp = sf.solve(&sf.p_hat_center())?;
    let per_point: Vec<Result<(f64, f64, f64)>> = points
        .par_iter()
        .map(|(p, q)| {
            let fp = sf.solve(&p[1..])?;
            let g_dev = (sf.potential(&fp, q[0])? - sf.g_bar.eval(q[0])).abs();
            let nu = sf.nu(&p[1..], p[0], q[0])?.abs();
            let h0_dev =
                (sf.h0(&fp) - sf.perp(&p[1..]).iter().map(|v| v * v).sum::<f64>() / sf.k.norm2_sq() as f64).abs();
            Ok((g_dev, nu, h0_dev))
        })
        .collect();
    let (mut g_dev, mut nu_max, mut h0_dev) = (0.0f64, 0.0f64, 0.0f64);
    for r in per_point {
        let (a, b, c) = r?;
        g_dev = g_dev.max(a);
        nu_max = nu_max.max(b);
        h0_dev = h0_dev.max(c);
    }
    let morse = critical_points(&sf.g_bar, DEFAULT_TOL)?;
    let kappa = chars.kappa;
    let checks = vec![
        BoundCheck::new(
            "sup |G_bar| on the sigma-strip <= eps_hat",
            sf.g_bar.majorant(chars.sigma),
            None,
            Some(chars.eps_hat),
        ),
        BoundCheck::new(
            "sup |G - G_bar| <= eps_hat * lambda",
            g_dev,
            None,
            Some(chars.eps_hat * chars.lambda),
        ),
        BoundCheck::new("sup |nu| <= lambda", nu_max, None, Some(chars.lambda)),
        BoundCheck::new(
            "|h0 - |perp|^2/|k|^2| <= 6 eps_k lambda",
            h0_dev,
            None,
            Some(6.0 * chars.eps_k * chars.lambda),
        ),
        BoundCheck::new(
            "eps_hat / m in [1/2, kappa]",
            chars.eps_hat / chars.m,
            Some(0.5),
            Some(kappa),
        ),
        BoundCheck::new("sigma in [1/kappa, 1]", chars.sigma, Some(1.0 / kappa), Some(1.0)),
        BoundCheck::new("R / r in [1, kappa]", chars.r_big / chars.r, Some(1.0), Some(kappa)),
        BoundCheck::new(
            "Morse constant of G_bar >= m",
            morse.beta,
            Some(chars.m * (1.0 - 1e-9)),
            None,
        ),
    ];
    Ok(StandardReport {
        characteristics: chars,
        checks,
        g_bar_morse_beta: morse.beta,
        hypothesis: center_fp.hypothesis,
        samples: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series_2d(terms: &[(i64, [u32; 2], f64)]) -> SecularSeries {
        let mut g = SecularSeries::zero(2, vec![0.0, 0.0], 3);
        for (j, b, c) in terms {
            g.add_term(*j, b, Complex64::new(*c, 0.0));
        }
        g
    }

    #[test]
    fn kappa_hand_value() {
        assert_relative_eq!(c1(2), 10.0);
        assert_relative_eq!(kappa(2, 1.0, 0.1), 80.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(kappa(2, 1.0, 0.001), 1000.0);
    }

    #[test]
    fn affine_and_angle_free_fixed_points() {
        let opts = FixedPointOptions::default();
        let linear = series_2d(&[(0, [1, 0], 0.3)]);
        let fp = solve_fixed_point(&linear, &[0.1], &opts, None).unwrap();
        assert!(fp.p.iter().all(|v| (v + 0.15).abs() < 1e-16));
        let flat = series_2d(&[(0, [0, 2], 0.3), (2, [0, 0], 0.1), (-2, [0, 0], 0.1)]);
        let fp = solve_fixed_point(&flat, &[0.1], &opts, None).unwrap();
        assert_eq!(fp.max_abs_p, 0.0);
    }

    #[test]
    fn oscillating_first_order_fixed_point() {
        let eps = 1e-6;
        // G♯ = ε Y₁ cos q
        let g = series_2d(&[(1, [1, 0], eps / 2.0), (-1, [1, 0], eps / 2.0)]);
        let fp = solve_fixed_point(&g, &[0.0], &FixedPointOptions::default(), None).unwrap();
        for (q, p) in fp.grid.iter().zip(&fp.p) {
            assert_relative_eq!(*p, -0.5 * eps * q.cos(), epsilon = 1e-18);
        }
        assert!(fp.p_o.abs() < 1e-20);
        assert_relative_eq!(fp.phi(0.7), -0.5 * eps * 0.7f64.sin(), epsilon = 1e-18);
        assert!(fp.periodicity_defect() < 1e-13);
    }

    #[test]
    fn quadratic_nu_is_exact() {
        let a = 0.01;
        let g = series_2d(&[(0, [2, 0], a), (1, [0, 1], 0.02), (-1, [0, 1], 0.02)]);
        let sf = StandardForm::from_series(
            ModeVector(vec![1, 0]),
            g,
            OneDTrigPoly::zero(),
            1.0,
            0.01,
            1.0,
            FixedPointOptions::default(),
        )
        .unwrap();
        // ∂²G♯ = 2a, ∫(1−t)2a = a
        assert_relative_eq!(sf.nu(&[0.2], 0.003, 1.1).unwrap(), a, epsilon = 1e-15);
    }

    #[test]
    fn gdagger_group_law() {
        let a = GDagger::new(|ph: &[f64]| (ph[0].sin(), vec![ph[0].cos()]));
        let inv = a.inverse();
        let (p, q) = (vec![0.1, 0.4], vec![1.3, -0.2]);
        let (p1, q1) = a.apply(&p, &q);
        let (p2, q2) = inv.apply(&p1, &q1);
        assert!(p2.iter().zip(&p).all(|(x, y)| (x - y).abs() < 1e-15));
        assert!(q2.iter().zip(&q).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn synthetic_pipeline_is_symplectic() {
        let r = 0.01;
        let g = SecularSeries::random(2, vec![0.0, 0.3], 3, 3, 7);
        let h = hypothesis_check(&g, &OneDTrigPoly::zero(), &[0.3], r, 1.0);
        let g = g.scaled(0.5 * h.threshold / h.ratio);
        let sf = StandardForm::from_series(
            ModeVector(vec![2, 3]),
            g,
            OneDTrigPoly::zero(),
            1.0,
            r,
            1.0,
            FixedPointOptions::default(),
        )
        .unwrap();
        for (p, q) in sf.sample_points(5, 3) {
            let fp = sf.solve(&p[1..]).unwrap();
            assert!(fp.hypothesis.as_ref().unwrap().holds);
            assert!(fp.contraction <= 0.125);
            let [j3, j2, j1, jd] = sf.jacobians(&fp, &p, &q).unwrap();
            for j in [&j3, &j2, &j1, &jd] {
                assert!(symplectic_residual(j) < 1e-12, "{}", symplectic_residual(j));
            }
            // finite-difference check of the composite
            let h = 1e-6;
            for c in 0..4 {
                let mut plus = p.iter().chain(&q).copied().collect::<Vec<_>>();
                let mut minus = plus.clone();
                plus[c] += h;
                minus[c] -= h;
                let eval = |v: &[f64]| {
                    let fp = sf.solve(&v[1..2]).unwrap();
                    let (a, b) = sf.phi_diamond(&fp, &v[..2], &v[2..]).unwrap();
                    a.into_iter().chain(b).collect::<Vec<_>>()
                };
                let (fplus, fminus) = (eval(&plus), eval(&minus));
                for row in 0..4 {
                    let fd = (fplus[row] - fminus[row]) / (2.0 * h);
                    assert!(
                        (fd - jd[(row, c)]).abs() < 1e-7,
                        "entry ({row},{c}): {fd} vs {}",
                        jd[(row, c)]
                    );
                }
            }
        }
    }
}
