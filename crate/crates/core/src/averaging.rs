//! Lie-series averaging around a base action: non-resonant and simply-resonant
//! normal forms, and the rescaled cosine-like form.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::CoveringParams;
use crate::error::{Error, Result};
use crate::fourier::{ModeVector, OneDTrigPoly, TrigPoly};
use crate::genericity::threshold_n;
use crate::ode::{integrate, Tolerance};
use crate::series::{linear_power, Key, SeriesData, TaylorFourierSeries};

/// H(y, x) = |y|²/2 + ε f(x).
#[derive(Clone, Debug)]
pub struct NaturalHam {
    pub n: usize,
    pub epsilon: f64,
    pub f: TrigPoly,
}

impl NaturalHam {
    pub fn new(epsilon: f64, f: TrigPoly) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        Ok(NaturalHam { n: f.n(), epsilon, f })
    }

    pub fn value(&self, y: &[f64], x: &[f64]) -> f64 {
        0.5 * y.iter().map(|v| v * v).sum::<f64>() + self.epsilon * self.f.evaluate_real(x)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NfKind {
    Nonresonant,
    Resonant { k: ModeVector },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorEntry {
    pub step: usize,
    pub mode: Vec<i64>,
    pub divisor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingOptions {
    /// Number of Lie steps.
    pub order: usize,
    /// Taylor degree in η = y − y0.
    pub degree: u32,
    /// Orders tracked beyond `order` to measure the remainder.
    pub extra_orders: usize,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            order: 2,
            degree: 2,
            extra_orders: 2,
        }
    }
}

/// Graded normal form H = h + Σ_p ε^p P_p with h = |y|²/2 kept exact.
#[derive(Clone, Debug)]
pub struct AveragedNF {
    pub kind: NfKind,
    pub epsilon: f64,
    pub base: Vec<f64>,
    pub order: usize,
    pub options: AveragingOptions,
    pub k0: u32,
    pub k_cut: u32,
    pub alpha: f64,
    /// Action radius of the domain (r_o, or r_k in the resonant case).
    pub radius: f64,
    pub divisor_log: Vec<DivisorEntry>,
    orders: Vec<TaylorFourierSeries>,
    generators: Vec<TaylorFourierSeries>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NfData {
    pub kind: NfKind,
    pub epsilon: f64,
    pub base_point: Vec<f64>,
    pub order: usize,
    pub degree: u32,
    pub k0: u32,
    pub k_cut: u32,
    pub alpha: f64,
    pub schedule: String,
    pub dropped_mass: f64,
    pub divisor_log: Vec<DivisorEntry>,
    pub g_o: SeriesData,
    pub g_res: SeriesData,
    pub f_rem: SeriesData,
    pub residual: SeriesData,
    pub generators: Vec<SeriesData>,
}

pub const SCHEDULE_NOTE: &str =
    "iterated homological steps, one per order in epsilon; Taylor and Fourier truncation applied after every bracket";

impl AveragedNF {
    /// Order-zero normal form: the Hamiltonian itself as a graded series.
    pub fn start(
        ham: &NaturalHam,
        kind: NfKind,
        params: &CoveringParams,
        y0: &[f64],
        options: AveragingOptions,
    ) -> Result<Self> {
        if y0.len() != ham.n || params.n != ham.n {
            return Err(Error::InvalidInput(
                "dimension mismatch between H, parameters and base point".into(),
            ));
        }
        if options.order == 0 {
            return Err(Error::InvalidInput("order must be at least 1".into()));
        }
        if let NfKind::Resonant { k } = &kind {
            if !k.is_generator() || k.dim() != ham.n {
                return Err(Error::NotAGenerator(k.0.clone()));
            }
        }
        let radius = match &kind {
            NfKind::Nonresonant => params.r_o,
            NfKind::Resonant { k } => params.r_k(k),
        };
        let pmax = options.order + options.extra_orders.max(1);
        let first = TaylorFourierSeries::from_trig_poly(&ham.f, y0.to_vec(), options.degree, params.k_cut)?;
        let mut orders = vec![first.empty_like(); pmax];
        orders[0] = first;
        Ok(AveragedNF {
            kind,
            epsilon: ham.epsilon,
            base: y0.to_vec(),
            order: 0,
            options,
            k0: params.k0,
            k_cut: params.k_cut,
            alpha: params.alpha,
            radius,
            divisor_log: Vec::new(),
            orders,
            generators: Vec::new(),
        })
    }

    pub fn pmax(&self) -> usize {
        self.orders.len()
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    /// Modes removed by the homological steps.
    pub fn in_band(&self, mode: &[i64]) -> bool {
        let l1: i64 = mode.iter().map(|v| v.abs()).sum();
        match &self.kind {
            NfKind::Nonresonant => l1 > 0 && l1 <= self.k0 as i64,
            NfKind::Resonant { k } => {
                l1 > 0 && l1 <= self.k_cut as i64 && ModeVector(mode.to_vec()).multiple_of(k).is_none()
            }
        }
    }

    /// Modes kept in the normal form (mean, and the resonant lattice).
    pub fn is_normal(&self, mode: &[i64]) -> bool {
        if mode.iter().all(|&v| v == 0) {
            return true;
        }
        match &self.kind {
            NfKind::Nonresonant => false,
            NfKind::Resonant { k } => ModeVector(mode.to_vec()).multiple_of(k).is_some(),
        }
    }

    fn divisor_threshold(&self) -> f64 {
        match &self.kind {
            NfKind::Nonresonant => self.alpha / 2.0,
            NfKind::Resonant { k } => 2.0 * self.alpha * self.k_cut as f64 / k.norm2(),
        }
    }

    /// One homological step, removing the band at the next order.
    pub fn lie_step(&mut self) -> Result<()> {
        let j = self.order + 1;
        if j > self.options.order {
            return Err(Error::InvalidInput(format!(
                "requested order {} already reached",
                self.options.order
            )));
        }
        let n = self.n();
        let band = self.orders[j - 1].filter(|m| self.in_band(m));
        let threshold = self.divisor_threshold();
        let strict = matches!(self.kind, NfKind::Nonresonant);
        let mut chi = band.empty_like();
        let mut logged = std::collections::BTreeSet::new();
        let i = Complex64::new(0.0, 1.0);
        for (key, c) in band.terms() {
            let mode = ModeVector(key.mode(n));
            let omega = mode.dot(&self.base);
            let ok = if strict {
                omega.abs() > threshold
            } else {
                omega.abs() >= threshold
            };
            if !ok || omega == 0.0 {
                return Err(Error::ResonantAtBasePoint {
                    mode: mode.0.clone(),
                    divisor: omega.abs(),
                    threshold,
                });
            }
            if logged.insert(mode.0.clone()) {
                self.divisor_log.push(DivisorEntry {
                    step: j,
                    mode: mode.0.clone(),
                    divisor: omega.abs(),
                });
            }
            let a = key.multi_index(n);
            let deg: u32 = a.iter().sum();
            let minus_k: Vec<f64> = mode.0.iter().map(|&v| -(v as f64)).collect();
            for m in 0..=(self.options.degree - deg) {
                let scale = -i * c / omega.powi(m as i32 + 1);
                for (b, coef) in linear_power(&minus_k, m) {
                    let alpha: Vec<u32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                    chi.add_term(Key::new(&mode.0, &alpha), scale * coef);
                }
            }
        }
        let pmax = self.pmax();
        let mut next = self.orders.clone();
        next[j - 1].remove_modes(|m| self.in_band(m));
        if !chi.is_empty() {
            for p in 1..=pmax {
                let mut t = self.orders[p - 1].clone();
                let (mut ord, mut m) = (p, 1.0);
                while ord + j <= pmax && !t.is_empty() {
                    t = t.bracket(&chi).scaled(1.0 / m);
                    ord += j;
                    next[ord - 1].add_assign(&t);
                    m += 1.0;
                }
            }
            let mut w = band.scaled(-1.0);
            let (mut ord, mut m) = (j, 2.0);
            while ord + j <= pmax && !w.is_empty() {
                w = w.bracket(&chi).scaled(1.0 / m);
                ord += j;
                next[ord - 1].add_assign(&w);
                m += 1.0;
            }
        }
        self.orders = next;
        self.generators.push(chi);
        self.order = j;
        Ok(())
    }

    /// Graded piece P_p (p ≥ 1).
    pub fn order_series(&self, p: usize) -> &TaylorFourierSeries {
        &self.orders[p - 1]
    }

    /// Generator of step j (j ≥ 1); the step's Lie flow uses ε^j times it.
    pub fn generator(&self, j: usize) -> &TaylorFourierSeries {
        &self.generators[j - 1]
    }

    fn weighted<F: Fn(usize, &[i64]) -> bool>(&self, keep: F) -> TaylorFourierSeries {
        let mut out = self.orders[0].empty_like();
        for (idx, series) in self.orders.iter().enumerate() {
            let p = idx + 1;
            out.add_scaled(&series.filter(|m| keep(p, m)), self.epsilon.powi(idx as i32));
        }
        out
    }

    /// y-only part through the current order, ε-weighted as in H = h + ε(g_o + …).
    pub fn g_o(&self) -> TaylorFourierSeries {
        self.weighted(|p, m| p <= self.order && m.iter().all(|&v| v == 0))
    }

    /// Resonant-lattice part (zero for the non-resonant kind).
    pub fn g_res(&self) -> TaylorFourierSeries {
        self.weighted(|p, m| p <= self.order && !m.iter().all(|&v| v == 0) && self.is_normal(m))
    }

    /// Non-normal part through the current order.
    pub fn f_rem(&self) -> TaylorFourierSeries {
        self.weighted(|p, m| p <= self.order && !self.is_normal(m))
    }

    /// Everything beyond the current order.
    pub fn residual(&self) -> TaylorFourierSeries {
        self.weighted(|p, _| p > self.order)
    }

    /// Non-normal part at every tracked order.
    pub fn remainder(&self) -> TaylorFourierSeries {
        self.weighted(|_, m| !self.is_normal(m))
    }

    /// Part of the residual still inside the band.
    pub fn band_residual(&self) -> TaylorFourierSeries {
        self.weighted(|p, m| p > self.order && self.in_band(m))
    }

    /// Size of the unremoved band in H (includes the overall factor ε).
    pub fn band_remainder_norm(&self, r: f64, s: f64) -> f64 {
        self.epsilon * self.band_residual().majorant(r, s)
    }

    /// Truncated coefficient mass, ε-weighted like the accessors.
    pub fn dropped_mass(&self) -> f64 {
        self.orders
            .iter()
            .enumerate()
            .map(|(idx, s)| self.epsilon.powi(idx as i32) * s.dropped_mass())
            .sum()
    }

    fn kinetic(&self, y: &[f64]) -> f64 {
        0.5 * y.iter().map(|v| v * v).sum::<f64>()
    }

    /// h(y) + Σ_{p ≤ order} ε^p P_p(y − y0, x), or the full tracked series.
    pub fn nf_value(&self, y: &[f64], x: &[f64], include_residual: bool) -> f64 {
        let eta: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let top = if include_residual { self.pmax() } else { self.order };
        let mut v = self.kinetic(y);
        for p in 1..=top {
            v += self.epsilon.powi(p as i32) * self.orders[p - 1].evaluate(&eta, x);
        }
        v
    }

    /// Ψ(y, x): time-one flows of ε^j χ_j, applied from the last step to the first.
    pub fn transform(&self, y: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let mut state: Vec<f64> = y.iter().chain(x.iter()).copied().collect();
        for j in (1..=self.order).rev() {
            let chi = &self.generators[j - 1];
            if chi.is_empty() {
                continue;
            }
            let weight = self.epsilon.powi(j as i32);
            let base = &self.base;
            let rhs = |_: f64, u: &[f64]| {
                let eta: Vec<f64> = (0..n).map(|i| u[i] - base[i]).collect();
                let (d_eta, d_x) = chi.gradient(&eta, &u[n..]);
                let mut du = vec![0.0; 2 * n];
                for i in 0..n {
                    du[i] = -weight * d_x[i];
                    du[n + i] = weight * d_eta[i];
                }
                du
            };
            state = integrate(rhs, &state, 0.0, 1.0, Tolerance::default())?.state;
        }
        Ok((state[..n].to_vec(), state[n..].to_vec()))
    }

    pub fn to_data(&self) -> NfData {
        NfData {
            kind: self.kind.clone(),
            epsilon: self.epsilon,
            base_point: self.base.clone(),
            order: self.order,
            degree: self.options.degree,
            k0: self.k0,
            k_cut: self.k_cut,
            alpha: self.alpha,
            schedule: SCHEDULE_NOTE.to_string(),
            dropped_mass: self.dropped_mass(),
            divisor_log: self.divisor_log.clone(),
            g_o: self.g_o().to_data(),
            g_res: self.g_res().to_data(),
            f_rem: self.f_rem().to_data(),
            residual: self.residual().to_data(),
            generators: self.generators.iter().map(|g| g.to_data()).collect(),
        }
    }
}

fn run_steps(mut nf: AveragedNF) -> Result<AveragedNF> {
    while nf.order < nf.options.order {
        nf.lie_step()?;
    }
    Ok(nf)
}

/// Non-resonant normal form at y0, removing 0 < |k|₁ ≤ K0.
pub fn lie_step_nonres(
    ham: &NaturalHam,
    params: &CoveringParams,
    y0: &[f64],
    options: AveragingOptions,
) -> Result<AveragedNF> {
    run_steps(AveragedNF::start(ham, NfKind::Nonresonant, params, y0, options)?)
}

/// Resonant normal form at y0, removing modes outside Zk with |ℓ|₁ ≤ K.
pub fn lie_step_res(
    ham: &NaturalHam,
    k: &ModeVector,
    params: &CoveringParams,
    y0: &[f64],
    options: AveragingOptions,
) -> Result<AveragedNF> {
    run_steps(AveragedNF::start(
        ham,
        NfKind::Resonant { k: k.clone() },
        params,
        y0,
        options,
    )?)
}

/// Majorant norm of the non-normal part.
pub fn nf_remainder_norm(nf: &AveragedNF, r: f64, s: f64) -> f64 {
    nf.remainder().majorant(r, s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub points: usize,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub max_displacement: f64,
    pub displacement_threshold: f64,
    pub displacement_ok: bool,
    pub formal_order: usize,
}

/// max |H(Ψ(y,x)) − nf_value(y,x)| over the points.
pub fn verify_conjugacy(
    ham: &NaturalHam,
    nf: &AveragedNF,
    points: &[(Vec<f64>, Vec<f64>)],
    include_residual: bool,
) -> Result<ConjugacyReport> {
    let results: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|(y, x)| {
            let (ty, tx) = nf.transform(y, x)?;
            let residual = (ham.value(&ty, &tx) - nf.nf_value(y, x, include_residual)).abs();
            let disp = ty.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            Ok((residual, disp))
        })
        .collect();
    let mut residuals = Vec::with_capacity(points.len());
    let mut max_displacement = 0.0f64;
    for r in results {
        let (res, disp) = r?;
        residuals.push(res);
        max_displacement = max_displacement.max(disp);
    }
    let displacement_threshold = match &nf.kind {
        NfKind::Nonresonant => nf.radius / (128.0 * nf.k0 as f64),
        NfKind::Resonant { .. } => nf.radius / (128.0 * nf.k_cut as f64),
    };
    Ok(ConjugacyReport {
        points: points.len(),
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        max_displacement,
        displacement_threshold,
        displacement_ok: max_displacement <= displacement_threshold,
        formal_order: nf.order + 1,
    })
}

/// 2|f_k|[cos(θ + θ_k) + F*(θ) + g*(y, θ) + f*(y, x)] decomposition of the resonant part.
#[derive(Clone, Debug)]
pub struct CosineForm {
    pub k: ModeVector,
    pub theta_k: f64,
    pub amplitude: f64,
    pub f_star: OneDTrigPoly,
    pub f_star_norm: f64,
    pub g_star: TaylorFourierSeries,
    pub g_star_norm: f64,
    pub rem_star: TaylorFourierSeries,
    pub rem_star_norm: f64,
    pub theta_threshold: f64,
    pub exp_threshold: f64,
    pub morse_threshold: f64,
    pub above_morse_threshold: bool,
    pub f_star_ok: bool,
    pub g_star_ok: bool,
    pub rem_star_ok: bool,
    pub identity_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CosineSummary {
    pub k: Vec<i64>,
    pub theta_k: f64,
    pub amplitude: f64,
    pub f_star_norm: f64,
    pub g_star_norm: f64,
    pub rem_star_norm: f64,
    pub theta_threshold: f64,
    pub exp_threshold: f64,
    pub above_morse_threshold: bool,
    pub f_star_ok: bool,
    pub g_star_ok: bool,
    pub rem_star_ok: bool,
    pub identity_residual: f64,
}

impl CosineForm {
    pub fn summary(&self) -> CosineSummary {
        CosineSummary {
            k: self.k.0.clone(),
            theta_k: self.theta_k,
            amplitude: self.amplitude,
            f_star_norm: self.f_star_norm,
            g_star_norm: self.g_star_norm,
            rem_star_norm: self.rem_star_norm,
            theta_threshold: self.theta_threshold,
            exp_threshold: self.exp_threshold,
            above_morse_threshold: self.above_morse_threshold,
            f_star_ok: self.f_star_ok,
            g_star_ok: self.g_star_ok,
            rem_star_ok: self.rem_star_ok,
            identity_residual: self.identity_residual,
        }
    }
}

/// Separates the leading cosine of π_k f and rescales the resonant normal form by 2|f_k|.
pub fn cosine_rescale(nf: &AveragedNF, f: &TrigPoly, delta: f64, params: &CoveringParams) -> Result<CosineForm> {
    let k = match &nf.kind {
        NfKind::Resonant { k } => k.clone(),
        NfKind::Nonresonant => {
            return Err(Error::InvalidInput(
                "cosine rescaling needs a resonant normal form".into(),
            ))
        }
    };
    let f_k = f.coeff(&k);
    if f_k.norm() == 0.0 {
        return Err(Error::VanishingLeadingMode(k.0.clone()));
    }
    let amplitude = 2.0 * f_k.norm();
    let theta_k = f_k.arg().rem_euclid(2.0 * std::f64::consts::PI);
    let pik = f.project_lattice(&k)?;
    let f_star =
        OneDTrigPoly::from_pairs(pik.modes().filter(|(j, _)| **j >= 2).map(|(j, c)| (*j, *c))).scaled(1.0 / amplitude);
    let pik_series = TaylorFourierSeries::from_trig_poly(f, nf.base.clone(), nf.options.degree, nf.k_cut)?
        .filter(|m| !m.iter().all(|&v| v == 0) && ModeVector(m.to_vec()).multiple_of(&k).is_some());
    let mut g_star = nf.g_res();
    g_star.add_scaled(&pik_series, -1.0);
    let g_star = g_star.scaled(1.0 / amplitude);
    let rem_star = nf.remainder().scaled(1.0 / amplitude);
    let n = params.n;
    let l1 = k.l1() as f64;
    let r_prime = params.r_k_prime(&k);
    let g_star_norm = g_star.majorant(r_prime, 1.0 / l1);
    let rem_star_norm = rem_star.majorant(r_prime, params.s_star / 2.0);
    let f_star_norm = f_star.majorant(1.0);
    let theta_threshold = (params.k_cut as f64).powi(-5 * n as i32);
    let exp_threshold = (-(params.k_cut as f64) * params.s / 7.0).exp();
    let morse_threshold = threshold_n(n, params.s, delta);

    let zero_eta = vec![0.0; n];
    let mut identity_residual = 0.0f64;
    for idx in 0..64 {
        let x: Vec<f64> = (0..n).map(|i| 0.37 * (idx as f64 + 1.0) * (i as f64 + 1.3)).collect();
        let theta = k.dot(&x);
        let lhs = nf.g_res().evaluate(&zero_eta, &x) + nf.remainder().evaluate(&zero_eta, &x);
        let rhs = amplitude
            * ((theta + theta_k).cos()
                + f_star.eval(theta)
                + g_star.evaluate(&zero_eta, &x)
                + rem_star.evaluate(&zero_eta, &x));
        identity_residual = identity_residual.max((lhs - rhs).abs());
    }
    Ok(CosineForm {
        k,
        theta_k,
        amplitude,
        f_star_ok: f_star_norm <= 2f64.powi(-40),
        g_star_ok: g_star_norm <= theta_threshold,
        rem_star_ok: rem_star_norm <= exp_threshold,
        above_morse_threshold: l1 >= morse_threshold,
        f_star,
        f_star_norm,
        g_star,
        g_star_norm,
        rem_star,
        rem_star_norm,
        theta_threshold,
        exp_threshold,
        morse_threshold,
        identity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::free_params;
    use approx::assert_relative_eq;

    fn cosine(n: usize, modes: &[(&[i64], f64)]) -> TrigPoly {
        TrigPoly::from_modes(
            n,
            modes
                .iter()
                .map(|(k, a)| (ModeVector(k.to_vec()), Complex64::new(a / 2.0, 0.0))),
        )
        .unwrap()
    }

    #[test]
    fn single_mode_first_step_matches_hand_generator() {
        let f = cosine(2, &[(&[1, 0], 1.0)]);
        let ham = NaturalHam::new(1e-3, f).unwrap();
        let params = free_params(2, 1.0, 0.05, 3, 12).unwrap();
        let y0 = [0.7, 0.31];
        let opts = AveragingOptions {
            order: 1,
            degree: 2,
            extra_orders: 2,
        };
        let nf = lie_step_nonres(&ham, &params, &y0, opts).unwrap();
        // χ = sin(x1)/(y·k) at η = 0
        let chi = nf.generator(1);
        for x1 in [0.1, 1.2, 2.9] {
            assert_relative_eq!(chi.evaluate(&[0.0, 0.0], &[x1, 0.4]), x1.sin() / 0.7, epsilon = 1e-14);
        }
        assert!(nf.f_rem().is_empty());
        assert!(nf
            .order_series(2)
            .modes()
            .iter()
            .all(|m| m == &vec![0, 0] || m == &vec![2, 0] || m == &vec![-2, 0]));
        assert!(!nf.order_series(2).filter(|m| m == [0, 0]).is_empty());
        assert_eq!(nf.divisor_log.len(), 2);
    }

    #[test]
    fn out_of_band_modes_are_untouched() {
        let f = cosine(2, &[(&[3, 2], 1.0)]);
        let ham = NaturalHam::new(1e-2, f.clone()).unwrap();
        let params = free_params(2, 1.0, 0.05, 3, 12).unwrap();
        let nf = lie_step_nonres(&ham, &params, &[0.7, 0.31], AveragingOptions::default()).unwrap();
        assert!(nf.g_o().is_empty());
        let expected = TaylorFourierSeries::from_trig_poly(&f, vec![0.7, 0.31], 2, 12).unwrap();
        assert_eq!(nf.f_rem(), expected);
    }

    #[test]
    fn resonant_divisor_error_carries_witness() {
        let f = cosine(2, &[(&[1, 1], 1.0)]);
        let ham = NaturalHam::new(1e-3, f).unwrap();
        let params = free_params(2, 1.0, 0.05, 3, 12).unwrap();
        let err = lie_step_nonres(&ham, &params, &[0.3, -0.29], AveragingOptions::default()).unwrap_err();
        match err {
            Error::ResonantAtBasePoint { mode, .. } => assert_eq!(mode.iter().map(|v| v.abs()).sum::<i64>(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resonant_order_one_keeps_lattice_part() {
        let f = cosine(2, &[(&[1, 0], 1.0), (&[2, 0], 0.25), (&[1, 1], 0.5)]);
        let ham = NaturalHam::new(1e-4, f.clone()).unwrap();
        let params = free_params(2, 1.0, 0.01, 3, 12).unwrap();
        let k = ModeVector(vec![1, 0]);
        let opts = AveragingOptions {
            order: 1,
            degree: 2,
            extra_orders: 2,
        };
        let nf = lie_step_res(&ham, &k, &params, &[0.0, 0.6], opts).unwrap();
        let pik = TaylorFourierSeries::from_trig_poly(&f, vec![0.0, 0.6], 2, 12)
            .unwrap()
            .filter(|m| m[1] == 0);
        assert_eq!(nf.g_res(), pik);
        assert!(nf.f_rem().is_empty());
        let form = cosine_rescale(&nf, &f, 1.0, &params).unwrap();
        assert!(form.g_star.is_empty());
        assert_relative_eq!(form.f_star_norm, 0.25 * 2f64.exp(), epsilon = 1e-14);
        assert!(form.identity_residual < 1e-14);
    }

    #[test]
    fn conjugacy_residual_is_second_order() {
        let f = cosine(2, &[(&[1, 0], 1.0), (&[1, 1], 0.5)]);
        let params = free_params(2, 1.0, 0.05, 3, 12).unwrap();
        let y0 = [0.7, 0.31];
        let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
            .map(|i| (y0.to_vec(), vec![0.9 * i as f64, 0.5 + 0.4 * i as f64]))
            .collect();
        let mut res = Vec::new();
        for eps in [1e-3, 5e-4] {
            let ham = NaturalHam::new(eps, f.clone()).unwrap();
            let nf = lie_step_nonres(
                &ham,
                &params,
                &y0,
                AveragingOptions {
                    order: 1,
                    degree: 2,
                    extra_orders: 2,
                },
            )
            .unwrap();
            res.push(verify_conjugacy(&ham, &nf, &pts, false).unwrap().max_residual);
        }
        let ratio = res[0] / res[1];
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }
}
