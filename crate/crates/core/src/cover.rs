//! Covering of the unit ball of actions by non-resonant, simply resonant and
//! doubly resonant regions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{generators, ModeVector};
use crate::genericity::{trial_rng, wilson_interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamMode {
    Derived,
    Free,
}

/// How |k| ≤ K0 is read in the non-resonance certificate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffNorm {
    #[default]
    L1,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringParams {
    pub n: usize,
    pub s: f64,
    pub k_cut: u32,
    pub k0: u32,
    pub epsilon: Option<f64>,
    pub nu: f64,
    pub alpha: f64,
    pub r_o: f64,
    pub r_o_prime: f64,
    pub s_o: f64,
    pub s_o_prime: f64,
    pub s_star: f64,
    pub s_star_prime: f64,
    pub mode: ParamMode,
    #[serde(default)]
    pub cutoff_norm: CutoffNorm,
    /// Hypotheses that fail or warn for this parameter set.
    pub flags: Vec<String>,
}

impl CoveringParams {
    fn build(n: usize, s: f64, epsilon: Option<f64>, alpha: f64, k0: u32, k_cut: u32, mode: ParamMode) -> Self {
        let nu = 4.5 * n as f64 + 2.0;
        let r_o = alpha / (16.0 * k0 as f64);
        let s_o = s * (1.0 - 1.0 / k0 as f64);
        let s_star = s * (1.0 - 1.0 / k_cut as f64);
        let mut flags = Vec::new();
        if !(k_cut >= 6 * k0 && 6 * k0 >= 12) {
            flags.push(format!("cutoff ordering K >= 6 K0 >= 12 fails (K0={k0}, K={k_cut})"));
        }
        if !(alpha < 1.0) || !alpha.is_finite() {
            flags.push(format!(
                "alpha = {alpha:e} is not below the unit action scale; regime unreachable"
            ));
        }
        CoveringParams {
            n,
            s,
            k_cut,
            k0,
            epsilon,
            nu,
            alpha,
            r_o,
            r_o_prime: r_o / 2.0,
            s_o,
            s_o_prime: s_o * (1.0 - 1.0 / k0 as f64),
            s_star,
            s_star_prime: s_star * (1.0 - 1.0 / k_cut as f64),
            mode,
            cutoff_norm: CutoffNorm::L1,
            flags,
        }
    }

    pub fn with_cutoff_norm(mut self, norm: CutoffNorm) -> Self {
        self.cutoff_norm = norm;
        self
    }

    /// r_k = α/|k|.
    pub fn r_k(&self, k: &ModeVector) -> f64 {
        self.alpha / k.norm2()
    }

    pub fn r_k_prime(&self, k: &ModeVector) -> f64 {
        self.r_k(k) / 2.0
    }

    /// s'_k = |k|_1 s_*'.
    pub fn s_k_prime(&self, k: &ModeVector) -> f64 {
        k.l1() as f64 * self.s_star_prime
    }

    pub fn reachable(&self) -> bool {
        self.alpha < 1.0 && self.alpha.is_finite()
    }
}

fn validate_basic(n: usize, s: f64, k0: u32, k_cut: u32) -> Result<()> {
    if n < 2 || !(s > 0.0) || k0 < 1 || k_cut < k0 {
        return Err(Error::InvalidInput(format!(
            "covering parameters out of range: n={n}, s={s}, K0={k0}, K={k_cut}"
        )));
    }
    Ok(())
}

/// Derived parameters: α = √ε K^ν with ν = 9n/2 + 2.
pub fn derive_params(n: usize, s: f64, epsilon: f64, k0: u32, k_cut: u32) -> Result<CoveringParams> {
    validate_basic(n, s, k0, k_cut)?;
    if !(k_cut >= 6 * k0 && 6 * k0 >= 12) {
        return Err(Error::CutoffOrdering(format!(
            "need K >= 6 K0 >= 12, got K0={k0}, K={k_cut}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let nu = 4.5 * n as f64 + 2.0;
    let alpha = epsilon.sqrt() * (k_cut as f64).powf(nu);
    Ok(CoveringParams::build(
        n,
        s,
        Some(epsilon),
        alpha,
        k0,
        k_cut,
        ParamMode::Derived,
    ))
}

/// Free parameters: α, K0 and K are independent knobs.
pub fn free_params(n: usize, s: f64, alpha: f64, k0: u32, k_cut: u32) -> Result<CoveringParams> {
    validate_basic(n, s, k0, k_cut)?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be non-negative, got {alpha}")));
    }
    Ok(CoveringParams::build(n, s, None, alpha, k0, k_cut, ParamMode::Free))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    R0,
    R1,
    R2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub kind: RegionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<ModeVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<ModeVector>,
}

/// Generator tables and divisor thresholds shared by every query.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub params: CoveringParams,
    low: Vec<ModeVector>,
    low_f: Vec<Vec<f64>>,
    high: Vec<ModeVector>,
    high_f: Vec<Vec<f64>>,
    /// For each low generator, its position in `high`.
    low_in_high: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegionSummary {
    pub r0: bool,
    pub r1: bool,
    pub r2_any: bool,
}

impl RegionSummary {
    /// Outside R⁰ ∪ R¹.
    pub fn r2_only(&self) -> bool {
        !self.r0 && !self.r1
    }

    pub fn code(&self) -> u8 {
        self.r0 as u8 | (self.r1 as u8) << 1 | (self.r2_any as u8) << 2
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Classifier {
    pub fn new(params: &CoveringParams) -> Self {
        let low = generators(params.n, params.k0 as f64);
        let high = generators(params.n, params.k_cut as f64);
        let low_in_high = low
            .iter()
            .map(|k| high.iter().position(|l| l == k).expect("G_K0 ⊆ G_K"))
            .collect();
        Classifier {
            params: params.clone(),
            low_f: low.iter().map(|k| k.to_f64()).collect(),
            high_f: high.iter().map(|k| k.to_f64()).collect(),
            low,
            high,
            low_in_high,
        }
    }

    fn check_ball(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.params.n {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, expected {}",
                y.len(),
                self.params.n
            )));
        }
        let r = norm(y);
        if r >= 1.0 {
            return Err(Error::OutsideUnitBall(r));
        }
        Ok(())
    }

    /// Products y·ℓ over G_K, reused by every k.
    fn products(&self, y: &[f64]) -> Vec<f64> {
        self.high_f.iter().map(|l| dot(y, l)).collect()
    }

    fn perp_product(&self, yl: f64, yk: f64, k_idx: usize, l_idx: usize) -> f64 {
        let kf = &self.low_f[k_idx];
        let kl = dot(kf, &self.high_f[l_idx]);
        yl - yk * kl / dot(kf, kf)
    }

    fn walk<F: FnMut(usize, Option<usize>) -> bool>(&self, y: &[f64], mut visit: F) -> RegionSummary {
        let alpha = self.params.alpha;
        let big_k = self.params.k_cut as f64;
        let prods = self.products(y);
        let mut summary = RegionSummary {
            r0: self.low_in_high.iter().all(|&i| prods[i].abs() > alpha / 2.0),
            ..Default::default()
        };
        for (ki, &hi) in self.low_in_high.iter().enumerate() {
            let yk = prods[hi];
            if !(yk.abs() < alpha) {
                continue;
            }
            let threshold = 3.0 * alpha * big_k / self.low_f[ki].iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut resonant_partner = false;
            for (li, &yl) in prods.iter().enumerate() {
                if li == hi {
                    continue;
                }
                if self.perp_product(yl, yk, ki, li).abs() <= threshold {
                    resonant_partner = true;
                    summary.r2_any = true;
                    if !visit(ki, Some(li)) {
                        return summary;
                    }
                }
            }
            if !resonant_partner {
                summary.r1 = true;
                if !visit(ki, None) {
                    return summary;
                }
            }
        }
        summary
    }

    /// Every label whose defining inequalities hold at y.
    pub fn classify(&self, y: &[f64]) -> Result<Vec<RegionLabel>> {
        self.check_ball(y)?;
        let mut labels = Vec::new();
        let summary = self.walk(y, |ki, li| {
            labels.push(match li {
                None => RegionLabel {
                    kind: RegionKind::R1,
                    k: Some(self.low[ki].clone()),
                    l: None,
                },
                Some(li) => RegionLabel {
                    kind: RegionKind::R2,
                    k: Some(self.low[ki].clone()),
                    l: Some(self.high[li].clone()),
                },
            });
            true
        });
        if summary.r0 {
            labels.insert(
                0,
                RegionLabel {
                    kind: RegionKind::R0,
                    k: None,
                    l: None,
                },
            );
        }
        Ok(labels)
    }

    /// Membership flags without materializing labels.
    pub fn summary(&self, y: &[f64]) -> RegionSummary {
        self.walk(y, |_, _| true)
    }

    pub fn low_generators(&self) -> &[ModeVector] {
        &self.low
    }

    pub fn high_generators(&self) -> &[ModeVector] {
        &self.high
    }
}

pub fn classify_point(y: &[f64], params: &CoveringParams) -> Result<Vec<RegionLabel>> {
    Classifier::new(params).classify(y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CertificateRequest {
    R0,
    R1 { k: ModeVector },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonResonanceCertificate {
    pub request: CertificateRequest,
    pub minimizer: ModeVector,
    pub min_divisor: f64,
    pub required: f64,
    pub modes_checked: usize,
    pub cutoff_norm: CutoffNorm,
}

/// Lower bound on |y·k| over all integer modes in the relevant band, by reduction
/// to generators.
pub fn nonresonance_certificate(
    y: &[f64],
    params: &CoveringParams,
    request: &CertificateRequest,
) -> Result<NonResonanceCertificate> {
    let (candidates, required) = match request {
        CertificateRequest::R0 => {
            let gens = match params.cutoff_norm {
                CutoffNorm::L1 => generators(params.n, params.k0 as f64),
                CutoffNorm::Euclidean => {
                    let reach = params.k0 as f64 * (params.n as f64).sqrt();
                    generators(params.n, reach.floor())
                        .into_iter()
                        .filter(|k| k.norm2() <= params.k0 as f64 + 1e-12)
                        .collect()
                }
            };
            (gens, params.alpha / 2.0)
        }
        CertificateRequest::R1 { k } => {
            if !k.is_generator() || k.dim() != params.n {
                return Err(Error::NotAGenerator(k.0.clone()));
            }
            let gens: Vec<ModeVector> = generators(params.n, params.k_cut as f64)
                .into_iter()
                .filter(|l| l != k)
                .collect();
            (gens, 2.0 * params.alpha * params.k_cut as f64 / k.norm2())
        }
    };
    let (minimizer, min_divisor) = candidates
        .iter()
        .map(|k| (k, k.dot(y).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidInput("empty mode band".into()))?;
    let passes = match request {
        CertificateRequest::R0 => min_divisor > required,
        CertificateRequest::R1 { .. } => min_divisor >= required,
    };
    if !passes {
        return Err(Error::CertificateFails {
            mode: minimizer.0.clone(),
            value: min_divisor,
            required,
        });
    }
    Ok(NonResonanceCertificate {
        request: request.clone(),
        minimizer: minimizer.clone(),
        min_divisor,
        required,
        modes_checked: candidates.len(),
        cutoff_norm: params.cutoff_norm,
    })
}

/// (Π_k y, Π_k^⊥ y).
pub fn projections(y: &[f64], k: &ModeVector) -> Result<(Vec<f64>, Vec<f64>)> {
    if k.is_zero() || k.dim() != y.len() {
        return Err(Error::InvalidInput(
            "projection needs a nonzero mode of matching dimension".into(),
        ));
    }
    let kf = k.to_f64();
    let c = dot(y, &kf) / dot(&kf, &kf);
    let par: Vec<f64> = kf.iter().map(|v| c * v).collect();
    let perp = y.iter().zip(&par).map(|(a, b)| a - b).collect();
    Ok((par, perp))
}

pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Uniform point of the open unit ball.
pub fn sample_ball<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = norm(&g);
        let radius = rng.gen::<f64>().powf(1.0 / n as f64);
        if len > 0.0 && radius < 1.0 {
            return g.iter().map(|v| v / len * radius).collect();
        }
    }
}

pub const SAMPLE_CHUNK: usize = 8192;

/// Deterministic ball samples with index in [start, start+count); chunk c draws from stream c.
pub fn ball_samples(n: usize, samples: usize, seed: u64) -> impl ParallelIterator<Item = (usize, Vec<f64>)> {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    (0..chunks).into_par_iter().flat_map_iter(move |c| {
        let mut rng = trial_rng(seed, c as u64);
        let lo = c * SAMPLE_CHUNK;
        let hi = (lo + SAMPLE_CHUNK).min(samples);
        (lo..hi).map(move |i| (i, sample_ball(n, &mut rng))).collect::<Vec<_>>()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2Measure {
    pub samples: usize,
    pub seed: u64,
    pub ball_volume: f64,
    pub uncovered: usize,
    /// Points outside R⁰ ∪ R¹.
    pub r2_only_count: usize,
    pub r2_only_estimate: f64,
    pub r2_only_ci: (f64, f64),
    /// Points carrying at least one R² label.
    pub r2_any_count: usize,
    pub r2_any_estimate: f64,
    pub r2_any_ci: (f64, f64),
    /// α² K^{2n}.
    pub scale: f64,
    /// estimate / (α² K^{2n}).
    pub empirical_constant: f64,
    /// Counting constant from the strip-area argument.
    pub chain_constant: f64,
    pub bound: f64,
}

/// 3·2^n K (|G_K| − 1) Σ_{k ∈ G_K0} 1/|k| / K^{2n}.
pub fn chain_constant(params: &CoveringParams) -> f64 {
    let high = generators(params.n, params.k_cut as f64).len() as f64;
    let inv_sum: f64 = generators(params.n, params.k0 as f64)
        .iter()
        .map(|k| 1.0 / k.norm2())
        .sum();
    let big_k = params.k_cut as f64;
    3.0 * 2f64.powi(params.n as i32) * big_k * (high - 1.0) * inv_sum / big_k.powi(2 * params.n as i32)
}

/// Monte-Carlo volume of the doubly resonant region.
pub fn measure_r2(params: &CoveringParams, samples: usize, seed: u64) -> Result<R2Measure> {
    if samples < 1000 {
        return Err(Error::InvalidInput(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    let classifier = Classifier::new(params);
    let (uncovered, only, any) = ball_samples(params.n, samples, seed)
        .map(|(_, y)| {
            let s = classifier.summary(&y);
            let covered = s.r0 || s.r1 || s.r2_any;
            (!covered as usize, s.r2_only() as usize, s.r2_any as usize)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let vol = unit_ball_volume(params.n);
    let est = |c: usize| vol * c as f64 / samples as f64;
    let ci = |c: usize| {
        let (lo, hi) = wilson_interval(c as u64, samples as u64);
        (vol * lo, vol * hi)
    };
    let scale = params.alpha.powi(2) * (params.k_cut as f64).powi(2 * params.n as i32);
    let chain = chain_constant(params);
    Ok(R2Measure {
        samples,
        seed,
        ball_volume: vol,
        uncovered,
        r2_only_count: only,
        r2_only_estimate: est(only),
        r2_only_ci: ci(only),
        r2_any_count: any,
        r2_any_estimate: est(any),
        r2_any_ci: ci(any),
        scale,
        empirical_constant: if scale > 0.0 { est(only) / scale } else { 0.0 },
        chain_constant: chain,
        bound: chain * scale,
    })
}

/// Region codes on a grid of [−1,1]² (bit 0: R⁰, bit 1: R¹, bit 2: R²; 255 outside the ball).
pub fn raster(params: &CoveringParams, resolution: usize) -> Result<Vec<(f64, f64, u8)>> {
    if params.n != 2 {
        return Err(Error::InvalidInput("raster export needs n = 2".into()));
    }
    let classifier = Classifier::new(params);
    let m = resolution.max(2);
    Ok((0..m * m)
        .into_par_iter()
        .map(|idx| {
            let y1 = -1.0 + 2.0 * (idx / m) as f64 / (m - 1) as f64;
            let y2 = -1.0 + 2.0 * (idx % m) as f64 / (m - 1) as f64;
            let code = if y1 * y1 + y2 * y2 < 1.0 {
                classifier.summary(&[y1, y2]).code()
            } else {
                255
            };
            (y1, y2, code)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preimage {
    pub y: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
    /// Largest observed ratio of consecutive step lengths.
    pub contraction: f64,
    /// Sampled sup of |φ(y) − y| over the complex ball of radius 2r.
    pub sampled_sup: f64,
}

fn c_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub const PREIMAGE_TOL: f64 = 1e-13;

/// Solves φ(y) = y0 for y in the closed ball B_r(y0), given sup_{D_2r(y0)} |φ(y) − y| ≤ M < r.
pub fn contraction_preimage<F>(phi: F, y0: &[f64], r: f64, m: f64) -> Result<Preimage>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    if !(m < r) || !(r > 0.0) {
        return Err(Error::HypothesisViolated(format!("need 0 <= M < r, got M={m}, r={r}")));
    }
    let n = y0.len();
    let base: Vec<Complex64> = y0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut rng = trial_rng(0x5eed, n as u64);
    let mut sampled_sup = 0.0f64;
    for _ in 0..256 {
        let dir = sample_ball(2 * n, &mut rng);
        let y: Vec<Complex64> = (0..n)
            .map(|i| base[i] + 2.0 * r * Complex64::new(dir[2 * i], dir[2 * i + 1]))
            .collect();
        let fy = phi(&y);
        let d: Vec<Complex64> = fy.iter().zip(&y).map(|(a, b)| a - b).collect();
        sampled_sup = sampled_sup.max(c_norm(&d));
    }
    if sampled_sup > m * (1.0 + 1e-12) {
        return Err(Error::HypothesisViolated(format!(
            "sampled sup |phi(y) - y| = {sampled_sup:e} exceeds M = {m:e}"
        )));
    }
    let psi0 = |w: &[Complex64]| -> Vec<Complex64> {
        let y: Vec<Complex64> = base.iter().zip(w).map(|(a, b)| a + b).collect();
        phi(&y).iter().zip(&y).map(|(a, b)| -(a - b)).collect()
    };
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut last_step = f64::INFINITY;
    let mut contraction = 0.0f64;
    for iterations in 0..10_000 {
        let y: Vec<Complex64> = base.iter().zip(&w).map(|(a, b)| a + b).collect();
        let fy = phi(&y);
        let residual = c_norm(&fy.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>());
        if residual < PREIMAGE_TOL {
            return Ok(Preimage {
                y,
                residual,
                iterations,
                contraction,
                sampled_sup,
            });
        }
        let next = psi0(&w);
        let step = c_norm(&next.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
        if last_step.is_finite() && last_step > 1e3 * f64::EPSILON * (1.0 + c_norm(&w)) {
            let ratio = step / last_step;
            contraction = contraction.max(ratio);
            if ratio >= 1.0 {
                return Err(Error::HypothesisViolated(format!(
                    "fixed-point iteration is not contracting (step ratio {ratio})"
                )));
            }
        }
        last_step = step;
        w = next;
        if c_norm(&w) > r * (1.0 + 1e-12) {
            return Err(Error::HypothesisViolated(format!(
                "iterate left the ball of radius {r}"
            )));
        }
    }
    Err(Error::Divergence(
        "contraction did not reach the residual tolerance".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn preset_parameters() {
        let p = derive_params(2, 1.0, 1e-4, 2, 12).unwrap();
        assert_eq!(p.nu, 11.0);
        assert_relative_eq!(p.alpha, 0.01 * 12f64.powi(11), max_relative = 1e-14);
        assert!(!p.reachable());
        assert!(p.flags.iter().any(|f| f.contains("unreachable")));
        assert!(derive_params(2, 1.0, 1e-4, 2, 11).is_err());
        assert!(derive_params(2, 1.0, 1e-4, 1, 6).is_err());
        assert!(derive_params(2, 1.0, 1e-4, 3, 18).is_ok());
        let f = free_params(2, 1.0, 0.05, 2, 5).unwrap();
        assert_eq!(f.mode, ParamMode::Free);
        assert_eq!(f.alpha, 0.05);
        assert_relative_eq!(f.r_o, 0.05 / 32.0);
        assert_relative_eq!(f.s_o_prime, 0.25);
        assert_relative_eq!(f.s_k_prime(&ModeVector(vec![1, 1])), 2.0 * 0.8 * 0.8);
    }

    #[test]
    fn origin_is_fully_resonant() {
        let p = free_params(2, 1.0, 0.05, 2, 4).unwrap();
        let labels = classify_point(&[0.0, 0.0], &p).unwrap();
        let low = generators(2, 2.0).len();
        let high = generators(2, 4.0).len();
        assert_eq!(labels.len(), low * (high - 1));
        assert!(labels.iter().all(|l| l.kind == RegionKind::R2));
        assert!(matches!(
            classify_point(&[1.0, 0.0], &p),
            Err(Error::OutsideUnitBall(_))
        ));
    }

    #[test]
    fn labels_and_certificates_agree() {
        let p = free_params(3, 1.0, 0.004, 2, 4).unwrap();
        let cls = Classifier::new(&p);
        let mut seen = [0usize; 3];
        ball_samples(3, 20_000, 3)
            .collect::<Vec<_>>()
            .iter()
            .for_each(|(_, y)| {
                let labels = cls.classify(y).unwrap();
                assert!(!labels.is_empty());
                for label in labels {
                    match label.kind {
                        RegionKind::R0 => {
                            seen[0] += 1;
                            nonresonance_certificate(y, &p, &CertificateRequest::R0).unwrap();
                        }
                        RegionKind::R1 => {
                            seen[1] += 1;
                            let k = label.k.unwrap();
                            nonresonance_certificate(y, &p, &CertificateRequest::R1 { k }).unwrap();
                        }
                        RegionKind::R2 => seen[2] += 1,
                    }
                }
            });
        assert!(seen.iter().all(|&c| c > 0), "{seen:?}");
    }

    #[test]
    fn certificate_fails_on_resonance() {
        let p = free_params(2, 1.0, 0.05, 2, 5).unwrap();
        let err = nonresonance_certificate(&[0.0, 0.5], &p, &CertificateRequest::R0).unwrap_err();
        assert!(matches!(err, Error::CertificateFails { ref mode, .. } if mode == &vec![1, 0]));
        let cert = nonresonance_certificate(&[0.3, 0.41], &p, &CertificateRequest::R0).unwrap();
        assert!(cert.min_divisor > p.alpha / 2.0);
    }

    #[test]
    fn euclidean_reading_checks_more_modes() {
        let p = free_params(2, 1.0, 0.01, 4, 8).unwrap();
        let e = p.clone().with_cutoff_norm(CutoffNorm::Euclidean);
        let y = [0.37, 0.53];
        let a = nonresonance_certificate(&y, &p, &CertificateRequest::R0).unwrap();
        let b = nonresonance_certificate(&y, &e, &CertificateRequest::R0).unwrap();
        // (2,3) has |k|₂ < 4 < |k|₁
        assert!(b.modes_checked > a.modes_checked);
    }

    #[test]
    fn projection_examples() {
        let k = ModeVector(vec![1, 0]);
        assert_eq!(projections(&[1.0, 1.0], &k).unwrap(), (vec![1.0, 0.0], vec![0.0, 1.0]));
        let (par, perp) = projections(&[2.0, 4.0], &ModeVector(vec![1, 2])).unwrap();
        assert_eq!(perp, vec![0.0, 0.0]);
        assert_eq!(par, vec![2.0, 4.0]);
        assert!(projections(&[1.0, 1.0], &ModeVector(vec![0, 0])).is_err());
    }

    #[test]
    fn ball_volume_and_sampling() {
        assert_relative_eq!(unit_ball_volume(2), PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0);
        let a: Vec<_> = ball_samples(3, 20_000, 9).collect();
        let b: Vec<_> = ball_samples(3, 20_000, 9).collect();
        assert_eq!(a, b);
        let inner = a.iter().filter(|(_, y)| norm(y) < 0.5).count() as f64 / 20_000.0;
        assert!((inner - 0.125).abs() < 0.01, "{inner}");
    }

    #[test]
    fn alpha_zero_has_no_measure() {
        let p = free_params(2, 1.0, 0.0, 2, 5).unwrap();
        let m = measure_r2(&p, 5000, 1).unwrap();
        assert_eq!(m.r2_any_count, 0);
        assert_eq!(m.r2_only_count, 0);
        assert_eq!(m.uncovered, 0);
    }

    #[test]
    fn preimage_examples() {
        let id = contraction_preimage(|y| y.to_vec(), &[0.2, -0.1], 0.5, 0.0).unwrap();
        assert_eq!(id.y, vec![c(0.2), c(-0.1)]);
        let shift = [0.1, -0.2];
        let m = 0.1f64.hypot(0.2);
        let t = contraction_preimage(|y| vec![y[0] + shift[0], y[1] + shift[1]], &[0.0, 0.0], 0.5, m).unwrap();
        assert!((t.y[0] - c(-0.1)).norm() < 1e-14 && (t.y[1] - c(0.2)).norm() < 1e-14);
        let m = 0.1 * 1f64.cosh() * 1.2;
        let s = contraction_preimage(|y| vec![y[0] + 0.1 * y[0].sin()], &[0.3], 0.5, m).unwrap();
        assert!(s.residual < PREIMAGE_TOL);
        assert!(s.contraction <= m / 0.5);
        assert!(contraction_preimage(|y| vec![y[0] * 3.0], &[0.3], 0.5, 0.4).is_err());
    }
}
