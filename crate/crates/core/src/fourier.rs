//! Sparse Fourier algebra for zero-average real-analytic functions on the torus.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer frequency vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeVector(pub Vec<i64>);

impl ModeVector {
    pub fn new(k: Vec<i64>) -> Self {
        ModeVector(k)
    }

    pub fn zero(n: usize) -> Self {
        ModeVector(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut k = vec![0; n];
        k[i] = 1;
        ModeVector(k)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Euclidean length.
    pub fn norm2(&self) -> f64 {
        (self.0.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
    }

    pub fn norm2_sq(&self) -> i64 {
        self.0.iter().map(|&c| c * c).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Membership in Z^n_*: first nonzero component is positive.
    pub fn is_starred(&self) -> bool {
        match self.0.iter().find(|&&c| c != 0) {
            Some(&c) => c > 0,
            None => false,
        }
    }

    pub fn gcd(&self) -> i64 {
        self.0.iter().fold(0i64, |g, &c| g.gcd(&c))
    }

    pub fn is_generator(&self) -> bool {
        self.is_starred() && self.gcd() == 1
    }

    pub fn neg(&self) -> ModeVector {
        ModeVector(self.0.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, j: i64) -> ModeVector {
        ModeVector(self.0.iter().map(|c| c * j).collect())
    }

    pub fn add(&self, other: &ModeVector) -> ModeVector {
        ModeVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn dot(&self, y: &[f64]) -> f64 {
        self.0.iter().zip(y).map(|(&k, &y)| k as f64 * y).sum()
    }

    pub fn dot_complex(&self, x: &[Complex64]) -> Complex64 {
        self.0.iter().zip(x).map(|(&k, &x)| x * k as f64).sum::<Complex64>()
    }

    pub fn dot_int(&self, other: &ModeVector) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    /// The starred representative of ±k, with a flag telling whether a sign flip happened.
    pub fn starred(&self) -> (ModeVector, bool) {
        if self.is_starred() {
            (self.clone(), false)
        } else {
            (self.neg(), true)
        }
    }

    /// Returns j with self = j·k when self lies on the lattice Zk.
    pub fn multiple_of(&self, k: &ModeVector) -> Option<i64> {
        let idx = k.0.iter().position(|&c| c != 0)?;
        let (num, den) = (self.0[idx], k.0[idx]);
        if num % den != 0 {
            return None;
        }
        let j = num / den;
        if self.0.iter().zip(&k.0).all(|(&a, &b)| a == j * b) {
            Some(j)
        } else {
            None
        }
    }

    /// Parses "2,-3" style lists.
    pub fn parse(text: &str) -> Result<ModeVector> {
        let parts: std::result::Result<Vec<i64>, _> = text.split(',').map(|p| p.trim().parse::<i64>()).collect();
        match parts {
            Ok(v) if !v.is_empty() => Ok(ModeVector(v)),
            _ => Err(Error::InvalidInput(format!("cannot parse mode vector '{text}'"))),
        }
    }
}

impl fmt::Display for ModeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All generators of size at most `k_max`, in lexicographic order.
pub fn generators(n: usize, k_max: f64) -> Vec<ModeVector> {
    if n == 0 || k_max < 1.0 {
        return Vec::new();
    }
    let budget = k_max.floor() as i64;
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    enumerate_ball(n, budget, &mut prefix, &mut |v| {
        let m = ModeVector(v.to_vec());
        if m.is_generator() {
            out.push(m);
        }
    });
    out
}

/// Generators with `lo <= |k|_1 <= hi`.
pub fn generators_in_shell(n: usize, lo: f64, hi: f64) -> Vec<ModeVector> {
    generators(n, hi).into_iter().filter(|k| k.l1() as f64 >= lo).collect()
}

/// Every nonzero k in Z^n_* with `|k|_1 <= k_max`, lexicographic.
pub fn starred_modes(n: usize, k_max: u32) -> Vec<ModeVector> {
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    enumerate_ball(n, k_max as i64, &mut prefix, &mut |v| {
        let m = ModeVector(v.to_vec());
        if m.is_starred() {
            out.push(m);
        }
    });
    out
}

fn enumerate_ball(n: usize, budget: i64, prefix: &mut Vec<i64>, visit: &mut dyn FnMut(&[i64])) {
    if prefix.len() == n {
        visit(prefix);
        return;
    }
    for c in -budget..=budget {
        prefix.push(c);
        enumerate_ball(n, budget - c.abs(), prefix, visit);
        prefix.pop();
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Number of integer vectors in Z^n with `|k|_1 = m`.
pub fn shell_count(n: usize, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    (1..=n.min(m as usize) as u64)
        .map(|i| 2f64.powi(i as i32) * binomial(n as u64, i) * binomial(m - 1, i - 1))
        .sum()
}

fn mobius(mut d: u64) -> i32 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= d {
        if d.is_multiple_of(p) {
            d /= p;
            if d.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if d > 1 {
        result = -result;
    }
    result
}

/// Number of generators with `|k|_1 = m`, by Möbius inversion over the shell counts.
pub fn generator_shell_count(n: usize, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for d in 1..=m {
        if m.is_multiple_of(d) {
            let mu = mobius(d);
            if mu != 0 {
                total += mu as f64 * shell_count(n, m / d);
            }
        }
    }
    total / 2.0
}

/// Closed-form coefficient rules for infinite-support models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum CoefficientRule {
    /// f_k = amplitude·e^{-s|k|_1} on generators, zero elsewhere.
    ExpLacunary { s: f64, amplitude: f64 },
}

impl CoefficientRule {
    pub fn coefficient(&self, k: &ModeVector) -> Complex64 {
        match self {
            CoefficientRule::ExpLacunary { s, amplitude } => {
                if k.is_generator() {
                    Complex64::new(amplitude * (-s * k.l1() as f64).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    fn sup_weighted(&self, n: usize, s: f64, from_l1: u64) -> Result<f64> {
        match self {
            CoefficientRule::ExpLacunary { s: sr, amplitude } => {
                if s > *sr {
                    return Err(Error::NormDiverges(format!(
                        "weighted coefficients grow like e^{{{:.3}|k|}}",
                        s - sr
                    )));
                }
                let m = from_l1.max(1);
                if n == 0 {
                    return Ok(0.0);
                }
                Ok(amplitude.abs() * ((s - sr) * m as f64).exp())
            }
        }
    }

    /// Sum over both signs of |f_k|e^{|k|_1 s} for |k|_1 > from_l1.
    fn tail_majorant(&self, n: usize, s: f64, from_l1: u64, tol: f64) -> Result<f64> {
        match self {
            CoefficientRule::ExpLacunary { s: sr, amplitude } => {
                let gap = sr - s;
                if gap <= 0.0 {
                    return Err(Error::NormDiverges(format!(
                        "majorant series diverges at s = {s} >= {sr}"
                    )));
                }
                let mut total = 0.0;
                let mut m = from_l1 + 1;
                loop {
                    let term = 2.0 * amplitude.abs() * generator_shell_count(n, m) * (-gap * m as f64).exp();
                    total += term;
                    // remaining shells are dominated by a geometric tail of the lattice-shell count
                    let bound = 2.0 * amplitude.abs() * shell_count(n, m + 1) * (-gap * (m + 1) as f64).exp()
                        / (1.0 - (-gap).exp()).max(1e-300)
                        * ((m + 2) as f64 / (m + 1) as f64).powi(n as i32);
                    if bound <= tol * total.max(1e-300) || bound < 1e-300 {
                        return Ok(total + bound);
                    }
                    m += 1;
                    if m > from_l1 + 1_000_000 {
                        return Err(Error::NormDiverges("tail summation did not settle".into()));
                    }
                }
            }
        }
    }
}

/// Rule plus the cutoff up to which it has been materialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleInfo {
    pub rule: CoefficientRule,
    pub cutoff: u32,
}

/// Zero-average real trigonometric polynomial on T^n, stored on Z^n_*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    n: usize,
    coeffs: BTreeMap<ModeVector, Complex64>,
    rule: Option<RuleInfo>,
}

/// Value of a truncated sum, with a tail bound when a rule is active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: Complex64,
    pub truncation_bound: Option<f64>,
}

/// Bracket for the sup-norm over the complex strip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupInterval {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
}

pub const MAJORANT_TAIL_TOL: f64 = 1e-14;

impl TrigPoly {
    pub fn zero(n: usize) -> Self {
        TrigPoly {
            n,
            coeffs: BTreeMap::new(),
            rule: None,
        }
    }

    pub fn from_modes<I>(n: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeVector, Complex64)>,
    {
        let mut f = TrigPoly::zero(n);
        for (k, c) in modes {
            f.insert(k, c)?;
        }
        Ok(f)
    }

    /// Materializes a rule on every starred mode up to `cutoff`.
    pub fn from_rule(n: usize, rule: CoefficientRule, cutoff: u32) -> Self {
        let mut coeffs = BTreeMap::new();
        let support = match &rule {
            CoefficientRule::ExpLacunary { .. } => generators(n, cutoff as f64),
        };
        for k in support {
            let c = rule.coefficient(&k);
            if c != Complex64::new(0.0, 0.0) {
                coeffs.insert(k, c);
            }
        }
        TrigPoly {
            n,
            coeffs,
            rule: Some(RuleInfo { rule, cutoff }),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> Option<&RuleInfo> {
        self.rule.as_ref()
    }

    pub fn insert(&mut self, k: ModeVector, c: Complex64) -> Result<()> {
        if k.dim() != self.n {
            return Err(Error::InvalidInput(format!(
                "mode {k} has dimension {}, expected {}",
                k.dim(),
                self.n
            )));
        }
        if !k.is_starred() {
            return Err(Error::InvalidInput(format!("mode {k} is not in Z^n_*")));
        }
        if c == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&k);
        } else {
            self.coeffs.insert(k, c);
        }
        Ok(())
    }

    /// Coefficient at any k, using reality for non-starred modes.
    pub fn coeff(&self, k: &ModeVector) -> Complex64 {
        if k.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let (ks, flipped) = k.starred();
        let c = self.coeffs.get(&ks).copied().unwrap_or_default();
        if flipped {
            c.conj()
        } else {
            c
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeVector, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_l1(&self) -> i64 {
        self.coeffs.keys().map(|k| k.l1()).max().unwrap_or(0)
    }

    pub fn scaled(&self, lambda: f64) -> TrigPoly {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= lambda;
        }
        if let Some(info) = out.rule.as_mut() {
            match &mut info.rule {
                CoefficientRule::ExpLacunary { amplitude, .. } => *amplitude *= lambda,
            }
        }
        out
    }

    /// Drops the rule metadata, keeping the materialized modes only.
    pub fn truncated(&self) -> TrigPoly {
        TrigPoly {
            n: self.n,
            coeffs: self.coeffs.clone(),
            rule: None,
        }
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.truncated();
        for (k, c) in &other.coeffs {
            let v = out.coeffs.get(k).copied().unwrap_or_default() + c;
            if v == Complex64::new(0.0, 0.0) {
                out.coeffs.remove(k);
            } else {
                out.coeffs.insert(k.clone(), v);
            }
        }
        out
    }

    fn rule_cutoff(&self) -> u64 {
        self.rule.as_ref().map(|r| r.cutoff as u64).unwrap_or(0)
    }

    pub fn norm_weighted_sup(&self, s: f64) -> Result<f64> {
        let explicit = self
            .coeffs
            .iter()
            .map(|(k, c)| c.norm() * (k.l1() as f64 * s).exp())
            .fold(0.0, f64::max);
        match &self.rule {
            None => Ok(explicit),
            Some(info) => {
                let tail = info.rule.sup_weighted(self.n, s, self.rule_cutoff() + 1)?;
                // modes below the cutoff are already explicit; the rule only bounds the tail
                Ok(explicit.max(tail))
            }
        }
    }

    pub fn norm_majorant(&self, s: f64) -> Result<f64> {
        self.norm_majorant_with_tol(s, MAJORANT_TAIL_TOL)
    }

    pub fn norm_majorant_with_tol(&self, s: f64, tol: f64) -> Result<f64> {
        let explicit: f64 = self
            .coeffs
            .iter()
            .map(|(k, c)| 2.0 * c.norm() * (k.l1() as f64 * s).exp())
            .sum();
        match &self.rule {
            None => Ok(explicit),
            Some(info) => Ok(explicit + info.rule.tail_majorant(self.n, s, self.rule_cutoff(), tol)?),
        }
    }

    /// Truncated Fourier sum at a complex point.
    pub fn evaluate(&self, x: &[Complex64]) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let phase = k.dot_complex(x);
                c * (i * phase).exp() + c.conj() * (-i * phase).exp()
            })
            .sum()
    }

    pub fn evaluate_real(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let phase = k.dot(x);
                2.0 * (c.re * phase.cos() - c.im * phase.sin())
            })
            .sum()
    }

    pub fn evaluate_reported(&self, x: &[Complex64]) -> Result<Evaluation> {
        let value = self.evaluate(x);
        let truncation_bound = match &self.rule {
            None => None,
            Some(info) => {
                let width = x.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                Some(
                    info.rule
                        .tail_majorant(self.n, width, self.rule_cutoff(), MAJORANT_TAIL_TOL)?,
                )
            }
        };
        Ok(Evaluation {
            value,
            truncation_bound,
        })
    }

    /// Real gradient of the truncated sum.
    pub fn gradient_real(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (k, c) in &self.coeffs {
            let phase = k.dot(x);
            let d = -2.0 * (c.re * phase.sin() + c.im * phase.cos());
            for (gi, &ki) in g.iter_mut().zip(&k.0) {
                *gi += d * ki as f64;
            }
        }
        g
    }

    /// Strip sup as [boundary-grid lower bound, majorant upper bound].
    pub fn strip_sup_interval(&self, s: f64) -> Result<SupInterval> {
        let upper = self.norm_majorant(s)?;
        let n = self.n;
        if self.coeffs.is_empty() || n == 0 {
            return Ok(SupInterval {
                lower: 0.0,
                upper,
                samples: 0,
            });
        }
        let patterns = 1usize << n;
        let per_dim = ((4096.0 / patterns as f64).powf(1.0 / n as f64)).floor().max(2.0) as usize;
        let mut best = (0.0f64, vec![0.0; n], 0usize);
        let mut samples = 0usize;
        for pattern in 0..patterns {
            let imag: Vec<f64> = (0..n).map(|j| if pattern >> j & 1 == 1 { s } else { -s }).collect();
            let total = per_dim.pow(n as u32);
            for idx in 0..total {
                let mut rem = idx;
                let re: Vec<f64> = (0..n)
                    .map(|_| {
                        let t = rem % per_dim;
                        rem /= per_dim;
                        2.0 * PI * t as f64 / per_dim as f64
                    })
                    .collect();
                let v = self.abs_on_boundary(&re, &imag);
                samples += 1;
                if v > best.0 {
                    best = (v, re, pattern);
                }
            }
        }
        // coordinate ascent from the best sample; every evaluated value is attained, so the bound stays valid
        let imag: Vec<f64> = (0..n).map(|j| if best.2 >> j & 1 == 1 { s } else { -s }).collect();
        let mut point = best.1.clone();
        let mut value = best.0;
        let mut width = 2.0 * PI / per_dim as f64;
        for _ in 0..6 {
            for j in 0..n {
                let (arg, v) = golden_max(
                    |t| {
                        let mut p = point.clone();
                        p[j] = t;
                        self.abs_on_boundary(&p, &imag)
                    },
                    point[j] - width,
                    point[j] + width,
                    40,
                );
                if v > value {
                    value = v;
                    point[j] = arg;
                }
            }
            width *= 0.5;
        }
        Ok(SupInterval {
            lower: value,
            upper,
            samples,
        })
    }

    fn abs_on_boundary(&self, re: &[f64], im: &[f64]) -> f64 {
        let x: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.evaluate(&x).norm()
    }

    /// Restriction to the lattice Zk as a function of θ = k·x.
    pub fn project_lattice(&self, k: &ModeVector) -> Result<OneDTrigPoly> {
        if !k.is_generator() || k.dim() != self.n {
            return Err(Error::NotAGenerator(k.0.clone()));
        }
        let mut out = OneDTrigPoly::zero();
        for (m, c) in &self.coeffs {
            if let Some(j) = m.multiple_of(k) {
                if j > 0 {
                    out.set(j as u32, *c);
                }
            }
        }
        Ok(out)
    }

    /// Generators carrying at least one stored mode.
    pub fn support_generators(&self) -> Vec<ModeVector> {
        let mut gens: Vec<ModeVector> = self
            .coeffs
            .keys()
            .map(|m| {
                let g = m.gcd();
                ModeVector(m.0.iter().map(|c| c / g).collect())
            })
            .collect();
        gens.sort();
        gens.dedup();
        gens
    }
}

/// Golden-section maximization on [a, b].
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Zero-average real trigonometric polynomial in one angle, stored for j > 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OneDTrigPoly {
    coeffs: BTreeMap<u32, Complex64>,
}

impl OneDTrigPoly {
    pub fn zero() -> Self {
        OneDTrigPoly::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (u32, Complex64)>>(pairs: I) -> Self {
        let mut f = OneDTrigPoly::zero();
        for (j, c) in pairs {
            f.set(j, f.coeff(j as i64) + c);
        }
        f
    }

    /// a·cos(jθ) + b·sin(jθ) style builder: returns the pair coefficient for mode j.
    pub fn cos_sin(j: u32, a: f64, b: f64) -> (u32, Complex64) {
        (j, Complex64::new(a / 2.0, -b / 2.0))
    }

    pub fn set(&mut self, j: u32, c: Complex64) {
        assert!(j > 0, "mode 0 is excluded by the zero-average convention");
        if c == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&j);
        } else {
            self.coeffs.insert(j, c);
        }
    }

    pub fn coeff(&self, j: i64) -> Complex64 {
        match j.cmp(&0) {
            std::cmp::Ordering::Equal => Complex64::new(0.0, 0.0),
            std::cmp::Ordering::Greater => self.coeffs.get(&(j as u32)).copied().unwrap_or_default(),
            std::cmp::Ordering::Less => self.coeffs.get(&((-j) as u32)).copied().unwrap_or_default().conj(),
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (&u32, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_mode(&self) -> u32 {
        self.coeffs.keys().copied().max().unwrap_or(0)
    }

    pub fn scaled(&self, lambda: f64) -> OneDTrigPoly {
        OneDTrigPoly {
            coeffs: self.coeffs.iter().map(|(&j, &c)| (j, c * lambda)).collect(),
        }
    }

    pub fn add(&self, other: &OneDTrigPoly) -> OneDTrigPoly {
        let mut out = self.clone();
        for (&j, &c) in &other.coeffs {
            out.set(j, out.coeff(j as i64) + c);
        }
        out
    }

    pub fn sub(&self, other: &OneDTrigPoly) -> OneDTrigPoly {
        self.add(&other.scaled(-1.0))
    }

    /// θ ↦ F(θ − shift).
    pub fn shifted(&self, shift: f64) -> OneDTrigPoly {
        OneDTrigPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|(&j, &c)| (j, c * Complex64::from_polar(1.0, -(j as f64) * shift)))
                .collect(),
        }
    }

    /// m-th derivative of the real function at real θ.
    pub fn eval_deriv(&self, theta: f64, order: u32) -> f64 {
        let i = Complex64::new(0.0, 1.0);
        self.coeffs
            .iter()
            .map(|(&j, &c)| {
                let factor = (i * j as f64).powu(order);
                2.0 * (c * factor * Complex64::from_polar(1.0, j as f64 * theta)).re
            })
            .sum()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_deriv(theta, 0)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        self.coeffs
            .iter()
            .map(|(&j, &c)| {
                let p = i * z * j as f64;
                c * p.exp() + c.conj() * (-p).exp()
            })
            .sum()
    }

    /// Σ_{j≠0} |c_j| e^{|j| s}, both signs.
    pub fn majorant(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(&j, c)| 2.0 * c.norm() * (j as f64 * s).exp())
            .sum()
    }

    /// Σ_{j≠0} |j|^m |c_j|, a bound on sup|F^{(m)}|.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        self.coeffs
            .iter()
            .map(|(&j, c)| 2.0 * c.norm() * (j as f64).powi(order as i32))
            .sum()
    }
}

/// Serialized potential: explicit modes or a named rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialFile {
    pub n: usize,
    pub s: f64,
    #[serde(default)]
    pub modes: Vec<ModeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub preset: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub kmax: u32,
}

fn one() -> f64 {
    1.0
}

impl PotentialFile {
    pub fn to_trig_poly(&self) -> Result<TrigPoly> {
        let mut f = match &self.rule {
            None => TrigPoly::zero(self.n),
            Some(rule) => match rule.preset.as_str() {
                "exp-lacunary" => TrigPoly::from_rule(
                    self.n,
                    CoefficientRule::ExpLacunary {
                        s: self.s,
                        amplitude: rule.amplitude,
                    },
                    rule.kmax,
                ),
                other => return Err(Error::InvalidInput(format!("unknown rule preset '{other}'"))),
            },
        };
        for m in &self.modes {
            let k = ModeVector(m.k.clone());
            let c = f.coeff(&k) + Complex64::new(m.re, m.im);
            f.insert(k, c)?;
        }
        Ok(f)
    }

    pub fn from_trig_poly(f: &TrigPoly, s: f64) -> PotentialFile {
        PotentialFile {
            n: f.n(),
            s,
            modes: f
                .modes()
                .map(|(k, c)| ModeEntry {
                    k: k.0.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
            rule: None,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<PotentialFile> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mv(v: &[i64]) -> ModeVector {
        ModeVector(v.to_vec())
    }

    #[test]
    fn generators_small_cases() {
        assert_eq!(generators(1, 5.0), vec![mv(&[1])]);
        assert_eq!(generators(2, 1.0), vec![mv(&[0, 1]), mv(&[1, 0])]);
        let expected: Vec<ModeVector> = [[0, 1], [1, -2], [1, -1], [1, 0], [1, 1], [1, 2], [2, -1], [2, 1]]
            .iter()
            .map(|v| mv(v))
            .collect();
        assert_eq!(generators(2, 3.0), expected);
        assert!(generators(3, 0.5).is_empty());
    }

    #[test]
    fn shell_counts_match_enumeration() {
        for n in 1..=4 {
            for m in 1..=7u64 {
                let brute = starred_modes(n, m as u32).iter().filter(|k| k.l1() as u64 == m).count();
                assert_eq!(shell_count(n, m), 2.0 * brute as f64);
                let gens = generators(n, m as f64).iter().filter(|k| k.l1() as u64 == m).count();
                assert_eq!(generator_shell_count(n, m), gens as f64, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn lacunary_norms() {
        let f = TrigPoly::from_rule(2, CoefficientRule::ExpLacunary { s: 1.0, amplitude: 1.0 }, 30);
        assert_relative_eq!(f.norm_weighted_sup(1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(f.norm_weighted_sup(1.5), Err(Error::NormDiverges(_))));
        assert!(f.norm_majorant(1.0).is_err());
        // explicit majorant sum over a long cutoff agrees with the analytic tail
        let long = TrigPoly::from_rule(2, CoefficientRule::ExpLacunary { s: 1.0, amplitude: 1.0 }, 80).truncated();
        assert_relative_eq!(
            f.norm_majorant(0.5).unwrap(),
            long.norm_majorant(0.5).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn norm_examples() {
        let f = TrigPoly::from_modes(2, [(mv(&[1, 0]), c(0.5, 0.0))]).unwrap();
        assert_relative_eq!(f.norm_weighted_sup(1.0).unwrap(), 0.5 * 1f64.exp(), epsilon = 1e-15);
        assert_relative_eq!(f.norm_majorant(0.7).unwrap(), 2.0 * 0.5 * 0.7f64.exp(), epsilon = 1e-15);
        let g = TrigPoly::from_modes(2, [(mv(&[1, 0]), c(1.0, 0.0)), (mv(&[0, 1]), c(0.0, 1.0))]).unwrap();
        assert_relative_eq!(g.norm_majorant(0.0).unwrap(), 4.0, epsilon = 1e-15);
        let z = TrigPoly::zero(3);
        assert_eq!(z.norm_weighted_sup(1.0).unwrap(), 0.0);
        assert_eq!(z.norm_majorant(1.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_unstarred_modes() {
        let mut f = TrigPoly::zero(2);
        assert!(f.insert(mv(&[-1, 2]), c(1.0, 0.0)).is_err());
        assert!(f.insert(mv(&[0, 0]), c(1.0, 0.0)).is_err());
        assert_eq!(f.coeff(&mv(&[-1, 0])), c(0.0, 0.0));
        f.insert(mv(&[1, -2]), c(1.0, 2.0)).unwrap();
        assert_eq!(f.coeff(&mv(&[-1, 2])), c(1.0, -2.0));
    }

    #[test]
    fn evaluation_examples() {
        let f = OneDTrigPoly::from_pairs([(1, c(1.0, 0.0))]);
        assert_relative_eq!(f.eval(0.0), 2.0);
        let v = f.eval_complex(c(0.0, 1.0));
        assert_relative_eq!(v.re, 2.0 * 1f64.cosh(), epsilon = 1e-14);
        assert!(v.im.abs() < 1e-15);
        assert_eq!(TrigPoly::zero(2).evaluate(&[c(0.3, 0.2), c(1.0, -0.1)]), c(0.0, 0.0));
    }

    #[test]
    fn projection_examples() {
        let s = 0.8;
        let k = mv(&[1, 2]);
        let a = (-s * 3.0f64).exp();
        let f = TrigPoly::from_modes(
            2,
            [
                (k.clone(), c(a, 0.0)),
                (mv(&[2, 4]), c(0.1, 0.2)),
                (mv(&[1, 0]), c(0.4, 0.0)),
            ],
        )
        .unwrap();
        let p = f.project_lattice(&k).unwrap();
        assert_eq!(p.coeff(1), c(a, 0.0));
        assert_eq!(p.coeff(2), c(0.1, 0.2));
        assert_relative_eq!(
            p.eval(0.3) - 0.2 * (2.0 * 0.3f64).cos() + 0.4 * (0.6f64).sin(),
            2.0 * a * 0.3f64.cos(),
            epsilon = 1e-14
        );
        assert!(f.project_lattice(&mv(&[1, 1])).unwrap().is_zero());
        assert!(matches!(f.project_lattice(&mv(&[2, 2])), Err(Error::NotAGenerator(_))));
    }

    #[test]
    fn rule_evaluation_reports_tail() {
        let f = TrigPoly::from_rule(2, CoefficientRule::ExpLacunary { s: 1.0, amplitude: 1.0 }, 12);
        let e = f.evaluate_reported(&[c(0.1, 0.2), c(0.3, -0.1)]).unwrap();
        let long = TrigPoly::from_rule(2, CoefficientRule::ExpLacunary { s: 1.0, amplitude: 1.0 }, 40);
        let exact = long.evaluate(&[c(0.1, 0.2), c(0.3, -0.1)]);
        assert!((e.value - exact).norm() <= e.truncation_bound.unwrap());
        assert!(TrigPoly::zero(2)
            .evaluate_reported(&[c(0.0, 0.0); 2])
            .unwrap()
            .truncation_bound
            .is_none());
    }

    #[test]
    fn potential_file_roundtrip() {
        let text = r#"{"n":2,"s":1.0,"modes":[{"k":[1,0],"re":0.5,"im":0.0},{"k":[1,-1],"re":0.1,"im":0.2}]}"#;
        let file: PotentialFile = serde_json::from_str(text).unwrap();
        let f = file.to_trig_poly().unwrap();
        assert_eq!(f.len(), 2);
        let back = PotentialFile::from_trig_poly(&f, 1.0);
        assert_eq!(back.to_trig_poly().unwrap(), f);
        let ruled: PotentialFile =
            serde_json::from_str(r#"{"n":2,"s":1.0,"rule":{"preset":"exp-lacunary","kmax":10}}"#).unwrap();
        assert_eq!(ruled.to_trig_poly().unwrap().len(), generators(2, 10.0).len());
    }
}
