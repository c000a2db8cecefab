//! Truncated Taylor (in η = y − y0) × Fourier (in x) series and their Poisson algebra.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{ModeVector, TrigPoly};

/// Largest supported number of degrees of freedom.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub k: [i16; MAX_DIM],
    pub a: [u8; MAX_DIM],
}

impl Key {
    pub fn new(k: &[i64], a: &[u32]) -> Key {
        let mut key = Key {
            k: [0; MAX_DIM],
            a: [0; MAX_DIM],
        };
        for (i, &v) in k.iter().enumerate() {
            key.k[i] = v as i16;
        }
        for (i, &v) in a.iter().enumerate() {
            key.a[i] = v as u8;
        }
        key
    }

    pub fn mode(&self, n: usize) -> Vec<i64> {
        self.k[..n].iter().map(|&v| v as i64).collect()
    }

    pub fn multi_index(&self, n: usize) -> Vec<u32> {
        self.a[..n].iter().map(|&v| v as u32).collect()
    }

    pub fn l1(&self) -> u32 {
        self.k.iter().map(|v| v.unsigned_abs() as u32).sum()
    }

    pub fn degree(&self) -> u32 {
        self.a.iter().map(|&v| v as u32).sum()
    }

    pub fn is_mean(&self) -> bool {
        self.k.iter().all(|&v| v == 0)
    }

    fn neg_mode(&self) -> Key {
        let mut out = *self;
        for v in out.k.iter_mut() {
            *v = -*v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub k: Vec<i64>,
    pub alpha: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorFourierSeries {
    n: usize,
    base: Vec<f64>,
    degree: u32,
    cutoff: u32,
    terms: BTreeMap<Key, Complex64>,
    dropped: f64,
}

/// Serializable image of a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesData {
    pub n: usize,
    pub base_point: Vec<f64>,
    pub degree: u32,
    pub cutoff: u32,
    pub dropped_mass: f64,
    pub terms: Vec<SeriesEntry>,
}

fn powers(v: &[Complex64], max: u32) -> Vec<Vec<Complex64>> {
    v.iter()
        .map(|&z| {
            let mut p = vec![Complex64::new(1.0, 0.0); max as usize + 1];
            for d in 1..=max as usize {
                p[d] = p[d - 1] * z;
            }
            p
        })
        .collect()
}

impl TaylorFourierSeries {
    pub fn new(n: usize, base: Vec<f64>, degree: u32, cutoff: u32) -> Result<Self> {
        if n == 0 || n > MAX_DIM || base.len() != n {
            return Err(Error::InvalidInput(format!(
                "series dimension must be 1..={MAX_DIM} with a matching base point"
            )));
        }
        if degree > 12 || cutoff > i16::MAX as u32 / 4 {
            return Err(Error::InvalidInput(format!(
                "degree {degree} or cutoff {cutoff} too large"
            )));
        }
        Ok(TaylorFourierSeries {
            n,
            base,
            degree,
            cutoff,
            terms: BTreeMap::new(),
            dropped: 0.0,
        })
    }

    /// Empty series with the same shape.
    pub fn empty_like(&self) -> Self {
        TaylorFourierSeries {
            n: self.n,
            base: self.base.clone(),
            degree: self.degree,
            cutoff: self.cutoff,
            terms: BTreeMap::new(),
            dropped: 0.0,
        }
    }

    /// y-independent series from a real trigonometric polynomial.
    pub fn from_trig_poly(f: &TrigPoly, base: Vec<f64>, degree: u32, cutoff: u32) -> Result<Self> {
        let mut out = TaylorFourierSeries::new(f.n(), base, degree, cutoff)?;
        let zero = vec![0u32; f.n()];
        for (k, c) in f.modes() {
            out.add_term(Key::new(&k.0, &zero), *c);
            out.add_term(Key::new(&k.neg().0, &zero), c.conj());
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &Complex64)> {
        self.terms.iter()
    }

    pub fn get(&self, key: &Key) -> Complex64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    /// Adds a term, dropping it (and recording its mass) when it exceeds degree or cutoff.
    pub fn add_term(&mut self, key: Key, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        if key.degree() > self.degree || key.l1() > self.cutoff {
            self.dropped += c.norm();
            return;
        }
        let entry = self.terms.entry(key).or_default();
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&key);
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= lambda;
        }
        out.dropped *= lambda.abs();
        out
    }

    pub fn add_assign(&mut self, other: &TaylorFourierSeries) {
        for (key, c) in &other.terms {
            self.add_term(*key, *c);
        }
        self.dropped += other.dropped;
    }

    pub fn add_scaled(&mut self, other: &TaylorFourierSeries, lambda: f64) {
        for (key, c) in &other.terms {
            self.add_term(*key, *c * lambda);
        }
        self.dropped += other.dropped * lambda.abs();
    }

    /// Terms whose Fourier mode satisfies the predicate.
    pub fn filter<F: Fn(&[i64]) -> bool>(&self, keep: F) -> Self {
        let mut out = self.empty_like();
        for (key, c) in &self.terms {
            if keep(&key.mode(self.n)) {
                out.terms.insert(*key, *c);
            }
        }
        out
    }

    pub fn remove_modes<F: Fn(&[i64]) -> bool>(&mut self, remove: F) {
        let n = self.n;
        self.terms.retain(|key, _| !remove(&key.mode(n)));
    }

    pub fn modes(&self) -> BTreeSet<Vec<i64>> {
        self.terms.keys().map(|key| key.mode(self.n)).collect()
    }

    /// Largest |c_{-k,a} − conj(c_{k,a})|; zero for a real function.
    pub fn reality_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(key, c)| (self.get(&key.neg_mode()) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// {F, G} = ∂_x F · ∂_η G − ∂_η F · ∂_x G.
    pub fn bracket(&self, other: &TaylorFourierSeries) -> TaylorFourierSeries {
        let n = self.n;
        let (degree, cutoff) = (self.degree, self.cutoff);
        let left: Vec<(Key, Complex64)> = self.terms.iter().map(|(k, c)| (*k, *c)).collect();
        let right: Vec<(Key, Complex64, u32, u32)> =
            other.terms.iter().map(|(k, c)| (*k, *c, k.degree(), k.l1())).collect();
        let i = Complex64::new(0.0, 1.0);
        let partials: Vec<(Vec<(Key, Complex64)>, f64)> = left
            .par_chunks(32)
            .map(|chunk| {
                let mut acc: BTreeMap<Key, Complex64> = BTreeMap::new();
                let mut dropped = 0.0;
                for (k1, c1) in chunk {
                    let d1 = k1.degree();
                    for (k2, c2, d2, _) in &right {
                        let mut mode = [0i16; MAX_DIM];
                        let mut l1 = 0u32;
                        for j in 0..n {
                            mode[j] = k1.k[j] + k2.k[j];
                            l1 += mode[j].unsigned_abs() as u32;
                        }
                        let product = i * c1 * c2;
                        for j in 0..n {
                            let factor = k1.k[j] as i64 * k2.a[j] as i64 - k1.a[j] as i64 * k2.k[j] as i64;
                            if factor == 0 {
                                continue;
                            }
                            let c = product * factor as f64;
                            if d1 + d2 - 1 > degree || l1 > cutoff {
                                dropped += c.norm();
                                continue;
                            }
                            let mut a = [0u8; MAX_DIM];
                            for m in 0..n {
                                a[m] = k1.a[m] + k2.a[m];
                            }
                            a[j] -= 1;
                            *acc.entry(Key { k: mode, a }).or_default() += c;
                        }
                    }
                }
                (acc.into_iter().collect(), dropped)
            })
            .collect();
        let mut out = self.empty_like();
        for (terms, dropped) in partials {
            out.dropped += dropped;
            for (key, c) in terms {
                out.add_term(key, c);
            }
        }
        out
    }

    fn eval_parts(
        &self,
        eta: &[Complex64],
        x: &[Complex64],
    ) -> (Vec<Vec<Complex64>>, BTreeMap<[i16; MAX_DIM], Complex64>) {
        let pw = powers(eta, self.degree);
        let mut exps = BTreeMap::new();
        for key in self.terms.keys() {
            exps.entry(key.k).or_insert_with(|| {
                let phase: Complex64 = (0..self.n).map(|j| x[j] * key.k[j] as f64).sum();
                (Complex64::new(0.0, 1.0) * phase).exp()
            });
        }
        (pw, exps)
    }

    fn monomial(&self, pw: &[Vec<Complex64>], key: &Key) -> Complex64 {
        (0..self.n).fold(Complex64::new(1.0, 0.0), |acc, j| acc * pw[j][key.a[j] as usize])
    }

    pub fn evaluate_complex(&self, eta: &[Complex64], x: &[Complex64]) -> Complex64 {
        let (pw, exps) = self.eval_parts(eta, x);
        self.terms
            .iter()
            .map(|(key, c)| c * self.monomial(&pw, key) * exps[&key.k])
            .sum()
    }

    /// Value at real (η, x).
    pub fn evaluate(&self, eta: &[f64], x: &[f64]) -> f64 {
        let eta_c: Vec<Complex64> = eta.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let x_c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.evaluate_complex(&eta_c, &x_c).re
    }

    /// Value at an action point y (η = y − y0).
    pub fn evaluate_at(&self, y: &[f64], x: &[f64]) -> f64 {
        let eta: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        self.evaluate(&eta, x)
    }

    /// (∂_η, ∂_x) at real (η, x).
    pub fn gradient(&self, eta: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let eta_c: Vec<Complex64> = eta.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let x_c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let (pw, exps) = self.eval_parts(&eta_c, &x_c);
        let mut d_eta = vec![Complex64::new(0.0, 0.0); self.n];
        let mut d_x = vec![Complex64::new(0.0, 0.0); self.n];
        let i = Complex64::new(0.0, 1.0);
        for (key, c) in &self.terms {
            let e = exps[&key.k];
            let full = c * self.monomial(&pw, key) * e;
            for j in 0..self.n {
                d_x[j] += i * key.k[j] as f64 * full;
                let aj = key.a[j] as usize;
                if aj > 0 {
                    let partial = (0..self.n).fold(Complex64::new(aj as f64, 0.0), |acc, m| {
                        acc * pw[m][if m == j { aj - 1 } else { key.a[m] as usize }]
                    });
                    d_eta[j] += c * partial * e;
                }
            }
        }
        (d_eta.iter().map(|z| z.re).collect(), d_x.iter().map(|z| z.re).collect())
    }

    /// Σ |c| r^{|a|} e^{|k|_1 s}.
    pub fn majorant(&self, r: f64, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|(key, c)| c.norm() * r.powi(key.degree() as i32) * (key.l1() as f64 * s).exp())
            .sum()
    }

    pub fn to_data(&self) -> SeriesData {
        SeriesData {
            n: self.n,
            base_point: self.base.clone(),
            degree: self.degree,
            cutoff: self.cutoff,
            dropped_mass: self.dropped,
            terms: self
                .terms
                .iter()
                .map(|(key, c)| SeriesEntry {
                    k: key.mode(self.n),
                    alpha: key.multi_index(self.n),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn from_data(data: &SeriesData) -> Result<Self> {
        let mut out = TaylorFourierSeries::new(data.n, data.base_point.clone(), data.degree, data.cutoff)?;
        for e in &data.terms {
            if e.k.len() != data.n || e.alpha.len() != data.n {
                return Err(Error::InvalidInput("series entry has the wrong dimension".into()));
            }
            out.add_term(Key::new(&e.k, &e.alpha), Complex64::new(e.re, e.im));
        }
        out.dropped = data.dropped_mass;
        Ok(out)
    }
}

/// Multi-indices b with |b| = m, in lexicographic order.
pub fn multi_indices(n: usize, m: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in (0..=m).rev() {
        for mut rest in multi_indices(n - 1, m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(|v| v as f64).product()
}

/// Expansion of (v·η)^m as Σ_{|b|=m} c_b η^b.
pub fn linear_power(v: &[f64], m: u32) -> Vec<(Vec<u32>, f64)> {
    multi_indices(v.len(), m)
        .into_iter()
        .map(|b| {
            let mut c = factorial(m);
            for (j, &bj) in b.iter().enumerate() {
                c *= v[j].powi(bj as i32) / factorial(bj);
            }
            (b, c)
        })
        .collect()
}

pub fn mode_key(k: &ModeVector, a: &[u32]) -> Key {
    Key::new(&k.0, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(n: usize, terms: &[(&[i64], &[u32], f64)]) -> TaylorFourierSeries {
        let mut s = TaylorFourierSeries::new(n, vec![0.0; n], 3, 10).unwrap();
        for (k, a, c) in terms {
            s.add_term(Key::new(k, a), Complex64::new(*c, 0.0));
        }
        s
    }

    #[test]
    fn bracket_matches_finite_differences() {
        let f = series(
            2,
            &[
                (&[1, 0], &[0, 0], 0.5),
                (&[-1, 0], &[0, 0], 0.5),
                (&[0, 1], &[1, 0], 0.3),
                (&[0, -1], &[1, 0], 0.3),
            ],
        );
        let g = series(
            2,
            &[
                (&[1, 1], &[0, 1], 0.25),
                (&[-1, -1], &[0, 1], 0.25),
                (&[0, 0], &[2, 0], 1.0),
            ],
        );
        let b = f.bracket(&g);
        let (eta, x) = ([0.11, -0.07], [0.4, 1.3]);
        let (fe, fx) = f.gradient(&eta, &x);
        let (ge, gx) = g.gradient(&eta, &x);
        let expected: f64 = (0..2).map(|j| fx[j] * ge[j] - fe[j] * gx[j]).sum();
        assert_relative_eq!(b.evaluate(&eta, &x), expected, epsilon = 1e-13);
        assert!(b.reality_defect() < 1e-15);
        let h = 1e-6;
        let fd = (f.evaluate(&[eta[0] + h, eta[1]], &x) - f.evaluate(&[eta[0] - h, eta[1]], &x)) / (2.0 * h);
        assert_relative_eq!(fe[0], fd, epsilon = 1e-8);
    }

    #[test]
    fn bracket_is_antisymmetric_and_truncates() {
        let f = series(2, &[(&[1, 0], &[1, 1], 1.0), (&[-1, 0], &[1, 1], 1.0)]);
        let g = series(2, &[(&[0, 2], &[2, 0], 1.0), (&[0, -2], &[2, 0], 1.0)]);
        let fg = f.bracket(&g);
        let gf = g.bracket(&f);
        let mut sum = fg.clone();
        sum.add_assign(&gf);
        assert!(sum.is_empty());
        // degrees 2 + 2 − 1 = 3 kept, one more would be dropped
        assert!(!fg.is_empty());
        let mut g3 = g.clone();
        g3.add_term(Key::new(&[0, 1], &[3, 0]), Complex64::new(1.0, 0.0));
        let dropped = f.bracket(&g3).dropped_mass();
        assert!(dropped > 0.0);
    }

    #[test]
    fn majorant_and_evaluation() {
        let s = series(1, &[(&[2], &[1], 0.5), (&[-2], &[1], 0.5)]);
        assert_relative_eq!(s.majorant(0.5, 1.0), 0.5 * (2f64).exp());
        assert_relative_eq!(s.evaluate(&[0.3], &[0.2]), 0.3 * (0.4f64).cos(), epsilon = 1e-15);
        let round = TaylorFourierSeries::from_data(&s.to_data()).unwrap();
        assert_eq!(round, s);
    }

    #[test]
    fn linear_power_expansion() {
        let terms = linear_power(&[2.0, -1.0], 2);
        let eta: [f64; 2] = [0.3, 0.7];
        let direct = (2.0 * 0.3 - 0.7f64).powi(2);
        let sum: f64 = terms
            .iter()
            .map(|(b, c)| c * eta[0].powi(b[0] as i32) * eta[1].powi(b[1] as i32))
            .sum();
        assert_relative_eq!(sum, direct, epsilon = 1e-15);
        assert_eq!(multi_indices(3, 2).len(), 6);
    }
}
