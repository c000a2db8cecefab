//! Integer linear algebra adapted to a resonant generator.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::ModeVector;

pub type QMatrix = Vec<Vec<BigRational>>;

fn q(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn q_identity(n: usize) -> QMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

pub fn q_from_int(a: &[Vec<i64>]) -> QMatrix {
    a.iter().map(|row| row.iter().map(|&v| q(v)).collect()).collect()
}

pub fn q_mul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| (0..m).fold(BigRational::zero(), |acc, l| acc + &a[i][l] * &b[l][j]))
                .collect()
        })
        .collect()
}

pub fn q_mul_vec(a: &QMatrix, v: &[BigRational]) -> Vec<BigRational> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(BigRational::zero(), |acc, (x, y)| acc + x * y))
        .collect()
}

pub fn q_transpose(a: &QMatrix) -> QMatrix {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j].clone()).collect())
        .collect()
}

/// Exact determinant by Gaussian elimination over Q.
pub fn q_det(a: &QMatrix) -> BigRational {
    let n = a.len();
    let mut m = a.clone();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= &m[c][c];
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let factor = &m[r][c] / &m[c][c];
            for j in c..n {
                let delta = &factor * &m[c][j];
                m[r][j] -= delta;
            }
        }
    }
    det
}

/// Exact inverse by Gauss-Jordan elimination; `None` when singular.
pub fn q_inverse(a: &QMatrix) -> Option<QMatrix> {
    let n = a.len();
    let mut m = a.clone();
    let mut inv = q_identity(n);
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(p, c);
        inv.swap(p, c);
        let pivot = m[c][c].clone();
        for j in 0..n {
            m[c][j] /= &pivot;
            inv[c][j] /= &pivot;
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let factor = m[r][c].clone();
            for j in 0..n {
                let dm = &factor * &m[c][j];
                m[r][j] -= dm;
                let di = &factor * &inv[c][j];
                inv[r][j] -= di;
            }
        }
    }
    Some(inv)
}

fn q_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn q_to_dmatrix(a: &QMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), a[0].len(), |i, j| q_to_f64(&a[i][j]))
}

fn max_abs(a: &[Vec<i64>]) -> i64 {
    a.iter().flatten().map(|v| v.abs()).max().unwrap_or(0)
}

/// A ∈ SL(n,Z) whose first row is a generator k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnimodularMatrix {
    pub k: ModeVector,
    pub a: Vec<Vec<i64>>,
    pub a_inv: Vec<Vec<i64>>,
}

fn complete_rows(k: &[i64]) -> Vec<Vec<i64>> {
    let n = k.len();
    if n == 1 {
        return vec![vec![k[0]]];
    }
    let (prefix, kn) = (&k[..n - 1], k[n - 1]);
    if prefix.iter().all(|&v| v == 0) {
        // kn = ±1: first row ±e_n, then e_1, …, e_{n-1} with a sign fix on e_1
        let mut rows = vec![k.to_vec()];
        for i in 0..n - 1 {
            let mut e = vec![0; n];
            e[i] = 1;
            rows.push(e);
        }
        let sign = if (n - 1).is_multiple_of(2) { kn } else { -kn };
        rows[1][0] = sign;
        return rows;
    }
    let g = if n == 2 {
        prefix[0]
    } else {
        prefix.iter().fold(0i64, |acc, &v| acc.gcd(&v))
    };
    let reduced: Vec<i64> = prefix.iter().map(|&v| v / g).collect();
    let inner = complete_rows(&reduced);
    // g u − kn v = 1 with u the residue in [0, |kn|)
    let (u, v) = if kn == 0 {
        (g, 0)
    } else {
        let m = kn.abs() as i128;
        let ext = (g as i128).extended_gcd(&m);
        let u = (ext.x * ext.gcd).rem_euclid(m);
        let v = ((g as i128) * u - 1) / (kn as i128);
        (u as i64, v as i64)
    };
    let mut rows = Vec::with_capacity(n);
    let mut first: Vec<i64> = reduced.iter().map(|&v| g * v).collect();
    first.push(kn);
    rows.push(first);
    for row in inner.iter().skip(1) {
        let mut r = row.clone();
        r.push(0);
        rows.push(r);
    }
    let mut last: Vec<i64> = reduced.iter().map(|&r| v * r).collect();
    last.push(u);
    rows.push(last);
    rows
}

/// Completes a primitive vector (gcd 1, any sign) to a unimodular matrix with first row k.
pub fn complete_to_sl(k: &ModeVector) -> Result<UnimodularMatrix> {
    if k.gcd() != 1 {
        return Err(Error::NotAGenerator(k.0.clone()));
    }
    let a = complete_rows(&k.0);
    let qa = q_from_int(&a);
    let det = q_det(&qa);
    if det != BigRational::one() {
        return Err(Error::HypothesisViolated(format!(
            "completion of {k} has determinant {det}"
        )));
    }
    let inv = q_inverse(&qa).expect("unimodular");
    let a_inv = inv
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| {
                    debug_assert!(x.is_integer());
                    x.to_integer().to_i64().expect("inverse entry fits i64")
                })
                .collect()
        })
        .collect();
    Ok(UnimodularMatrix { k: k.clone(), a, a_inv })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnimodularBounds {
    pub k_inf: i64,
    pub a_inf: i64,
    pub a_hat_inf: i64,
    pub a_inv_inf: i64,
    pub a_inv_bound: f64,
    pub holds: bool,
}

impl UnimodularMatrix {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a_hat(&self) -> Vec<Vec<i64>> {
        self.a[1..].to_vec()
    }

    /// Â k ∈ Z^{n-1}.
    pub fn a_hat_k(&self) -> Vec<i64> {
        self.a[1..]
            .iter()
            .map(|row| row.iter().zip(&self.k.0).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn det(&self) -> BigRational {
        q_det(&q_from_int(&self.a))
    }

    pub fn bounds(&self) -> UnimodularBounds {
        let n = self.n();
        let k_inf = self.k.linf();
        let a_inf = max_abs(&self.a);
        let a_hat_inf = max_abs(&self.a[1..]);
        let a_inv_inf = max_abs(&self.a_inv);
        let a_inv_bound = ((n - 1) as f64).powf((n - 1) as f64 / 2.0) * (k_inf as f64).powi(n as i32 - 1);
        UnimodularBounds {
            k_inf,
            a_inf,
            a_hat_inf,
            a_inv_inf,
            a_inv_bound,
            holds: a_inf == k_inf && a_hat_inf <= k_inf && (a_inv_inf as f64) <= a_inv_bound,
        }
    }

    pub fn a_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.n(), |i, j| self.a[i][j] as f64)
    }

    pub fn a_inv_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.n(), |i, j| self.a_inv[i][j] as f64)
    }

    /// (y, x) ↦ (A^{-T} y, A x); the first angle becomes k·x.
    pub fn to_adapted(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let yt = self.a_inv_f64().transpose() * DMatrix::from_column_slice(y.len(), 1, y);
        let xt = self.a_f64() * DMatrix::from_column_slice(x.len(), 1, x);
        (yt.as_slice().to_vec(), xt.as_slice().to_vec())
    }

    /// (ỹ, x̃) ↦ (Aᵀ ỹ, A^{-1} x̃).
    pub fn from_adapted(&self, yt: &[f64], xt: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.a_f64().transpose() * DMatrix::from_column_slice(yt.len(), 1, yt);
        let x = self.a_inv_f64() * DMatrix::from_column_slice(xt.len(), 1, xt);
        (y.as_slice().to_vec(), x.as_slice().to_vec())
    }

    pub fn from_adapted_exact(&self, yt: &[BigRational], xt: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
        let a = q_from_int(&self.a);
        let a_inv = q_from_int(&self.a_inv);
        (q_mul_vec(&q_transpose(&a), yt), q_mul_vec(&a_inv, xt))
    }
}

/// U: identity except row 1, which carries −(Âk)ᵀ/|k|².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingMatrix {
    pub k: ModeVector,
    pub a_hat: Vec<Vec<i64>>,
    /// Numerators of row 1 past the diagonal, over the common denominator |k|².
    pub row_numerators: Vec<i64>,
    pub denominator: i64,
}

pub fn decoupling_matrix(um: &UnimodularMatrix) -> DecouplingMatrix {
    DecouplingMatrix {
        k: um.k.clone(),
        a_hat: um.a_hat(),
        row_numerators: um.a_hat_k().iter().map(|v| -v).collect(),
        denominator: um.k.norm2_sq(),
    }
}

impl DecouplingMatrix {
    pub fn n(&self) -> usize {
        self.k.dim()
    }

    fn with_row(&self, sign: i64) -> QMatrix {
        let mut u = q_identity(self.n());
        for (j, &num) in self.row_numerators.iter().enumerate() {
            u[0][j + 1] = BigRational::new(BigInt::from(sign * num), BigInt::from(self.denominator));
        }
        u
    }

    pub fn u(&self) -> QMatrix {
        self.with_row(1)
    }

    pub fn u_inv(&self) -> QMatrix {
        self.with_row(-1)
    }

    pub fn u_f64(&self) -> DMatrix<f64> {
        q_to_dmatrix(&self.u())
    }

    pub fn u_inv_f64(&self) -> DMatrix<f64> {
        q_to_dmatrix(&self.u_inv())
    }

    /// Entries of U as reduced "num/den" strings.
    pub fn u_strings(&self) -> Vec<Vec<String>> {
        self.u()
            .iter()
            .map(|row| row.iter().map(|x| x.to_string()).collect())
            .collect()
    }

    /// Spectral norms of U and U^{-1}.
    pub fn operator_norms(&self) -> (f64, f64) {
        let norm = |m: DMatrix<f64>| m.singular_values().max();
        (norm(self.u_f64()), norm(self.u_inv_f64()))
    }

    pub fn operator_bound(&self) -> f64 {
        (self.n() as f64).powf(1.5)
    }

    /// |AᵀUY|² − |k|²Y₁² − |Π⊥ÂᵀŶ|², exactly.
    pub fn decoupling_residual(&self, um: &UnimodularMatrix, y: &[BigRational]) -> BigRational {
        let a_t = q_transpose(&q_from_int(&um.a));
        let lhs_vec = q_mul_vec(&a_t, &q_mul_vec(&self.u(), y));
        let lhs = lhs_vec.iter().fold(BigRational::zero(), |acc, v| acc + v * v);
        let k: Vec<BigRational> = self.k.0.iter().map(|&v| q(v)).collect();
        let k2 = q(self.denominator);
        let a_hat_t = q_transpose(&q_from_int(&self.a_hat));
        let w = q_mul_vec(&a_hat_t, &y[1..]);
        let wk = w.iter().zip(&k).fold(BigRational::zero(), |acc, (a, b)| acc + a * b);
        let perp: Vec<BigRational> = w.iter().zip(&k).map(|(a, b)| a - &wk * b / &k2).collect();
        let perp_sq = perp.iter().fold(BigRational::zero(), |acc, v| acc + v * v);
        lhs - &k2 * &y[0] * &y[0] - perp_sq
    }
}

/// (Y, X) ↦ (UY, U^{-T}X).
pub fn apply_phi1(dm: &DecouplingMatrix, y: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let yy = dm.u_f64() * DMatrix::from_column_slice(y.len(), 1, y);
    let xx = dm.u_inv_f64().transpose() * DMatrix::from_column_slice(x.len(), 1, x);
    (yy.as_slice().to_vec(), xx.as_slice().to_vec())
}

pub fn apply_phi1_inverse(dm: &DecouplingMatrix, y: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let yy = dm.u_inv_f64() * DMatrix::from_column_slice(y.len(), 1, y);
    let xx = dm.u_f64().transpose() * DMatrix::from_column_slice(x.len(), 1, x);
    (yy.as_slice().to_vec(), xx.as_slice().to_vec())
}

pub fn apply_phi1_exact(
    dm: &DecouplingMatrix,
    y: &[BigRational],
    x: &[BigRational],
) -> (Vec<BigRational>, Vec<BigRational>) {
    (q_mul_vec(&dm.u(), y), q_mul_vec(&q_transpose(&dm.u_inv()), x))
}

pub fn apply_phi1_inverse_exact(
    dm: &DecouplingMatrix,
    y: &[BigRational],
    x: &[BigRational],
) -> (Vec<BigRational>, Vec<BigRational>) {
    (q_mul_vec(&dm.u_inv(), y), q_mul_vec(&q_transpose(&dm.u()), x))
}

/// JᵀΩJ − Ω for J = diag(U, U^{-T}); exactly zero for a symplectic map.
pub fn phi1_symplectic_defect(dm: &DecouplingMatrix) -> QMatrix {
    let n = dm.n();
    let mut j = vec![vec![BigRational::zero(); 2 * n]; 2 * n];
    let u = dm.u();
    let u_inv_t = q_transpose(&dm.u_inv());
    let mut omega = vec![vec![BigRational::zero(); 2 * n]; 2 * n];
    for a in 0..n {
        for b in 0..n {
            j[a][b] = u[a][b].clone();
            j[n + a][n + b] = u_inv_t[a][b].clone();
        }
        omega[a][n + a] = BigRational::one();
        omega[n + a][a] = -BigRational::one();
    }
    let lhs = q_mul(&q_mul(&q_transpose(&j), &omega), &j);
    lhs.iter()
        .zip(&omega)
        .map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| a - b).collect())
        .collect()
}

pub fn is_zero_matrix(m: &QMatrix) -> bool {
    m.iter().flatten().all(|x| x.is_zero())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BezoutReport {
    pub k: ModeVector,
    #[serde(rename = "A")]
    pub a: Vec<Vec<i64>>,
    #[serde(rename = "A_inv")]
    pub a_inv: Vec<Vec<i64>>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<String>>,
    pub det: String,
    pub bounds: UnimodularBounds,
    pub u_operator_norm: f64,
    pub u_inv_operator_norm: f64,
    pub operator_bound: f64,
    pub symplectic: bool,
}

pub fn bezout_report(k: &ModeVector) -> Result<BezoutReport> {
    let um = complete_to_sl(k)?;
    let dm = decoupling_matrix(&um);
    let (u_op, u_inv_op) = dm.operator_norms();
    Ok(BezoutReport {
        k: k.clone(),
        a: um.a.clone(),
        a_inv: um.a_inv.clone(),
        u: dm.u_strings(),
        det: um.det().to_string(),
        bounds: um.bounds(),
        u_operator_norm: u_op,
        u_inv_operator_norm: u_inv_op,
        operator_bound: dm.operator_bound(),
        symplectic: is_zero_matrix(&phi1_symplectic_defect(&dm)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::generators;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mv(v: &[i64]) -> ModeVector {
        ModeVector(v.to_vec())
    }

    fn random_q<R: Rng>(rng: &mut R) -> BigRational {
        BigRational::new(
            BigInt::from(rng.gen_range(-50i64..=50)),
            BigInt::from(rng.gen_range(1i64..=17)),
        )
    }

    #[test]
    fn unit_vector_gives_identity() {
        for n in 1..5 {
            let um = complete_to_sl(&ModeVector::unit(n, 0)).unwrap();
            let id: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect();
            assert_eq!(um.a, id);
            assert!(decoupling_matrix(&um).row_numerators.iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn two_three() {
        let um = complete_to_sl(&mv(&[2, 3])).unwrap();
        assert_eq!(um.a, vec![vec![2, 3], vec![1, 2]]);
        assert_eq!(um.a_inv, vec![vec![2, -3], vec![-1, 2]]);
        let dm = decoupling_matrix(&um);
        assert_eq!(dm.u_strings(), vec![vec!["1", "-8/13"], vec!["0", "1"]]);
        let y = [q(1), q(0)];
        assert!(dm.decoupling_residual(&um, &y).is_zero());
        let a_t_u_y = q_mul_vec(&q_transpose(&q_from_int(&um.a)), &q_mul_vec(&dm.u(), &y));
        let sq = a_t_u_y.iter().fold(BigRational::zero(), |acc, v| acc + v * v);
        assert_eq!(sq, q(13));
    }

    #[test]
    fn brute_force_oracle_two_three() {
        // some Â with |Â|_∞ ≤ 3 completes (2,3); ours is among them
        let mut found = Vec::new();
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                if 2 * b - 3 * a == 1 {
                    found.push(vec![a, b]);
                }
            }
        }
        let um = complete_to_sl(&mv(&[2, 3])).unwrap();
        assert!(found.contains(&um.a[1]));
    }

    #[test]
    fn rejects_non_generators() {
        assert!(matches!(complete_to_sl(&mv(&[2, 4])), Err(Error::NotAGenerator(_))));
        assert!(complete_to_sl(&mv(&[0, 0])).is_err());
    }

    #[test]
    fn exhaustive_small_generators() {
        for n in 2..=4 {
            for k in generators(n, 8.0) {
                let um = complete_to_sl(&k).unwrap();
                assert_eq!(um.a[0], k.0);
                assert!(um.det().is_one(), "{k}");
                let b = um.bounds();
                assert!(b.holds, "{k}: {b:?}");
                let dm = decoupling_matrix(&um);
                let (u_op, u_inv_op) = dm.operator_norms();
                assert!(
                    u_op <= dm.operator_bound() + 1e-12 && u_inv_op <= dm.operator_bound() + 1e-12,
                    "{k}"
                );
            }
        }
    }

    #[test]
    fn exact_identities_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [mv(&[2, 3]), mv(&[3, -2, 5]), mv(&[1, 4, -6, 2]), mv(&[0, 0, -1])] {
            let um = complete_to_sl(&k).unwrap();
            let dm = decoupling_matrix(&um);
            assert!(is_zero_matrix(&phi1_symplectic_defect(&dm)));
            let n = k.dim();
            for _ in 0..100 {
                let y: Vec<BigRational> = (0..n).map(|_| random_q(&mut rng)).collect();
                let x: Vec<BigRational> = (0..n).map(|_| random_q(&mut rng)).collect();
                assert!(dm.decoupling_residual(&um, &y).is_zero());
                let (yy, xx) = apply_phi1_exact(&dm, &y, &x);
                let (y2, x2) = apply_phi1_inverse_exact(&dm, &yy, &xx);
                assert_eq!((y2, x2), (y.clone(), x.clone()));
                let a = q_from_int(&um.a);
                let xt = q_mul_vec(&a, &x);
                let kx =
                    k.0.iter()
                        .zip(&x)
                        .fold(BigRational::zero(), |acc, (a, b)| acc + q(*a) * b);
                assert_eq!(xt[0], kx);
                let (_, x_back) = um.from_adapted_exact(&y, &xt);
                assert_eq!(x_back, x);
            }
        }
    }

    #[test]
    fn float_maps_round_trip() {
        let um = complete_to_sl(&mv(&[3, -2, 5])).unwrap();
        let dm = decoupling_matrix(&um);
        let (y, x) = (vec![0.1, -0.4, 0.3], vec![1.0, 2.0, -0.5]);
        let (yy, xx) = apply_phi1(&dm, &y, &x);
        let (y2, x2) = apply_phi1_inverse(&dm, &yy, &xx);
        for i in 0..3 {
            assert!((y2[i] - y[i]).abs() < 1e-14 && (x2[i] - x[i]).abs() < 1e-14);
        }
        let (yt, xt) = um.to_adapted(&y, &x);
        let (y3, x3) = um.from_adapted(&yt, &xt);
        for i in 0..3 {
            assert!((y3[i] - y[i]).abs() < 1e-12 && (x3[i] - x[i]).abs() < 1e-12);
        }
        assert!((xt[0] - k_dot(&um.k, &x)).abs() < 1e-14);
    }

    fn k_dot(k: &ModeVector, x: &[f64]) -> f64 {
        k.dot(x)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn random_generators_satisfy_bounds(raw in prop::collection::vec(-16i64..=16, 2..=4)) {
            let k = ModeVector(raw);
            prop_assume!(k.l1() <= 50 && k.gcd() == 1);
            let um = complete_to_sl(&k).unwrap();
            prop_assert!(um.det().is_one());
            prop_assert!(um.bounds().holds);
            let dm = decoupling_matrix(&um);
            let (u_op, u_inv_op) = dm.operator_norms();
            prop_assert!(u_op <= dm.operator_bound() + 1e-12);
            prop_assert!(u_inv_op <= dm.operator_bound() + 1e-12);
        }
    }
}
