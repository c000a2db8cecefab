//! Adaptive Dormand–Prince 5(4) integrator.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub state: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
}

/// Integrates u' = f(t, u) from t0 to t1.
pub fn integrate<F>(f: F, u0: &[f64], t0: f64, t1: f64, tol: Tolerance) -> Result<Solution>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let dim = u0.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Solution {
            state: u0.to_vec(),
            steps: 0,
            rejected: 0,
        });
    }
    let dir = span.signum();
    let mut t = t0;
    let mut u = u0.to_vec();
    let mut h = span.abs() * 0.01;
    let mut steps = 0;
    let mut rejected = 0;
    let mut k: Vec<Vec<f64>> = vec![f(t, &u); 1];
    k.resize(7, vec![0.0; dim]);
    let mut stage = vec![0.0; dim];
    while (t1 - t) * dir > 0.0 {
        if steps + rejected > tol.max_steps {
            return Err(Error::Divergence(format!("step limit reached at t = {t}")));
        }
        h = h.min((t1 - t).abs());
        for s in 1..7 {
            for d in 0..dim {
                stage[d] = u[d] + dir * h * (0..s).map(|j| A[s][j] * k[j][d]).sum::<f64>();
            }
            k[s] = f(t + dir * h * C[s], &stage);
        }
        let mut err = 0.0f64;
        let mut next = vec![0.0; dim];
        for d in 0..dim {
            next[d] = u[d] + dir * h * (0..7).map(|j| B5[j] * k[j][d]).sum::<f64>();
            let low = u[d] + dir * h * (0..7).map(|j| B4[j] * k[j][d]).sum::<f64>();
            let scale = tol.atol + tol.rtol * u[d].abs().max(next[d].abs());
            err = err.max(((next[d] - low) / scale).abs());
        }
        if !err.is_finite() {
            return Err(Error::Divergence("non-finite state in integration".into()));
        }
        if err <= 1.0 {
            t += dir * h;
            u = next;
            k[0] = k[6].clone();
            steps += 1;
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * span.abs() {
            return Err(Error::Divergence(format!("step size underflow at t = {t}")));
        }
    }
    Ok(Solution {
        state: u,
        steps,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_period() {
        let sol = integrate(
            |_, u| vec![u[1], -u[0]],
            &[1.0, 0.0],
            0.0,
            2.0 * std::f64::consts::PI,
            Tolerance::default(),
        )
        .unwrap();
        assert_relative_eq!(sol.state[0], 1.0, epsilon = 1e-10);
        assert!(sol.state[1].abs() < 1e-10);
    }

    #[test]
    fn backward_integration_inverts() {
        let f = |_: f64, u: &[f64]| vec![u[1], -u[0].sin()];
        let fwd = integrate(f, &[0.3, 0.1], 0.0, 1.0, Tolerance::default()).unwrap();
        let back = integrate(f, &fwd.state, 1.0, 0.0, Tolerance::default()).unwrap();
        assert_relative_eq!(back.state[0], 0.3, epsilon = 1e-11);
        assert_relative_eq!(back.state[1], 0.1, epsilon = 1e-11);
    }
}
