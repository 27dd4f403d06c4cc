//! Field-angle control signal: knot values on a uniform grid with
//! piecewise-linear interpolation.
//!
//! Angles are stored unwrapped; the dynamics depend on them only through
//! sin/cos, so a control and its 2 pi shift drive the chain identically and
//! no clipping to [0, 2 pi] is applied.

use crate::error::{Error, Result};

/// Piecewise-linear control signal phi(t) on `n_knots` uniform knots
/// spanning [t0, tf] inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    t0: f64,
    tf: f64,
    values: Vec<f64>,
}

impl ControlSignal {
    pub fn new(t0: f64, tf: f64, values: Vec<f64>) -> Result<Self> {
        if !(tf > t0) {
            return Err(Error::InvalidParameter {
                name: "tf",
                value: tf,
            });
        }
        if values.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "n_knots",
                value: values.len() as f64,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "knot_value",
                value: f64::NAN,
            });
        }
        Ok(ControlSignal { t0, tf, values })
    }

    /// Constant control at angle `c`.
    pub fn constant(t0: f64, tf: f64, n_knots: usize, c: f64) -> Result<Self> {
        ControlSignal::new(t0, tf, vec![c; n_knots])
    }

    /// Samples `f` at the knot times.
    pub fn from_fn(t0: f64, tf: f64, n_knots: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dt = (tf - t0) / (n_knots.max(2) - 1) as f64;
        ControlSignal::new(t0, tf, (0..n_knots).map(|m| f(t0 + m as f64 * dt)).collect())
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn n_knots(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn knot_spacing(&self) -> f64 {
        (self.tf - self.t0) / (self.values.len() - 1) as f64
    }

    pub fn knot_time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.knot_spacing()
    }

    /// Piecewise-linear evaluation; t is clamped to [t0, tf] so the ends
    /// return the end knots exactly.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        if t <= self.t0 {
            return self.values[0];
        }
        if t >= self.tf {
            return self.values[n - 1];
        }
        let h = self.knot_spacing();
        let pos = (t - self.t0) / h;
        let j = (pos.floor() as usize).min(n - 2);
        let theta = pos - j as f64;
        self.values[j] * (1.0 - theta) + self.values[j + 1] * theta
    }

    /// Hat (nodal basis) function of knot m evaluated at time t; the
    /// interpolant is `sum_m values[m] * hat(m, t)`.
    pub fn hat(&self, m: usize, t: f64) -> f64 {
        let h = self.knot_spacing();
        let tm = self.knot_time(m);
        let d = (t.clamp(self.t0, self.tf) - tm).abs();
        (1.0 - d / h).max(0.0)
    }

    /// New signal with knot values `values + alpha * direction`.
    pub fn add_scaled(&self, direction: &[f64], alpha: f64) -> Self {
        assert_eq!(direction.len(), self.values.len());
        ControlSignal {
            t0: self.t0,
            tf: self.tf,
            values: self
                .values
                .iter()
                .zip(direction)
                .map(|(v, d)| v + alpha * d)
                .collect(),
        }
    }

    /// Mirror-image control 2 pi - phi(t).
    pub fn reflected(&self) -> Self {
        ControlSignal {
            t0: self.t0,
            tf: self.tf,
            values: self
                .values
                .iter()
                .map(|v| 2.0 * std::f64::consts::PI - v)
                .collect(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ControlSignal::new(self.t0, self.tf, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_hit_end_knots() {
        let c = ControlSignal::new(0.1, 0.5, vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(c.eval(0.1), 1.0);
        assert_eq!(c.eval(0.5), 2.0);
        assert_eq!(c.eval(-1.0), 1.0);
        assert_eq!(c.eval(9.0), 2.0);
    }

    #[test]
    fn linear_interpolation_between_knots() {
        let c = ControlSignal::new(0.0, 1.0, vec![0.0, 2.0, 0.0]).unwrap();
        assert!((c.eval(0.25) - 1.0).abs() < 1e-15);
        assert!((c.eval(0.5) - 2.0).abs() < 1e-15);
        assert!((c.eval(0.75) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hats_partition_unity_and_reproduce_values() {
        let c = ControlSignal::new(0.0, 1.0, vec![0.3, -1.0, 2.5, 0.9]).unwrap();
        for &t in &[0.0, 0.11, 0.37, 0.5, 0.81, 1.0] {
            let sum: f64 = (0..4).map(|m| c.hat(m, t)).sum();
            assert!((sum - 1.0).abs() < 1e-14);
            let interp: f64 = (0..4).map(|m| c.values()[m] * c.hat(m, t)).sum();
            assert!((interp - c.eval(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(ControlSignal::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(ControlSignal::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(ControlSignal::new(0.0, 1.0, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn reflection_is_involutive() {
        let c = ControlSignal::new(0.0, 1.0, vec![0.5, 1.5, 2.5]).unwrap();
        let back = c.reflected().reflected();
        for (a, b) in c.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
