//! Piecewise-constant flux limiters.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Adjacent cells closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Slack on the time range accepted by [`Control::integrate`].
const TIME_TOL: f64 = 1e-12;

/// `A(t) = values[i]` on `[times[i], times[i + 1])`, with the last cell
/// closed at `T`.
///
/// Stored in canonical form: no two neighbouring cells share a value.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    times: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Control {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidControl("need at least one cell".into()));
        }
        if times.len() != values.len() + 1 {
            return Err(Error::InvalidControl(format!(
                "{} cells need {} times, got {}",
                values.len(),
                values.len() + 1,
                times.len()
            )));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidControl("times and values must be finite".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidControl(format!("first time must be 0, got {}", times[0])));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidControl("times must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|&&v| v > MERGE_TOL) {
            return Err(Error::InvalidControl(format!("values must be <= 0, got {v}")));
        }
        let mut ct = Vec::with_capacity(times.len());
        let mut cv: Vec<f64> = Vec::with_capacity(values.len());
        ct.push(0.0);
        for (i, &v) in values.iter().enumerate() {
            let v = v.min(0.0);
            match cv.last() {
                Some(&last) if (last - v).abs() <= MERGE_TOL => {
                    *ct.last_mut().unwrap() = times[i + 1];
                }
                _ => {
                    cv.push(v);
                    ct.push(times[i + 1]);
                }
            }
        }
        let mut cumulative = Vec::with_capacity(ct.len());
        cumulative.push(0.0);
        for i in 0..cv.len() {
            let prev = cumulative[i];
            cumulative.push(prev + cv[i] * (ct[i + 1] - ct[i]));
        }
        Ok(Self { times: ct, values: cv, cumulative })
    }

    /// `A = value` on `[0, T]`.
    pub fn constant(horizon: f64, value: f64) -> Result<Self> {
        Self::new(alloc::vec![0.0, horizon], alloc::vec![value])
    }

    /// Equal-width cells on `[0, T]`.
    pub fn uniform(horizon: f64, values: &[f64]) -> Result<Self> {
        Self::new(uniform_times(horizon, values.len()), values.to_vec())
    }

    /// `2n` equal cells alternating `0, A0, 0, A0, ...`.
    pub fn weak_star_square_wave(n: usize, horizon: f64, a0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidControl("square wave needs n >= 1".into()));
        }
        let values: Vec<f64> = (0..2 * n).map(|i| if i % 2 == 0 { 0.0 } else { a0 }).collect();
        Self::uniform(horizon, &values)
    }

    /// Clips every value into `[A0, 0]` and builds the control on `times`.
    pub fn clamp_project(times: Vec<f64>, values: &[f64], a0: f64) -> Result<Self> {
        Self::new(times, clamp_values(values, a0))
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Cell boundaries `0 = tau_0 < ... < tau_k = T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    /// Interior switch times.
    pub fn switch_times(&self) -> &[f64] {
        &self.times[1..self.times.len() - 1]
    }

    /// `A(t)`, right-continuous; `t` is clamped to `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        self.values[i.clamp(1, self.values.len()) - 1]
    }

    /// Checks every value lies in `[A0, 0]`.
    pub fn validate(&self, a0: f64) -> Result<()> {
        if let Some(v) = self.values.iter().find(|&&v| v < a0 - MERGE_TOL) {
            return Err(Error::InvalidControl(format!("value {v} is below A0 = {a0}")));
        }
        Ok(())
    }

    pub fn is_bangbang(&self, a0: f64) -> bool {
        self.values.iter().all(|&v| v.abs() <= MERGE_TOL || (v - a0).abs() <= MERGE_TOL)
    }

    /// `int_a^b A(s) ds`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(a >= -TIME_TOL && b <= horizon + TIME_TOL && a <= b + TIME_TOL) {
            return Err(Error::Domain {
                what: "integration interval",
                value: if a < 0.0 { a } else { b },
                lo: 0.0,
                hi: horizon,
            });
        }
        Ok(self.primitive(b) - self.primitive(a))
    }

    /// `int_0^t A(s) ds` with `t` clamped to `[0, T]`.
    pub fn primitive(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.values.len());
        self.cumulative[i - 1] + self.values[i - 1] * (t - self.times[i - 1])
    }

    /// `int_0^T s A(s) ds`.
    pub fn first_moment(&self) -> f64 {
        self.values.iter().zip(self.times.windows(2)).map(|(v, w)| 0.5 * v * (w[1] * w[1] - w[0] * w[0])).sum()
    }
}

pub(crate) fn uniform_times(horizon: f64, cells: usize) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=cells).map(|i| horizon * i as f64 / cells as f64).collect();
    times[cells] = horizon;
    times
}

/// Clips values into `[A0, 0]`.
pub fn clamp_values(values: &[f64], a0: f64) -> Vec<f64> {
    values.iter().map(|v| v.clamp(a0, 0.0)).collect()
}
