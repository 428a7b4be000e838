//! Dynamic-programming oracle for the value function.
//!
//! Works backwards from nothing but the definition of the path cost: time is
//! cut into `nt` steps and the value after each step is carried on `nx + 1`
//! space nodes (plus a node at the junction). Between nodes the previous
//! value is interpolated linearly, so each step is an exact minimization of
//! `dt L(slope) + (piecewise-linear value)` over one-sided moves, and the
//! junction node may also wait a step at cost `-int A`. Nothing here shares
//! code with the dwell decomposition of [`crate::hj`] beyond the one-piece
//! Hopf-Lax minimizer.

use alloc::vec::Vec;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::flux::{InitialData, JunctionModel, Segment, Side};
use crate::hj::segment_hopf_lax;

/// Smallest accepted lattice in either direction.
pub const MIN_RESOLUTION: usize = 8;

/// Value at `(x, t)` on an `nx x nt` lattice.
///
/// The space window is centred on `x` and wide enough that nothing outside it
/// can influence the result: `x +- (1.25 c t + 2 dx)` with `c` the largest
/// characteristic speed.
pub fn brute_force_value(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    x: f64,
    t: f64,
    nx: usize,
    nt: usize,
) -> Result<f64> {
    if nx < MIN_RESOLUTION || nt < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall { nx, nt });
    }
    u0.validate(model)?;
    control.validate(model.a0())?;
    if !(t > 0.0 && t <= control.horizon() * (1.0 + 1e-12)) {
        return Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: control.horizon() });
    }
    if !x.is_finite() {
        return Err(Error::Domain { what: "x", value: x, lo: f64::NEG_INFINITY, hi: f64::INFINITY });
    }
    let c = model.max_speed();
    let core = 1.25 * c * t;
    let dx = 2.0 * core / (nx as f64 - 4.0);
    let half = core + 2.0 * dx;
    let mut nodes: Vec<f64> = (0..=nx).map(|k| x - half + 2.0 * half * k as f64 / nx as f64).collect();
    if nodes[0] < 0.0 && nodes[nx] > 0.0 {
        let k = nodes.partition_point(|&v| v < 0.0);
        let h = nodes[1] - nodes[0];
        if (nodes[k] - 0.0).abs() < 1e-9 * h {
            nodes[k] = 0.0;
        } else if k > 0 && nodes[k - 1].abs() < 1e-9 * h {
            nodes[k - 1] = 0.0;
        } else {
            nodes.insert(k, 0.0);
        }
    }
    let dt = t / nt as f64;
    let lattice = Lattice { model, nodes: &nodes, dt };
    let mut u: Vec<f64> = nodes.iter().map(|&y| u0.eval(y)).collect();
    let mut next = u.clone();
    for n in 0..nt - 1 {
        let wait = control.primitive(dt * (n + 1) as f64) - control.primitive(dt * n as f64);
        for (k, &xk) in nodes.iter().enumerate() {
            next[k] = lattice.step(xk, &u, wait);
        }
        core::mem::swap(&mut u, &mut next);
    }
    let wait = control.primitive(t) - control.primitive(dt * (nt - 1) as f64);
    Ok(lattice.step(x, &u, wait))
}

struct Lattice<'a> {
    model: &'a JunctionModel,
    nodes: &'a [f64],
    dt: f64,
}

impl Lattice<'_> {
    /// Value at `x` after one step from the nodal values `u`.
    fn step(&self, x: f64, u: &[f64], wait: f64) -> f64 {
        if x == 0.0 {
            let mut best = self.moves(0.0, Side::Left, u).min(self.moves(0.0, Side::Right, u));
            if let Some(k) = self.nodes.iter().position(|&v| v == 0.0) {
                best = best.min(u[k] - wait);
            }
            best
        } else {
            self.moves(x, Side::of(x), u)
        }
    }

    /// Cheapest one-step move into `x` from points on `side`.
    fn moves(&self, x: f64, side: Side, u: &[f64]) -> f64 {
        let ham = self.model.side(side);
        let mut lo = x - self.dt * ham.slope_at_zero();
        let mut hi = x - self.dt * ham.slope_at_capacity();
        match side {
            Side::Left => hi = hi.min(0.0),
            Side::Right => lo = lo.max(0.0),
        }
        if lo > hi {
            return f64::INFINITY;
        }
        let nodes = self.nodes;
        let last = nodes.len() - 2;
        let first = nodes.partition_point(|&v| v <= lo).clamp(1, last + 1) - 1;
        let mut best = f64::INFINITY;
        for j in first..=last {
            let (a, b) = (nodes[j], nodes[j + 1]);
            if a > hi {
                break;
            }
            // The outermost cells continue linearly past the window.
            let a = if j == 0 { f64::NEG_INFINITY } else { a };
            let b = if j == last { f64::INFINITY } else { b };
            let (a, b) = (a.max(lo), b.min(hi));
            let (na, nb) = (nodes[j], nodes[j + 1]);
            let slope = (u[j + 1] - u[j]) / (nb - na);
            let seg = Segment { lo: a, hi: b, slope, intercept: u[j] - slope * na };
            if seg.lo > seg.hi {
                continue;
            }
            best = best.min(segment_hopf_lax(&seg, ham, x, self.dt).0);
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn free_flow_target() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.8).unwrap();
        let a = Control::constant(6.0, -0.25).unwrap();
        let v = brute_force_value(&m, &u0, &a, 0.3, 1.0, 200, 200).unwrap();
        assert!((v + 0.08).abs() < 0.02, "{v}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(0.0).unwrap().allow_boundary_slopes();
        let a = Control::constant(2.0, 0.0).unwrap();
        for &(x, t) in &[(0.3, 1.0), (0.0, 2.0), (1.5, 0.5)] {
            assert_eq!(brute_force_value(&m, &u0, &a, x, t, 16, 16).unwrap(), 0.0);
        }
    }

    #[test]
    fn resolution_floor() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.8).unwrap();
        let a = Control::constant(2.0, 0.0).unwrap();
        assert_eq!(brute_force_value(&m, &u0, &a, 0.3, 1.0, 7, 50), Err(Error::ResolutionTooSmall { nx: 7, nt: 50 }));
        assert!(brute_force_value(&m, &u0, &a, 0.3, 1.0, 8, 8).is_ok());
    }

    #[test]
    fn blocked_junction_queue() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::new(vec![], vec![-0.8]).unwrap();
        let a = Control::constant(2.0, 0.0).unwrap();
        // u = min(-x, -0.8 x + 0.16 t) on the left.
        let v = brute_force_value(&m, &u0, &a, -0.1, 1.0, 200, 200).unwrap();
        assert!((v - 0.1).abs() < 0.02, "{v}");
    }
}
