//! Value function of the controlled junction problem.
//!
//! A minimizing path is either a straight line that never touches the
//! junction, or it reaches `x = 0` at time `a`, stays there until `b` and
//! then runs straight to `(x, t)`. The dwell family therefore costs
//!
//! ```text
//! w(a) - int_a^b A + lastleg(b)
//! ```
//!
//! where `w(a)` is the cheapest way to reach the junction at time `a` from the
//! initial datum. Writing `I(s) = int_0^s A` and `G(a) = w(a) + I(a)`, the
//! inner minimization over `a` is a running minimum of `G`, so
//! `u(0, b) = min_{a <= b} G(a) - I(b)` can be tabulated once per control and
//! reused for every query point.

use alloc::vec::Vec;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flux::{Hamiltonian, InitialData, JunctionModel, Segment, Side};
use crate::math::{bisect_first_true, bisect_last_true, brent};
use crate::mesh::{Mesh, ValueField};

/// Relative slack used to decide that two path costs tie.
pub const TIE_REL: f64 = 1e-8;

/// Intervals of the uniform part of the tabulation grid on `[0, T]`.
const TABLE_INTERVALS: usize = 512;

/// Discrete minima of the dwell objective refined per query.
const POLISHED_MINIMA: usize = 2;

const BRENT_XTOL: f64 = 1e-11;
const BRENT_ITERS: usize = 100;
const BISECT_ITERS: usize = 64;

/// Which optimal path to report when several tie.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Selection {
    /// Earliest arrival at the junction.
    MostAtZero,
    /// Latest arrival at the junction.
    LeastAtZero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathKind {
    /// Affine from `(y, 0)` to `(x, t)` without crossing the junction.
    Straight { y: f64 },
    /// Affine from `(y, 0)` to `(0, a)`, at rest on `[a, b]`, affine to `(x, t)`.
    Dwell { y: f64, a: f64, b: f64 },
}

/// A minimizing path together with its cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryDescriptor {
    pub x: f64,
    pub t: f64,
    pub kind: PathKind,
    pub cost: f64,
}

impl TrajectoryDescriptor {
    /// Starting point at time 0.
    pub fn start(&self) -> f64 {
        match self.kind {
            PathKind::Straight { y } | PathKind::Dwell { y, .. } => y,
        }
    }

    /// `(a, b)` for a dwell path.
    pub fn dwell_interval(&self) -> Option<(f64, f64)> {
        match self.kind {
            PathKind::Straight { .. } => None,
            PathKind::Dwell { a, b, .. } => Some((a, b)),
        }
    }

    /// Whether the path sits at the junction at time `s`.
    pub fn dwells_at(&self, s: f64) -> bool {
        match self.kind {
            PathKind::Straight { y } => (y == 0.0 && s == 0.0) || (self.x == 0.0 && s == self.t),
            PathKind::Dwell { a, b, .. } => a <= s && s <= b,
        }
    }

    /// Position of the path at time `s` in `[0, t]`.
    pub fn position(&self, s: f64) -> f64 {
        let lerp = |p0: f64, t0: f64, p1: f64, t1: f64| {
            if t1 <= t0 {
                p1
            } else {
                p0 + (p1 - p0) * (s - t0) / (t1 - t0)
            }
        };
        match self.kind {
            PathKind::Straight { y } => lerp(y, 0.0, self.x, self.t),
            PathKind::Dwell { y, a, b } => {
                if s <= a {
                    lerp(y, 0.0, 0.0, a)
                } else if s <= b {
                    0.0
                } else {
                    lerp(0.0, b, self.x, self.t)
                }
            }
        }
    }

    /// Checks the structural invariants of the descriptor.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            PathKind::Straight { y } => y * self.x >= 0.0,
            PathKind::Dwell { y, a, b } => {
                let ordered = 0.0 <= a && a <= b && b <= self.t;
                let start = if a > 0.0 { y != 0.0 } else { y == 0.0 };
                let end = b < self.t || self.x == 0.0;
                ordered && start && end
            }
        }
    }
}

/// Minimizes `dur L((x - y) / dur) + u0(y)` over `y` in one affine piece of
/// `u0`. The objective is convex in `y` with stationary point
/// `y = x - dur H'(slope)`, so clipping it to the piece is exact.
///
/// Slopes outside `[-R, 0]` make the objective monotone in `y`; the
/// minimizer then sits at an end of a bounded piece.
pub(crate) fn segment_hopf_lax(seg: &Segment, ham: &Hamiltonian, x: f64, dur: f64) -> (f64, f64) {
    let y = if seg.slope > 0.0 && seg.lo.is_finite() {
        seg.lo
    } else if seg.slope < -ham.capacity() && seg.hi.is_finite() {
        seg.hi
    } else {
        let speed = ham.derivative(seg.slope.clamp(-ham.capacity(), 0.0));
        (x - dur * speed).clamp(seg.lo, seg.hi)
    };
    (dur * ham.lagrangian((x - y) / dur) + seg.eval(y), y)
}

/// Precomputed solver for one `(model, u0, A)` triple.
#[derive(Clone, Debug)]
pub struct JunctionSolver<'a> {
    model: &'a JunctionModel,
    u0: &'a InitialData,
    control: &'a Control,
    grid: Vec<f64>,
    g_grid: Vec<f64>,
    v_grid: Vec<f64>,
    minima: Vec<f64>,
    /// Running minimum of `G` over `minima[..=k]`, with its argmin.
    prefix: Vec<(f64, f64)>,
}

impl<'a> JunctionSolver<'a> {
    pub fn new(model: &'a JunctionModel, u0: &'a InitialData, control: &'a Control) -> Result<Self> {
        u0.validate(model)?;
        control.validate(model.a0())?;
        let horizon = control.horizon();
        let mut grid: Vec<f64> = (0..=TABLE_INTERVALS).map(|k| horizon * k as f64 / TABLE_INTERVALS as f64).collect();
        grid[TABLE_INTERVALS] = horizon;
        grid.extend_from_slice(control.switch_times());
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon);
        let mut solver = Self {
            model,
            u0,
            control,
            grid,
            g_grid: Vec::new(),
            v_grid: Vec::new(),
            minima: Vec::new(),
            prefix: Vec::new(),
        };
        solver.g_grid = solver.grid.iter().map(|&a| solver.g(a)).collect();
        solver.tabulate_minima();
        solver.v_grid = solver.grid.iter().map(|&b| solver.junction_value(b)).collect();
        Ok(solver)
    }

    fn tabulate_minima(&mut self) {
        let (grid, g) = (&self.grid, &self.g_grid);
        let n = grid.len();
        let mut found: Vec<(f64, f64)> = alloc::vec![(0.0, g[0])];
        for k in 1..n {
            let left_ok = g[k] <= g[k - 1];
            let right_ok = k + 1 == n || g[k] <= g[k + 1];
            if !(left_ok && right_ok) {
                continue;
            }
            let hi = if k + 1 == n { grid[k] } else { grid[k + 1] };
            let m = brent(|a| self.g(a), grid[k - 1], hi, BRENT_XTOL, BRENT_ITERS);
            found.push(if m.fx < g[k] { (m.x, m.fx) } else { (grid[k], g[k]) });
        }
        found.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut prefix = Vec::with_capacity(found.len());
        let mut best = (f64::INFINITY, 0.0);
        for &(a, v) in &found {
            if v < best.0 {
                best = (v, a);
            }
            prefix.push(best);
        }
        self.minima = found.into_iter().map(|p| p.0).collect();
        self.prefix = prefix;
    }

    pub fn model(&self) -> &JunctionModel {
        self.model
    }

    pub fn initial_data(&self) -> &InitialData {
        self.u0
    }

    pub fn control(&self) -> &Control {
        self.control
    }

    pub fn horizon(&self) -> f64 {
        self.control.horizon()
    }

    /// Cheapest arrival at the junction at time `a`, and the start point.
    fn free_at_zero(&self, a: f64) -> (f64, f64) {
        if a <= 0.0 {
            return (self.u0.eval(0.0), 0.0);
        }
        let mut best = (f64::INFINITY, 0.0);
        for seg in self.u0.segments() {
            let c = segment_hopf_lax(seg, self.model.side(seg.side()), 0.0, a);
            if c.0 < best.0 {
                best = c;
            }
        }
        best
    }

    /// Best straight path ending at `x != 0` at time `t`.
    fn straight(&self, x: f64, t: f64) -> (f64, f64) {
        let side = Side::of(x);
        let ham = self.model.side(side);
        let mut best = (f64::INFINITY, 0.0);
        for seg in self.u0.side_segments(side) {
            let c = segment_hopf_lax(seg, ham, x, t);
            if c.0 < best.0 {
                best = c;
            }
        }
        best
    }

    fn g(&self, a: f64) -> f64 {
        self.free_at_zero(a).0 + self.control.primitive(a)
    }

    /// `min_{a <= b} G(a)` and its argmin.
    fn prefix_min(&self, b: f64) -> (f64, f64) {
        let k = self.minima.partition_point(|&a| a <= b);
        let tab = self.prefix[k.max(1) - 1];
        let gb = self.g(b);
        if gb < tab.0 {
            (gb, b)
        } else {
            tab
        }
    }

    /// `u^A(0, b)`.
    pub fn junction_value(&self, b: f64) -> f64 {
        self.prefix_min(b).0 - self.control.primitive(b)
    }

    fn lastleg(&self, b: f64, x: f64, t: f64) -> f64 {
        let d = t - b;
        d * self.model.side(Side::of(x)).lagrangian(x / d)
    }

    /// Latest useful departure time from the junction toward `x`.
    fn departure_cap(&self, x: f64, t: f64) -> f64 {
        (t - x.abs() / self.model.saturation_speed(x)).clamp(0.0, t)
    }

    fn dwell_objective(&self, b: f64, x: f64, t: f64) -> f64 {
        self.junction_value(b) + self.lastleg(b, x, t)
    }

    /// Grid times not exceeding `cap`, followed by `cap` itself.
    fn departure_candidates(&self, x: f64, t: f64, cap: f64) -> (Vec<f64>, Vec<f64>) {
        let k = self.grid.partition_point(|&b| b <= cap);
        let mut bs: Vec<f64> = self.grid[..k].to_vec();
        let mut fs: Vec<f64> = (0..k).map(|i| self.v_grid[i] + self.lastleg(self.grid[i], x, t)).collect();
        if bs.last() != Some(&cap) {
            bs.push(cap);
            fs.push(self.dwell_objective(cap, x, t));
        }
        (bs, fs)
    }

    /// Minimum of the dwell family for `x != 0`: `(cost, b)`.
    fn best_dwell(&self, x: f64, t: f64) -> (f64, f64) {
        let cap = self.departure_cap(x, t);
        let (bs, fs) = self.departure_candidates(x, t, cap);
        let n = bs.len();
        let mut best = (fs[0], bs[0]);
        let mut locals: Vec<usize> = Vec::new();
        for i in 0..n {
            if fs[i] < best.0 {
                best = (fs[i], bs[i]);
            }
            let left_ok = i == 0 || fs[i] <= fs[i - 1];
            let right_ok = i + 1 == n || fs[i] <= fs[i + 1];
            if left_ok && right_ok {
                locals.push(i);
            }
        }
        locals.sort_by(|&i, &j| fs[i].total_cmp(&fs[j]));
        for &i in locals.iter().take(POLISHED_MINIMA) {
            let lo = bs[i.saturating_sub(1)];
            let hi = bs[(i + 1).min(n - 1)];
            if hi <= lo {
                continue;
            }
            let m = brent(|b| self.dwell_objective(b, x, t), lo, hi, BRENT_XTOL, BRENT_ITERS);
            if m.fx < best.0 {
                best = (m.fx, m.x);
            }
        }
        best
    }

    fn check_time(&self, x: f64, t: f64) -> Result<()> {
        let horizon = self.horizon();
        if !x.is_finite() {
            return Err(Error::Domain { what: "x", value: x, lo: f64::NEG_INFINITY, hi: f64::INFINITY });
        }
        if !(t > 0.0 && t <= horizon * (1.0 + 1e-12)) {
            return Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: horizon });
        }
        Ok(())
    }

    fn dwell_descriptor(&self, x: f64, t: f64, a: f64, b: f64) -> TrajectoryDescriptor {
        let y = self.free_at_zero(a).1;
        let a = if y == 0.0 { 0.0 } else { a };
        let mut d = TrajectoryDescriptor { x, t, kind: PathKind::Dwell { y, a, b }, cost: 0.0 };
        d.cost = self.path_cost(&d);
        d
    }

    fn straight_descriptor(&self, x: f64, t: f64, y: f64) -> TrajectoryDescriptor {
        let mut d = TrajectoryDescriptor { x, t, kind: PathKind::Straight { y }, cost: 0.0 };
        d.cost = self.path_cost(&d);
        d
    }

    /// `u^A(x, t)` and a path attaining it.
    pub fn value(&self, x: f64, t: f64) -> Result<(f64, TrajectoryDescriptor)> {
        self.check_time(x, t)?;
        Ok(self.value_unchecked(x, t))
    }

    fn value_unchecked(&self, x: f64, t: f64) -> (f64, TrajectoryDescriptor) {
        let t = t.min(self.horizon());
        if x == 0.0 {
            let (pm, a) = self.prefix_min(t);
            let v = pm - self.control.primitive(t);
            return (v, self.dwell_descriptor(x, t, a, t));
        }
        let (straight, y) = self.straight(x, t);
        let (dwell, b) = self.best_dwell(x, t);
        if straight <= dwell {
            (straight, self.straight_descriptor(x, t, y))
        } else {
            let a = self.prefix_min(b).1;
            (dwell, self.dwell_descriptor(x, t, a, b))
        }
    }

    /// `J^A` of a descriptor, recomputed from its legs.
    pub fn path_cost(&self, d: &TrajectoryDescriptor) -> f64 {
        match d.kind {
            PathKind::Straight { y } => {
                let side = if d.x != 0.0 { Side::of(d.x) } else { Side::of(y) };
                d.t * self.model.side(side).lagrangian((d.x - y) / d.t) + self.u0.eval(y)
            }
            PathKind::Dwell { y, a, b } => {
                let first = if a > 0.0 {
                    a * self.model.side(Side::of(y)).lagrangian(-y / a) + self.u0.eval(y)
                } else {
                    self.u0.eval(0.0)
                };
                let last = if b < d.t { self.lastleg(b, d.x, d.t) } else { 0.0 };
                first - (self.control.primitive(b) - self.control.primitive(a)) + last
            }
        }
    }

    /// An optimal path chosen by the tie rule: among paths within
    /// `TIE_REL (1 + |u|)` of the optimum, take the latest departure `b`
    /// from the junction, then the earliest (`MostAtZero`) or latest
    /// (`LeastAtZero`) arrival `a`. Straight paths rank below any dwell
    /// with `b > 0`.
    pub fn optimal_trajectory(&self, x: f64, t: f64, select: Selection) -> Result<TrajectoryDescriptor> {
        self.check_time(x, t)?;
        Ok(self.select_unchecked(x, t, select))
    }

    fn select_unchecked(&self, x: f64, t: f64, select: Selection) -> TrajectoryDescriptor {
        let t = t.min(self.horizon());
        let (v, best) = self.value_unchecked(x, t);
        let thr = v + TIE_REL * (1.0 + v.abs());
        let b = if x == 0.0 {
            t
        } else {
            let (straight, y) = self.straight(x, t);
            let b = self.latest_departure(x, t, thr, &best);
            match b {
                Some(b) if b > 0.0 || straight > thr => b,
                _ => return self.straight_descriptor(x, t, y),
            }
        };
        let offset = if x == 0.0 { 0.0 } else { self.lastleg(b, x, t) } - self.control.primitive(b);
        let level = thr - offset;
        let a = self.arrival(b, level, select);
        self.dwell_descriptor(x, t, a, b)
    }

    /// Largest `b` with dwell cost `<= thr`, if any.
    fn latest_departure(&self, x: f64, t: f64, thr: f64, best: &TrajectoryDescriptor) -> Option<f64> {
        let cap = self.departure_cap(x, t);
        let feasible = |b: f64| self.dwell_objective(b, x, t) <= thr;
        if feasible(cap) {
            return Some(cap);
        }
        let (mut bs, _) = self.departure_candidates(x, t, cap);
        let mut anchor = None;
        if let Some((_, b)) = best.dwell_interval() {
            anchor = Some(b);
        } else {
            let (d, b) = self.best_dwell(x, t);
            if d <= thr {
                anchor = Some(b);
            }
        }
        if let Some(b) = anchor {
            bs.push(b);
            bs.sort_by(f64::total_cmp);
        }
        let idx = (0..bs.len()).rev().find(|&i| (Some(bs[i]) == anchor) || feasible(bs[i]))?;
        if idx + 1 >= bs.len() {
            return Some(bs[idx]);
        }
        Some(bisect_last_true(feasible, bs[idx], bs[idx + 1], BISECT_ITERS))
    }

    /// Extreme `a` in `[0, b]` with `G(a) <= level`.
    fn arrival(&self, b: f64, level: f64, select: Selection) -> f64 {
        let k = self.grid.partition_point(|&a| a <= b);
        let mut cands: Vec<f64> = self.grid[..k].to_vec();
        cands.extend(self.minima.iter().copied().filter(|&a| a <= b));
        let anchor = self.prefix_min(b).1;
        cands.push(anchor);
        cands.push(b);
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let feasible = |a: f64| self.g(a) <= level;
        match select {
            Selection::MostAtZero => {
                let i = cands.iter().position(|&a| a == anchor || feasible(a)).unwrap_or(cands.len() - 1);
                if i == 0 {
                    cands[0]
                } else {
                    bisect_first_true(feasible, cands[i - 1], cands[i], BISECT_ITERS)
                }
            }
            Selection::LeastAtZero => {
                let i = cands.iter().rposition(|&a| a == anchor || feasible(a)).unwrap_or(0);
                if i + 1 == cands.len() {
                    cands[i]
                } else {
                    bisect_last_true(feasible, cands[i], cands[i + 1], BISECT_ITERS)
                }
            }
        }
    }

    /// `u^A` on every node of `mesh`. The `t = 0` row is `u0`.
    pub fn value_grid<E: Executor>(&self, mesh: &Mesh, exec: &E) -> Result<ValueField> {
        if mesh.is_empty() {
            return Err(Error::InvalidMesh("empty mesh".into()));
        }
        let (_, tmax) = mesh.t_range();
        if tmax > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::InvalidMesh("mesh extends past the control horizon".into()));
        }
        let values = exec.map(mesh.len(), |k| {
            let (i, j) = mesh.coords(k);
            let (x, t) = (mesh.xs()[i], mesh.ts()[j]);
            if t <= 0.0 {
                self.u0.eval(x)
            } else {
                self.value_unchecked(x, t).0
            }
        });
        Ok(ValueField { mesh: mesh.clone(), values })
    }

    /// Selected descriptors at the given nodes (all with `t > 0`).
    pub fn descriptors<E: Executor>(
        &self,
        points: &[(f64, f64)],
        select: Selection,
        exec: &E,
    ) -> Result<Vec<TrajectoryDescriptor>> {
        for &(x, t) in points {
            self.check_time(x, t)?;
        }
        Ok(exec.map(points.len(), |k| self.select_unchecked(points[k].0, points[k].1, select)))
    }
}

/// One-shot evaluation of `u^A(x, t)`.
pub fn value(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    x: f64,
    t: f64,
) -> Result<(f64, TrajectoryDescriptor)> {
    JunctionSolver::new(model, u0, control)?.value(x, t)
}

/// One-shot evaluation of `u^A` on a mesh.
pub fn value_grid<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    mesh: &Mesh,
    exec: &E,
) -> Result<ValueField> {
    JunctionSolver::new(model, u0, control)?.value_grid(mesh, exec)
}

/// One-shot trajectory selection.
pub fn optimal_trajectory(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    x: f64,
    t: f64,
    select: Selection,
) -> Result<TrajectoryDescriptor> {
    JunctionSolver::new(model, u0, control)?.optimal_trajectory(x, t, select)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::vec;

    const P: f64 = -0.8;
    const HP: f64 = -0.16;
    const A0: f64 = -0.25;

    fn canonical() -> (JunctionModel, InitialData) {
        (JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap(), InitialData::linear(P).unwrap())
    }

    #[test]
    fn free_flow_closed_form() {
        let (m, u0) = canonical();
        let a = Control::constant(6.0, A0).unwrap();
        let (v, d) = value(&m, &u0, &a, 0.3, 1.0).unwrap();
        assert!((v + 0.08).abs() < 1e-12, "{v}");
        assert!(matches!(d.kind, PathKind::Straight { .. }));
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        for &(x, t) in &[(-1.5, 0.3), (0.0, 2.0), (1.9, 5.5), (-0.01, 6.0)] {
            let v = s.value(x, t).unwrap().0;
            assert!((v - (P * x - HP * t)).abs() < 1e-12, "x={x} t={t}");
        }
    }

    #[test]
    fn red_light_closed_form() {
        let (m, u0) = canonical();
        let a = Control::constant(6.0, 0.0).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        assert!(s.value(0.1, 1.0).unwrap().0.abs() < 1e-12);
        for &(x, t) in &[(-1.5, 0.3), (-0.2, 2.0), (0.0, 2.0), (0.5, 0.2), (0.5, 5.0), (1.9, 5.5)] {
            let expect: f64 = if x <= 0.0 { -x } else { 0.0 };
            let expect = expect.min(P * x - HP * t);
            let v = s.value(x, t).unwrap().0;
            assert!((v - expect).abs() < 1e-12, "x={x} t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn small_time_recovers_initial_datum() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::new(vec![-1.0, 0.0, 0.5], vec![-0.8, -0.2, -0.6, -0.3]).unwrap();
        let a = Control::new(vec![0.0, 0.5, 2.0], vec![0.0, -0.1]).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        for &x in &[-2.0, -1.0, -0.3, 0.0, 0.2, 0.5, 1.4] {
            assert!((s.value(x, 1e-4).unwrap().0 - u0.eval(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn bad_times_are_rejected() {
        let (m, u0) = canonical();
        let a = Control::constant(6.0, A0).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        assert!(s.value(0.1, 0.0).is_err());
        assert!(s.value(0.1, 6.5).is_err());
        assert!(s.value(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn free_flow_prefers_straight_paths() {
        let (m, u0) = canonical();
        let a = Control::constant(6.0, A0).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        for sel in [Selection::MostAtZero, Selection::LeastAtZero] {
            let d = s.optimal_trajectory(0.3, 1.0, sel).unwrap();
            assert!(matches!(d.kind, PathKind::Straight { .. }), "{d:?}");
        }
    }

    #[test]
    fn switching_control_paths() {
        let (m, u0) = canonical();
        let a = Control::new(vec![0.0, 1.5, 6.0], vec![0.0, A0]).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        // Junction value: 0 while blocked, then catches up with free flow.
        assert!(s.junction_value(1.0).abs() < 1e-12);
        assert!((s.junction_value(3.0) - 0.375).abs() < 1e-12);
        assert!((s.junction_value(5.0) - 0.8).abs() < 1e-12);
        // Early box point: queue released at 1.5 is not reached yet.
        let d = s.optimal_trajectory(0.15, 2.0, Selection::MostAtZero).unwrap();
        let (a_, b_) = d.dwell_interval().expect("dwell");
        assert!(a_ == 0.0 && b_ <= 1.5 + 1e-6, "{d:?}");
        // Late box point: free flow wins.
        let d = s.optimal_trajectory(0.15, 4.8, Selection::MostAtZero).unwrap();
        assert!(matches!(d.kind, PathKind::Straight { .. }), "{d:?}");
        assert!((d.cost - (P * 0.15 - HP * 4.8)).abs() < 1e-12);
    }

    #[test]
    fn congested_junction_dwells_until_the_end() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.9).unwrap();
        let a = Control::constant(3.0, 0.0).unwrap();
        let d = optimal_trajectory(&m, &u0, &a, 0.0, 2.0, Selection::LeastAtZero).unwrap();
        // The tie slack lets the arrival drift by about 1e-8 / G'(0).
        let (a_, b_) = d.dwell_interval().unwrap();
        assert!(a_ < 1e-6 && b_ == 2.0, "{d:?}");
        assert!(d.cost.abs() < 1e-7);
        let d = optimal_trajectory(&m, &u0, &a, 0.0, 2.0, Selection::MostAtZero).unwrap();
        assert_eq!(d.dwell_interval(), Some((0.0, 2.0)));
    }

    #[test]
    fn value_grid_matches_pointwise() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::new(vec![-0.5, 0.3], vec![-0.7, -0.4, -0.2]).unwrap();
        let a = Control::new(vec![0.0, 0.7, 1.3, 2.0], vec![-0.1, 0.0, -0.25]).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        let mesh = Mesh::new(-1.0, 1.0, 8, 2.0, 6).unwrap();
        let f = s.value_grid(&mesh, &Sequential).unwrap();
        for k in 0..mesh.len() {
            let (i, j) = mesh.coords(k);
            let (x, t) = (mesh.xs()[i], mesh.ts()[j]);
            let expect = if t == 0.0 { u0.eval(x) } else { s.value(x, t).unwrap().0 };
            assert_eq!(f.values[k], expect);
        }
        let one = Mesh::with_time_range(0.3, 0.3, 0, 1.0, 1.0, 0).unwrap();
        let f = s.value_grid(&one, &Sequential).unwrap();
        assert_eq!(f.values, vec![s.value(0.3, 1.0).unwrap().0]);
    }

    #[test]
    fn descriptor_costs_recompute() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::new(vec![-0.5, 0.3], vec![-0.7, -0.4, -0.2]).unwrap();
        let a = Control::new(vec![0.0, 0.7, 1.3, 2.0], vec![-0.1, 0.0, -0.25]).unwrap();
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        for k in 0..40 {
            let x = -1.0 + 0.05 * k as f64;
            let t = 0.1 + 0.047 * k as f64;
            let (v, d) = s.value(x, t).unwrap();
            assert!(d.is_well_formed(), "{d:?}");
            assert!((d.cost - v).abs() <= 1e-10 * (1.0 + v.abs()));
            for sel in [Selection::MostAtZero, Selection::LeastAtZero] {
                let d = s.optimal_trajectory(x, t, sel).unwrap();
                assert!(d.is_well_formed(), "{d:?}");
                assert!((s.path_cost(&d) - d.cost).abs() <= 1e-10);
                assert!(d.cost <= v + 2.0 * TIE_REL * (1.0 + v.abs()));
            }
        }
    }
}
