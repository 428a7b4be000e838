//! Hamiltonians, the concave fluxes they encode, their Legendre transforms
//! and the piecewise-linear initial datum.
//!
//! A Hamiltonian lives on `[-R, 0]`, vanishes at both ends and is strictly
//! convex. The flux of the traffic model is `f(rho) = -H(-rho)` on `[0, R]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Slack accepted on domain checks.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Minimum second divided difference accepted for tabulated samples.
const MIN_CURVATURE: f64 = 1e-9;

/// One of the two lines meeting at the junction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Side owning a nonzero position. Zero is reported as `Right`.
    pub fn of(x: f64) -> Side {
        if x < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

/// One quadratic piece `h0 + d0 (p - p0) + curv (p - p0)^2 / 2` on `[p0, p1]`.
#[derive(Clone, Debug, PartialEq)]
struct Piece {
    p0: f64,
    p1: f64,
    h0: f64,
    d0: f64,
    curv: f64,
}

impl Piece {
    fn eval(&self, p: f64) -> f64 {
        let s = p - self.p0;
        self.h0 + s * (self.d0 + 0.5 * self.curv * s)
    }

    fn slope(&self, p: f64) -> f64 {
        self.d0 + self.curv * (p - self.p0)
    }

    fn slope_end(&self) -> f64 {
        self.slope(self.p1)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Quadratic { kappa: f64 },
    Tabulated { samples: Vec<(f64, f64)>, pieces: Vec<Piece> },
}

/// A strictly convex Hamiltonian on `[-R, 0]` with `H(-R) = H(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    capacity: f64,
    kind: Kind,
    p_hat: f64,
    h_min: f64,
    dh0: f64,
    dhr: f64,
}

impl Hamiltonian {
    /// `H(p) = kappa p (p + R)`.
    pub fn quadratic(kappa: f64, capacity: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidHamiltonian(format!("kappa must be positive, got {kappa}")));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidHamiltonian(format!("R must be positive, got {capacity}")));
        }
        Ok(Self {
            capacity,
            kind: Kind::Quadratic { kappa },
            p_hat: -0.5 * capacity,
            h_min: -0.25 * kappa * capacity * capacity,
            dh0: kappa * capacity,
            dhr: -kappa * capacity,
        })
    }

    /// Shape-preserving C1 piecewise-quadratic interpolant of `(p, H(p))`
    /// samples running from `p = -R` to `p = 0`.
    ///
    /// Node slopes come from the three-point parabola, so samples taken from
    /// a quadratic are reproduced exactly. Intervals whose endpoint slopes do
    /// not average to the secant get one extra knot placed so the derivative
    /// stays monotone (Schumaker's construction).
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        let bad = |m: alloc::string::String| Err(Error::InvalidHamiltonian(m));
        if samples.len() < 3 {
            return bad(format!("need at least 3 samples, got {}", samples.len()));
        }
        if samples.iter().any(|&(p, h)| !p.is_finite() || !h.is_finite()) {
            return bad("samples must be finite".into());
        }
        let n = samples.len();
        let capacity = -samples[0].0;
        if capacity <= 0.0 {
            return bad(format!("first sample must sit at p = -R < 0, got {}", samples[0].0));
        }
        if samples[n - 1].0 != 0.0 {
            return bad(format!("last sample must sit at p = 0, got {}", samples[n - 1].0));
        }
        if samples[0].1.abs() > DOMAIN_TOL || samples[n - 1].1.abs() > DOMAIN_TOL {
            return bad("H must vanish at p = -R and p = 0".into());
        }
        let mut pts: Vec<(f64, f64)> = samples.to_vec();
        pts[0].1 = 0.0;
        pts[n - 1].1 = 0.0;
        for w in pts.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad("sample abscissae must be strictly increasing".into());
            }
        }
        let widths: Vec<f64> = pts.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let secants: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        for i in 1..secants.len() {
            let dd = (secants[i] - secants[i - 1]) / (pts[i + 1].0 - pts[i - 1].0);
            if dd < MIN_CURVATURE {
                return bad(format!("samples are not strictly convex near p = {}", pts[i].0));
            }
        }

        let mut slopes = alloc::vec![0.0; n];
        for i in 1..n - 1 {
            let (hl, hr) = (widths[i - 1], widths[i]);
            slopes[i] = (hr * secants[i - 1] + hl * secants[i]) / (hl + hr);
        }
        slopes[0] = 2.0 * secants[0] - slopes[1];
        slopes[n - 1] = 2.0 * secants[n - 2] - slopes[n - 2];

        let mut pieces = Vec::with_capacity(2 * n);
        for i in 0..n - 1 {
            let (p0, p1) = (pts[i].0, pts[i + 1].0);
            let h = p1 - p0;
            let (s0, s1, sec) = (slopes[i], slopes[i + 1], secants[i]);
            let mismatch = s0 + s1 - 2.0 * sec;
            if mismatch.abs() <= 1e-13 * (1.0 + s0.abs() + s1.abs()) {
                pieces.push(Piece { p0, p1, h0: pts[i].1, d0: s0, curv: (s1 - s0) / h });
                continue;
            }
            let u = sec - s0;
            let v = s1 - sec;
            let span = s1 - s0;
            let lo = (h * (v - u) / span).max(0.0);
            let hi = (2.0 * h * v / span).min(h);
            let alpha = 0.5 * (lo + hi);
            let beta = h - alpha;
            let mid_slope = (2.0 * (pts[i + 1].1 - pts[i].1) - alpha * s0 - beta * s1) / h;
            let knot = p0 + alpha;
            pieces.push(Piece { p0, p1: knot, h0: pts[i].1, d0: s0, curv: (mid_slope - s0) / alpha });
            pieces.push(Piece {
                p0: knot,
                p1,
                h0: pts[i].1 + 0.5 * alpha * (s0 + mid_slope),
                d0: mid_slope,
                curv: (s1 - mid_slope) / beta,
            });
        }
        if pieces.iter().any(|pc| pc.curv.is_nan() || pc.curv <= 0.0) {
            return bad("interpolant lost strict convexity".into());
        }
        let dhr = pieces[0].d0;
        let dh0 = pieces[pieces.len() - 1].slope_end();
        if !(dhr < 0.0 && dh0 > 0.0) {
            return bad(format!("need H'(-R) < 0 < H'(0), got {dhr} and {dh0}"));
        }
        let vertex = pieces
            .iter()
            .find(|pc| pc.d0 <= 0.0 && pc.slope_end() >= 0.0)
            .map(|pc| pc.p0 - pc.d0 / pc.curv)
            .expect("derivative changes sign");
        let kind = Kind::Tabulated { samples: pts, pieces };
        let mut ham = Self { capacity, kind, p_hat: vertex, h_min: 0.0, dh0, dhr };
        ham.h_min = ham.eval_clamped(vertex);
        Ok(ham)
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Argmin of `H` on `[-R, 0]`.
    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    pub fn min_value(&self) -> f64 {
        self.h_min
    }

    /// `H'(0)`, the free-flow speed.
    pub fn slope_at_zero(&self) -> f64 {
        self.dh0
    }

    /// `H'(-R)`, the (negative) speed of jammed traffic.
    pub fn slope_at_capacity(&self) -> f64 {
        self.dhr
    }

    /// Largest characteristic speed in absolute value.
    pub fn max_speed(&self) -> f64 {
        self.dh0.abs().max(self.dhr.abs())
    }

    /// `kappa` for the quadratic kind.
    pub fn kappa(&self) -> Option<f64> {
        match self.kind {
            Kind::Quadratic { kappa } => Some(kappa),
            Kind::Tabulated { .. } => None,
        }
    }

    /// Samples of the tabulated kind.
    pub fn samples(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            Kind::Quadratic { .. } => None,
            Kind::Tabulated { samples, .. } => Some(samples),
        }
    }

    fn check_p(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < -self.capacity - DOMAIN_TOL || p > DOMAIN_TOL {
            return Err(Error::Domain { what: "p", value: p, lo: -self.capacity, hi: 0.0 });
        }
        Ok(p.clamp(-self.capacity, 0.0))
    }

    /// `H(p)` for `p` in `[-R, 0]`.
    pub fn eval(&self, p: f64) -> Result<f64> {
        Ok(self.eval_clamped(self.check_p(p)?))
    }

    pub(crate) fn eval_clamped(&self, p: f64) -> f64 {
        let p = p.clamp(-self.capacity, 0.0);
        match &self.kind {
            Kind::Quadratic { kappa } => kappa * p * (p + self.capacity),
            Kind::Tabulated { pieces, .. } => {
                if p == 0.0 || p == -self.capacity {
                    return 0.0;
                }
                pieces[self.piece_index(pieces, p)].eval(p)
            }
        }
    }

    fn piece_index(&self, pieces: &[Piece], p: f64) -> usize {
        pieces.partition_point(|pc| pc.p1 < p).min(pieces.len() - 1)
    }

    /// `H'(p)` with `p` clamped to `[-R, 0]`.
    pub fn derivative(&self, p: f64) -> f64 {
        let p = p.clamp(-self.capacity, 0.0);
        match &self.kind {
            Kind::Quadratic { kappa } => kappa * (2.0 * p + self.capacity),
            Kind::Tabulated { pieces, .. } => pieces[self.piece_index(pieces, p)].slope(p),
        }
    }

    /// The `p` in `[-R, 0]` with `H'(p) = alpha`, clamped at the ends.
    pub fn inverse_derivative(&self, alpha: f64) -> f64 {
        if alpha >= self.dh0 {
            return 0.0;
        }
        if alpha <= self.dhr {
            return -self.capacity;
        }
        match &self.kind {
            Kind::Quadratic { kappa } => (alpha / kappa - self.capacity) * 0.5,
            Kind::Tabulated { pieces, .. } => {
                let i = pieces.partition_point(|pc| pc.slope_end() < alpha).min(pieces.len() - 1);
                let pc = &pieces[i];
                (pc.p0 + (alpha - pc.d0) / pc.curv).clamp(pc.p0, pc.p1)
            }
        }
    }

    /// Flux `f(rho) = -H(-rho)` for `rho` in `[0, R]`.
    pub fn flux(&self, rho: f64) -> Result<f64> {
        let rho = self.check_rho(rho)?;
        Ok(-self.eval_clamped(-rho))
    }

    pub(crate) fn flux_clamped(&self, rho: f64) -> f64 {
        -self.eval_clamped(-rho)
    }

    fn check_rho(&self, rho: f64) -> Result<f64> {
        if rho.is_nan() || rho < -DOMAIN_TOL || rho > self.capacity + DOMAIN_TOL {
            return Err(Error::Domain { what: "rho", value: rho, lo: 0.0, hi: self.capacity });
        }
        Ok(rho.clamp(0.0, self.capacity))
    }

    /// Density at the flux crest, `-p_hat`.
    pub fn critical_density(&self) -> f64 {
        -self.p_hat
    }

    /// Increasing and decreasing parts of the flux: `(f(min(rho, rho_c)),
    /// f(max(rho, rho_c)))` with `rho_c` the critical density.
    pub fn flux_branches(&self, rho: f64) -> Result<(f64, f64)> {
        let rho = self.check_rho(rho)?;
        Ok(self.branches_clamped(rho))
    }

    pub(crate) fn branches_clamped(&self, rho: f64) -> (f64, f64) {
        let crest = self.critical_density();
        (self.flux_clamped(rho.min(crest)), self.flux_clamped(rho.max(crest)))
    }

    /// `L(alpha) = sup_{p in [-R, 0]} (alpha p - H(p))`.
    pub fn lagrangian(&self, alpha: f64) -> f64 {
        if alpha >= self.dh0 {
            return 0.0;
        }
        if alpha <= self.dhr {
            return -self.capacity * alpha;
        }
        match &self.kind {
            Kind::Quadratic { kappa } => {
                let d = alpha - self.dh0;
                d * d / (4.0 * kappa)
            }
            Kind::Tabulated { .. } => {
                let p = self.inverse_derivative(alpha);
                alpha * p - self.eval_clamped(p)
            }
        }
    }
}

/// The two lines of the junction and the free-flow limiter value `A0`.
#[derive(Clone, Debug, PartialEq)]
pub struct JunctionModel {
    left: Hamiltonian,
    right: Hamiltonian,
    a0: f64,
    equal_minima: bool,
}

impl JunctionModel {
    pub fn new(left: Hamiltonian, right: Hamiltonian) -> Self {
        let a0 = left.min_value().max(right.min_value());
        Self { left, right, a0, equal_minima: false }
    }

    /// Same as [`JunctionModel::new`] but requires both Hamiltonians to share
    /// their minimum value, as the bang-bang structure results assume.
    pub fn with_equal_minima(left: Hamiltonian, right: Hamiltonian) -> Result<Self> {
        let (ml, mr) = (left.min_value(), right.min_value());
        if (ml - mr).abs() > 1e-12 * (1.0 + ml.abs()) {
            return Err(Error::InvalidModel(format!("min H^L = {ml} differs from min H^R = {mr}")));
        }
        let mut m = Self::new(left, right);
        m.equal_minima = true;
        Ok(m)
    }

    /// Both sides share `H(p) = kappa p (p + R)`.
    pub fn symmetric_quadratic(kappa: f64, capacity: f64) -> Result<Self> {
        let h = Hamiltonian::quadratic(kappa, capacity)?;
        Self::with_equal_minima(h.clone(), h)
    }

    pub fn side(&self, side: Side) -> &Hamiltonian {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn left(&self) -> &Hamiltonian {
        &self.left
    }

    pub fn right(&self) -> &Hamiltonian {
        &self.right
    }

    /// `A0 = max(min H^L, min H^R)`.
    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn equal_minima(&self) -> bool {
        self.equal_minima
    }

    pub fn max_speed(&self) -> f64 {
        self.left.max_speed().max(self.right.max_speed())
    }

    /// Speed beyond which a straight leg ending at `x` costs a constant:
    /// `H^R'(0)` to the right, `|H^L'(-R)|` to the left.
    pub(crate) fn saturation_speed(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.right.slope_at_zero()
        } else {
            -self.left.slope_at_capacity()
        }
    }

    /// Largest of the two capacities.
    pub fn max_capacity(&self) -> f64 {
        self.left.capacity().max(self.right.capacity())
    }

    /// Smallest Hamiltonian minimum; bounds `-u_t` from below.
    pub fn lowest_min(&self) -> f64 {
        self.left.min_value().min(self.right.min_value())
    }
}

/// Affine piece `intercept + slope * y` on `[lo, hi]`, entirely on one side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    pub fn eval(&self, y: f64) -> f64 {
        self.intercept + self.slope * y
    }

    pub fn side(&self) -> Side {
        if self.hi <= 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

/// Continuous piecewise-linear `u0` with `u0(0) = 0`.
///
/// `slopes` has one more entry than `breakpoints`: `slopes[0]` applies left of
/// the first breakpoint and `slopes[k]` right of `breakpoints[k - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    segments: Vec<Segment>,
    boundary_slopes: bool,
}

impl InitialData {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidInitialData(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.iter().chain(slopes.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInitialData("values must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInitialData("breakpoints must be strictly increasing".into()));
        }
        let segments = build_segments(&breakpoints, &slopes);
        Ok(Self { breakpoints, slopes, segments, boundary_slopes: false })
    }

    /// `u0(x) = p x`.
    pub fn linear(p: f64) -> Result<Self> {
        Self::new(Vec::new(), alloc::vec![p])
    }

    /// Admit slopes equal to `-R` or `0` (vacuum or jam), which the standing
    /// assumptions otherwise exclude.
    pub fn allow_boundary_slopes(mut self) -> Self {
        self.boundary_slopes = true;
        self
    }

    pub fn boundary_slopes_allowed(&self) -> bool {
        self.boundary_slopes
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub(crate) fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub(crate) fn side_segments(&self, side: Side) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.side() == side)
    }

    /// Checks slopes against the capacities: `(-R, 0)` strictly on each side
    /// unless boundary slopes were allowed.
    pub fn validate(&self, model: &JunctionModel) -> Result<()> {
        for seg in &self.segments {
            let r = model.side(seg.side()).capacity();
            let (lo, hi) = (-r, 0.0);
            let ok = if self.boundary_slopes {
                seg.slope >= lo - DOMAIN_TOL && seg.slope <= hi + DOMAIN_TOL
            } else {
                seg.slope > lo + DOMAIN_TOL && seg.slope < hi - DOMAIN_TOL
            };
            if !ok {
                return Err(Error::InvalidInitialData(format!(
                    "slope {} on [{}, {}] must lie in (-{r}, 0)",
                    seg.slope, seg.lo, seg.hi
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: f64) -> f64 {
        let i = self.segments.partition_point(|s| s.hi < y).min(self.segments.len() - 1);
        self.segments[i].eval(y)
    }

    /// One-sided derivative at `0` from the right (`u0_x(0+)`).
    pub fn slope_right_of_zero(&self) -> f64 {
        self.segments.iter().find(|s| s.side() == Side::Right).map(|s| s.slope).unwrap_or(0.0)
    }

    /// `u0_x(0-)`.
    pub fn slope_left_of_zero(&self) -> f64 {
        self.segments.iter().rev().find(|s| s.side() == Side::Left).map(|s| s.slope).unwrap_or(0.0)
    }
}

fn build_segments(breakpoints: &[f64], slopes: &[f64]) -> Vec<Segment> {
    // Insert 0 as a knot so every segment lies on one side.
    let mut knots: Vec<f64> = breakpoints.to_vec();
    let mut seg_slopes: Vec<f64> = slopes.to_vec();
    if !knots.contains(&0.0) {
        let k = knots.partition_point(|&b| b < 0.0);
        knots.insert(k, 0.0);
        seg_slopes.insert(k, slopes[k]);
    }
    let zero = knots.iter().position(|&b| b == 0.0).unwrap();
    let n = seg_slopes.len();
    let lo_of = |i: usize| if i == 0 { f64::NEG_INFINITY } else { knots[i - 1] };
    let hi_of = |i: usize| if i == n - 1 { f64::INFINITY } else { knots[i] };
    let mut intercepts = alloc::vec![0.0; n];
    // Segment `zero + 1` starts at 0, segment `zero` ends at 0.
    let mut value = 0.0;
    for i in (zero + 1)..n {
        let lo = lo_of(i);
        intercepts[i] = value - seg_slopes[i] * lo;
        if i + 1 < n {
            value = intercepts[i] + seg_slopes[i] * hi_of(i);
        }
    }
    value = 0.0;
    for i in (0..=zero).rev() {
        let hi = hi_of(i);
        intercepts[i] = value - seg_slopes[i] * hi;
        if i > 0 {
            value = intercepts[i] + seg_slopes[i] * lo_of(i);
        }
    }
    (0..n).map(|i| Segment { lo: lo_of(i), hi: hi_of(i), slope: seg_slopes[i], intercept: intercepts[i] }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn unit() -> Hamiltonian {
        Hamiltonian::quadratic(1.0, 1.0).unwrap()
    }

    fn numeric_sup(h: &Hamiltonian, alpha: f64) -> f64 {
        let n = 100_000;
        let r = h.capacity();
        (0..=n)
            .map(|k| {
                let p = -r + r * k as f64 / n as f64;
                alpha * p - h.eval_clamped(p)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn quadratic_values() {
        let h = unit();
        assert!((h.eval(-0.5).unwrap() + 0.25).abs() < 1e-15);
        assert_eq!(h.eval(0.0).unwrap(), 0.0);
        assert_eq!(h.eval(-1.0).unwrap(), 0.0);
        assert_eq!(h.p_hat(), -0.5);
        assert_eq!(h.min_value(), -0.25);
        assert_eq!(h.slope_at_zero(), 1.0);
        assert_eq!(h.slope_at_capacity(), -1.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let h = unit();
        assert!(matches!(h.eval(0.1), Err(Error::Domain { .. })));
        assert!(matches!(h.eval(-1.0 - 1e-6), Err(Error::Domain { .. })));
        assert!(h.eval(1e-10).is_ok());
        assert!(h.flux(1.5).is_err());
        assert!(h.flux_branches(-0.1).is_err());
    }

    #[test]
    fn flux_values() {
        let h = unit();
        assert!((h.flux(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(h.flux(0.0).unwrap(), 0.0);
        assert!((h.flux(0.9).unwrap() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn branch_values() {
        let h = unit();
        let (fp, fm) = h.flux_branches(0.9).unwrap();
        assert!((fp - 0.25).abs() < 1e-15 && (fm - 0.09).abs() < 1e-15);
        assert_eq!(h.flux_branches(0.5).unwrap(), (0.25, 0.25));
        let (fp, fm) = h.flux_branches(0.1).unwrap();
        assert!((fp - 0.09).abs() < 1e-15 && (fm - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_matches_numeric_sup() {
        let h = unit();
        assert!((h.lagrangian(0.0) - 0.25).abs() < 1e-15);
        assert_eq!(h.lagrangian(1.0), 0.0);
        assert_eq!(h.lagrangian(-2.0), 2.0);
        for &alpha in &[1.0, -2.0, 0.0, 0.37, -0.81, 3.0] {
            assert!((h.lagrangian(alpha) - numeric_sup(&h, alpha)).abs() < 1e-9, "alpha={alpha}");
        }
        let h = Hamiltonian::quadratic(2.5, 0.7).unwrap();
        for &alpha in &[-3.0, -1.0, -0.2, 0.0, 0.4, 1.7, 2.0] {
            assert!((h.lagrangian(alpha) - numeric_sup(&h, alpha)).abs() < 1e-9, "alpha={alpha}");
        }
    }

    #[test]
    fn tabulated_reproduces_quadratic_samples() {
        let q = Hamiltonian::quadratic(1.3, 0.8).unwrap();
        let samples: Vec<(f64, f64)> = (0..=8).map(|k| -0.8 + 0.1 * k as f64).map(|p| (p, q.eval_clamped(p))).collect();
        let mut samples = samples;
        samples[8].0 = 0.0;
        let t = Hamiltonian::tabulated(&samples).unwrap();
        for k in 0..=80 {
            let p = -0.8 + 0.01 * k as f64;
            assert!((t.eval_clamped(p) - q.eval_clamped(p)).abs() < 1e-12, "p={p}");
            assert!((t.derivative(p) - q.derivative(p)).abs() < 1e-9, "p={p}");
        }
        assert!((t.p_hat() - q.p_hat()).abs() < 1e-12);
        assert!((t.min_value() - q.min_value()).abs() < 1e-12);
        for &alpha in &[-2.0, -0.5, 0.0, 0.3, 1.2] {
            assert!((t.lagrangian(alpha) - q.lagrangian(alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_non_quadratic_stays_convex() {
        // H(p) = p (p + 1) (1 + p^2): convex on [-1, 0].
        let f = |p: f64| p * (p + 1.0) * (1.0 + p * p);
        let samples: Vec<(f64, f64)> =
            (0..=10).map(|k| if k == 10 { 0.0 } else { -1.0 + 0.1 * k as f64 }).map(|p| (p, f(p))).collect();
        let h = Hamiltonian::tabulated(&samples).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let p = -1.0 + 1e-3 * k as f64;
            let d = h.derivative(p);
            assert!(d >= prev - 1e-12, "derivative must be monotone");
            prev = d;
            assert!((h.eval_clamped(p) - f(p)).abs() < 2e-3);
        }
        for &alpha in &[-1.5, -0.4, 0.0, 0.3, 0.9] {
            assert!((h.lagrangian(alpha) - numeric_sup(&h, alpha)).abs() < 1e-8, "alpha={alpha}");
        }
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(Hamiltonian::tabulated(&[(-1.0, 0.0), (0.0, 0.0)]).is_err());
        assert!(Hamiltonian::tabulated(&[(-1.0, 0.0), (-0.5, 0.1), (0.0, 0.0)]).is_err());
        assert!(Hamiltonian::tabulated(&[(-1.0, 0.1), (-0.5, -0.2), (0.0, 0.0)]).is_err());
        assert!(Hamiltonian::tabulated(&[(-1.0, 0.0), (-0.5, -0.25), (-0.1, 0.0)]).is_err());
        assert!(Hamiltonian::tabulated(&[(-1.0, 0.0), (-0.5, -0.25), (0.0, 0.0)]).is_ok());
    }

    #[test]
    fn initial_data_evaluation() {
        let u = InitialData::linear(-0.8).unwrap();
        assert!((u.eval(0.5) + 0.4).abs() < 1e-15);
        assert_eq!(u.eval(0.0), 0.0);
        let u = InitialData::new(vec![-1.0, 0.0], vec![-0.8, -0.2, -0.8]).unwrap();
        assert!((u.eval(-2.0) - 1.0).abs() < 1e-15);
        assert!((u.eval(-1.0) - 0.2).abs() < 1e-15);
        assert!((u.eval(2.0) + 1.6).abs() < 1e-15);
        let u = InitialData::new(vec![0.5], vec![-0.3, -0.6]).unwrap();
        assert!((u.eval(1.0) + 0.15 + 0.3).abs() < 1e-15);
        assert!((u.eval(-1.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn initial_data_validation() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        assert!(InitialData::linear(-0.8).unwrap().validate(&m).is_ok());
        assert!(InitialData::linear(0.0).unwrap().validate(&m).is_err());
        assert!(InitialData::linear(-1.0).unwrap().validate(&m).is_err());
        assert!(InitialData::linear(0.0).unwrap().allow_boundary_slopes().validate(&m).is_ok());
        assert!(InitialData::new(vec![1.0, 0.5], vec![-0.1, -0.2, -0.3]).is_err());
        assert!(InitialData::new(vec![1.0], vec![-0.1]).is_err());
    }

    #[test]
    fn junction_model_a0() {
        let m = JunctionModel::new(unit(), Hamiltonian::quadratic(1.0, 0.8).unwrap());
        assert!((m.a0() + 0.16).abs() < 1e-15);
        assert!(JunctionModel::with_equal_minima(unit(), Hamiltonian::quadratic(1.0, 0.8).unwrap()).is_err());
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        assert_eq!(m.a0(), -0.25);
        assert!(m.equal_minima());
    }

    proptest! {
        #[test]
        fn fenchel_inequality(p in -1.0f64..=0.0, alpha in -4.0f64..4.0) {
            let h = unit();
            prop_assert!(alpha * p <= h.lagrangian(alpha) + h.eval_clamped(p) + 1e-10);
        }

        #[test]
        fn lagrangian_is_convex(a in -4.0f64..4.0, b in -4.0f64..4.0) {
            let h = Hamiltonian::quadratic(0.7, 1.4).unwrap();
            let mid = h.lagrangian(0.5 * (a + b));
            prop_assert!(mid <= 0.5 * (h.lagrangian(a) + h.lagrangian(b)) + 1e-12);
        }

        #[test]
        fn branches_are_monotone(r1 in 0.0f64..=1.0, r2 in 0.0f64..=1.0) {
            let h = unit();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let (p1, m1) = h.flux_branches(lo).unwrap();
            let (p2, m2) = h.flux_branches(hi).unwrap();
            prop_assert!(p1 <= p2 + 1e-15);
            prop_assert!(m1 + 1e-15 >= m2);
        }

        #[test]
        fn flux_mirrors_hamiltonian(rho in 0.0f64..=1.0) {
            let h = unit();
            prop_assert!((h.flux(rho).unwrap() + h.eval(-rho).unwrap()).abs() <= 1e-12);
        }
    }
}
