//! Rectangular space-time grids and fields sampled on them.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flux::JunctionModel;

/// Uniform nodes `x_i = xmin + i dx`, `i = 0..=nx`, and `t_j = j T / nt`,
/// `j = 0..=nt`. `nx` and `nt` count intervals.
///
/// A node lying within rounding of `x = 0` is snapped onto it.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    xmin: f64,
    xmax: f64,
    nx: usize,
    tmin: f64,
    tmax: f64,
    nt: usize,
    xs: Vec<f64>,
    ts: Vec<f64>,
}

impl Mesh {
    /// Grid over `[xmin, xmax] x [0, T]`.
    pub fn new(xmin: f64, xmax: f64, nx: usize, horizon: f64, nt: usize) -> Result<Self> {
        Self::with_time_range(xmin, xmax, nx, 0.0, horizon, nt)
    }

    /// Grid over `[xmin, xmax] x [tmin, tmax]`.
    pub fn with_time_range(xmin: f64, xmax: f64, nx: usize, tmin: f64, tmax: f64, nt: usize) -> Result<Self> {
        if !(xmin.is_finite() && xmax.is_finite() && tmin.is_finite() && tmax.is_finite()) {
            return Err(Error::InvalidMesh("bounds must be finite".into()));
        }
        if nx == 0 && xmax != xmin {
            return Err(Error::InvalidMesh("nx = 0 needs xmin = xmax".into()));
        }
        if nx > 0 && xmax <= xmin {
            return Err(Error::InvalidMesh(format!("need xmin < xmax, got [{xmin}, {xmax}]")));
        }
        if nt == 0 && tmax != tmin {
            return Err(Error::InvalidMesh("nt = 0 needs a single time".into()));
        }
        if nt > 0 && tmax <= tmin {
            return Err(Error::InvalidMesh(format!("need tmin < tmax, got [{tmin}, {tmax}]")));
        }
        if tmin < 0.0 {
            return Err(Error::InvalidMesh(format!("times must be >= 0, got {tmin}")));
        }
        let xs = nodes(xmin, xmax, nx);
        let ts = nodes(tmin, tmax, nt);
        Ok(Self { xmin, xmax, nx, tmin, tmax, nt, xs, ts })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xmin, self.xmax)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.tmin, self.tmax)
    }

    pub fn dx(&self) -> f64 {
        if self.nx == 0 {
            0.0
        } else {
            (self.xmax - self.xmin) / self.nx as f64
        }
    }

    pub fn dt(&self) -> f64 {
        if self.nt == 0 {
            0.0
        } else {
            (self.tmax - self.tmin) / self.nt as f64
        }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.xs.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, row-major in `t` then `x`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    /// `(i, j)` of a flat index.
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.xs.len(), k / self.xs.len())
    }

    /// Column holding `x = 0`, if any.
    pub fn zero_column(&self) -> Option<usize> {
        self.xs.iter().position(|&x| x == 0.0)
    }

    /// Tensor-product trapezoid weight of node `(i, j)`.
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> f64 {
        trapezoid_1d(i, self.nx, self.dx()) * trapezoid_1d(j, self.nt, self.dt())
    }

    /// Same grid with every interval split in two.
    pub fn refined(&self) -> Mesh {
        Self::with_time_range(self.xmin, self.xmax, 2 * self.nx, self.tmin, self.tmax, 2 * self.nt)
            .expect("refining a valid mesh")
    }

    /// Same grid keeping every other node. Needs even interval counts.
    pub fn coarsened(&self) -> Option<Mesh> {
        if !self.nx.is_multiple_of(2) || !self.nt.is_multiple_of(2) || self.nx == 0 || self.nt == 0 {
            return None;
        }
        Self::with_time_range(self.xmin, self.xmax, self.nx / 2, self.tmin, self.tmax, self.nt / 2).ok()
    }
}

fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return alloc::vec![lo];
    }
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let v = if i == n { hi } else { lo + h * i as f64 };
            if v.abs() < 1e-9 * h {
                0.0
            } else {
                v
            }
        })
        .collect()
}

fn trapezoid_1d(i: usize, n: usize, h: f64) -> f64 {
    if n == 0 {
        1.0
    } else if i == 0 || i == n {
        0.5 * h
    } else {
        h
    }
}

/// `u^A` sampled on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub mesh: Mesh,
    /// Row-major in `t` then `x`, see [`Mesh::index`].
    pub values: Vec<f64>,
}

/// Extreme discrete derivatives of a value field and the bounds they were
/// checked against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientAudit {
    pub min_ux_left: f64,
    pub max_ux_left: f64,
    pub min_ux_right: f64,
    pub max_ux_right: f64,
    pub min_ut: f64,
    pub max_ut: f64,
    /// `-R^L`, `-R^R` and `-min H` bounds.
    pub ux_left_lo: f64,
    pub ux_right_lo: f64,
    pub ut_hi: f64,
    pub tol: f64,
    pub passed: bool,
}

impl ValueField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.index(i, j)]
    }

    /// Row `j` (all `x` at time `t_j`).
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.mesh.xs().len();
        &self.values[j * n..(j + 1) * n]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell densities `-(u_{i+1} - u_i) / dx` per row: the exact cell
    /// averages of `-u_x`.
    pub fn density_cells(&self) -> Vec<Vec<f64>> {
        let dx = self.mesh.dx();
        (0..self.mesh.ts().len()).map(|j| self.row(j).windows(2).map(|w| -(w[1] - w[0]) / dx).collect()).collect()
    }

    /// Checks `u_x` in `[-R - tol, tol]` on each side and `u_t` in
    /// `[-tol, -min H + tol]` using first differences, with
    /// `tol = 3 max(dx, dt) Lip`.
    pub fn gradient_audit(&self, model: &JunctionModel) -> GradientAudit {
        let (xs, ts) = (self.mesh.xs(), self.mesh.ts());
        let (dx, dt) = (self.mesh.dx(), self.mesh.dt());
        let lip = model.max_capacity().max(-model.lowest_min());
        let tol = 3.0 * dx.max(dt) * lip;
        let mut a = GradientAudit {
            min_ux_left: 0.0,
            max_ux_left: 0.0,
            min_ux_right: 0.0,
            max_ux_right: 0.0,
            min_ut: 0.0,
            max_ut: 0.0,
            ux_left_lo: -model.left().capacity(),
            ux_right_lo: -model.right().capacity(),
            ut_hi: -model.lowest_min(),
            tol,
            passed: true,
        };
        let (mut first_l, mut first_r, mut first_t) = (true, true, true);
        for j in 0..ts.len() {
            let row = self.row(j);
            for i in 0..xs.len().saturating_sub(1) {
                let d = (row[i + 1] - row[i]) / dx;
                let mid = 0.5 * (xs[i] + xs[i + 1]);
                let (lo, hi, first) = if mid < 0.0 {
                    (&mut a.min_ux_left, &mut a.max_ux_left, &mut first_l)
                } else {
                    (&mut a.min_ux_right, &mut a.max_ux_right, &mut first_r)
                };
                if *first {
                    *lo = d;
                    *hi = d;
                    *first = false;
                } else {
                    *lo = lo.min(d);
                    *hi = hi.max(d);
                }
            }
            if j + 1 < ts.len() {
                let next = self.row(j + 1);
                for i in 0..xs.len() {
                    let d = (next[i] - row[i]) / dt;
                    if first_t {
                        a.min_ut = d;
                        a.max_ut = d;
                        first_t = false;
                    } else {
                        a.min_ut = a.min_ut.min(d);
                        a.max_ut = a.max_ut.max(d);
                    }
                }
            }
        }
        // A cell straddling 0 without a node there is checked against the
        // wider of the two bounds.
        let straddle_lo = a.ux_left_lo.min(a.ux_right_lo);
        let right_lo = if self.mesh.zero_column().is_some() || xs[0] >= 0.0 || xs[xs.len() - 1] <= 0.0 {
            a.ux_right_lo
        } else {
            straddle_lo
        };
        a.passed = a.min_ux_left >= a.ux_left_lo - tol
            && a.max_ux_left <= tol
            && a.min_ux_right >= right_lo - tol
            && a.max_ux_right <= tol
            && a.min_ut >= -tol
            && a.max_ut <= a.ut_hi + tol;
        a
    }
}

/// `(t, u(0-, t), u(0+, t))` rows.
pub type JunctionTrace = Vec<(f64, f64, f64)>;

/// One-sided traces at `x = 0`, each extrapolated linearly from the two
/// nearest columns on its side.
pub fn junction_trace(field: &ValueField) -> Result<JunctionTrace> {
    let zero = field.mesh.zero_column().ok_or(Error::MissingJunctionColumn)?;
    let xs = field.mesh.xs();
    if zero < 2 || zero + 2 >= xs.len() {
        return Err(Error::InvalidMesh("trace needs two columns on each side of x = 0".into()));
    }
    let extrapolate = |x1: f64, u1: f64, x2: f64, u2: f64| u1 + (0.0 - x1) * (u2 - u1) / (x2 - x1);
    Ok(field
        .mesh
        .ts()
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let row = field.row(j);
            let left = extrapolate(xs[zero - 1], row[zero - 1], xs[zero - 2], row[zero - 2]);
            let right = extrapolate(xs[zero + 1], row[zero + 1], xs[zero + 2], row[zero + 2]);
            (t, left, right)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_node_is_exact() {
        let m = Mesh::new(-2.0, 2.0, 200, 6.0, 200).unwrap();
        assert_eq!(m.zero_column(), Some(100));
        assert_eq!(m.xs()[200], 2.0);
        assert_eq!(m.ts()[200], 6.0);
        let m = Mesh::new(-0.3, 0.7, 10, 1.0, 4).unwrap();
        assert_eq!(m.zero_column(), Some(3));
    }

    #[test]
    fn trapezoid_weights_integrate_constants() {
        let m = Mesh::new(-1.0, 2.0, 7, 3.0, 5).unwrap();
        let total: f64 =
            (0..=7).flat_map(|i| (0..=5).map(move |j| (i, j))).map(|(i, j)| m.trapezoid_weight(i, j)).sum();
        assert!((total - 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(Mesh::new(1.0, -1.0, 4, 1.0, 4).is_err());
        assert!(Mesh::new(-1.0, 1.0, 4, 0.0, 4).is_err());
        assert!(Mesh::new(-1.0, 1.0, 0, 1.0, 4).is_err());
        assert!(Mesh::new(0.5, 0.5, 0, 1.0, 0).is_err());
        assert!(Mesh::with_time_range(0.5, 0.5, 0, 1.0, 1.0, 0).is_ok());
    }

    #[test]
    fn trace_of_linear_field() {
        let m = Mesh::new(-1.0, 1.0, 10, 1.0, 2).unwrap();
        let values = (0..m.len())
            .map(|k| {
                let (i, j) = m.coords(k);
                -0.8 * m.xs()[i] + 0.16 * m.ts()[j]
            })
            .collect();
        let f = ValueField { mesh: m, values };
        let tr = junction_trace(&f).unwrap();
        for (t, l, r) in tr {
            assert!((l - 0.16 * t).abs() < 1e-12 && (r - 0.16 * t).abs() < 1e-12);
        }
        let m = Mesh::new(0.05, 1.0, 10, 1.0, 2).unwrap();
        let f = ValueField { values: alloc::vec![0.0; m.len()], mesh: m };
        assert_eq!(junction_trace(&f), Err(Error::MissingJunctionColumn));
    }
}
