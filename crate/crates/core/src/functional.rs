//! Cost functionals `J(A) = int int phi u^A dx dt + int c A dt`.
//!
//! Quadrature is the tensor-product trapezoid rule on a [`Mesh`]. Only nodes
//! where the weight is nonzero are ever evaluated, so a [`CostPlan`] built
//! once per mesh turns each cost evaluation into one solver construction
//! plus a value query per supported node.

use alloc::format;
use alloc::vec::Vec;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flux::{InitialData, JunctionModel};
use crate::hj::JunctionSolver;
use crate::math::{smoothstep, smoothstep_slope};
use crate::mesh::{Mesh, ValueField};

/// `phi(x, t) = psi1(x) psi2'(t)`: positive on `(x1, x2) x (t1, t2)`,
/// negative on `(x1, x2) x (t3, t4)`, zero elsewhere.
///
/// `psi1` rises from 0 to 1 over `[x1, x1 + delta]`, stays at 1 and falls
/// back over `[x2 - delta, x2]`. `psi2` rises over `[t1, t2]`, stays at 1 on
/// `[t2, t3]` and falls over `[t3, t4]`. All ramps are cubic smoothsteps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxWeight {
    pub x1: f64,
    pub x2: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub delta: f64,
}

impl BoxWeight {
    pub fn new(x1: f64, x2: f64, t1: f64, t2: f64, t3: f64, t4: f64, delta: f64) -> Result<Self> {
        let all = [x1, x2, t1, t2, t3, t4, delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox("parameters must be finite".into()));
        }
        if !(0.0 < x1 && x1 < x2) {
            return Err(Error::InvalidBox(format!("need 0 < x1 < x2, got x1 = {x1}, x2 = {x2}")));
        }
        if !(0.0 < t1 && t1 < t2 && t2 < t3 && t3 < t4) {
            return Err(Error::InvalidBox(format!("need 0 < t1 < t2 < t3 < t4, got {t1}, {t2}, {t3}, {t4}")));
        }
        let gap = (x2 - x1).min(t2 - t1).min(t3 - t2).min(t4 - t3);
        if !(delta > 0.0 && delta < 0.25 * gap) {
            return Err(Error::InvalidBox(format!("delta = {delta} must lie in (0, {})", 0.25 * gap)));
        }
        Ok(Self { x1, x2, t1, t2, t3, t4, delta })
    }

    pub fn psi1(&self, x: f64) -> f64 {
        if x <= self.x1 || x >= self.x2 {
            return 0.0;
        }
        smoothstep((x - self.x1) / self.delta).min(smoothstep((self.x2 - x) / self.delta))
    }

    pub fn psi2(&self, t: f64) -> f64 {
        if t <= self.t3 {
            smoothstep((t - self.t1) / (self.t2 - self.t1))
        } else {
            smoothstep((self.t4 - t) / (self.t4 - self.t3))
        }
    }

    pub fn psi2_slope(&self, t: f64) -> f64 {
        if t > self.t1 && t < self.t2 {
            let w = self.t2 - self.t1;
            smoothstep_slope((t - self.t1) / w) / w
        } else if t > self.t3 && t < self.t4 {
            let w = self.t4 - self.t3;
            -smoothstep_slope((self.t4 - t) / w) / w
        } else {
            0.0
        }
    }

    pub fn phi(&self, x: f64, t: f64) -> f64 {
        let s = self.psi2_slope(t);
        if s == 0.0 {
            0.0
        } else {
            self.psi1(x) * s
        }
    }

    /// `x1 / t2 > x2 / t3`: no free-flow characteristic from the junction
    /// meets both the positive and the negative slab.
    pub fn geometry_condition(&self) -> bool {
        self.x1 / self.t2 > self.x2 / self.t3
    }
}

/// A weight stored on its own mesh and read back by bilinear interpolation.
/// Zero outside the mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledWeight {
    pub mesh: Mesh,
    /// Row-major in `t` then `x`, like [`ValueField`].
    pub values: Vec<f64>,
}

impl SampledWeight {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::IncompatibleGrids(format!("{} samples for {} nodes", values.len(), mesh.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh("weight samples must be finite".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn(mesh: Mesh, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..mesh.len())
            .map(|k| {
                let (i, j) = mesh.coords(k);
                f(mesh.xs()[i], mesh.ts()[j])
            })
            .collect();
        Self::new(mesh, values)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let (xs, ts) = (self.mesh.xs(), self.mesh.ts());
        let (ix, fx) = match locate(xs, x) {
            Some(v) => v,
            None => return 0.0,
        };
        let (it, ft) = match locate(ts, t) {
            Some(v) => v,
            None => return 0.0,
        };
        let at = |i: usize, j: usize| self.values[self.mesh.index(i, j)];
        let (ix1, it1) = ((ix + 1).min(xs.len() - 1), (it + 1).min(ts.len() - 1));
        let lo = at(ix, it) * (1.0 - fx) + at(ix1, it) * fx;
        let hi = at(ix, it1) * (1.0 - fx) + at(ix1, it1) * fx;
        lo * (1.0 - ft) + hi * ft
    }

    /// Largest absolute sample on the outer ring of the mesh.
    fn boundary_max(&self) -> f64 {
        let (nx, nt) = (self.mesh.xs().len(), self.mesh.ts().len());
        let mut m = 0.0f64;
        for k in 0..self.values.len() {
            let (i, j) = self.mesh.coords(k);
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == nt {
                m = m.max(self.values[k].abs());
            }
        }
        m
    }
}

/// Cell index and fraction of `v` in the sorted nodes, or `None` outside.
fn locate(nodes: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = nodes.len();
    if n == 1 {
        return (v == nodes[0]).then_some((0, 0.0));
    }
    if v < nodes[0] || v > nodes[n - 1] {
        return None;
    }
    let k = nodes.partition_point(|&a| a <= v).clamp(1, n - 1) - 1;
    Some((k, (v - nodes[k]) / (nodes[k + 1] - nodes[k])))
}

/// The `phi` of a cost functional.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Zero,
    Box(BoxWeight),
    Sampled(SampledWeight),
    /// `phi = -xi_x` for a sampled density weight `xi`, differentiated by
    /// centered differences at the quadrature mesh spacing.
    Density(SampledWeight),
}

impl Weight {
    /// `phi(x, t)`, with `h` the step used for [`Weight::Density`].
    pub fn phi(&self, x: f64, t: f64, h: f64) -> f64 {
        match self {
            Weight::Zero => 0.0,
            Weight::Box(b) => b.phi(x, t),
            Weight::Sampled(s) => s.eval(x, t),
            Weight::Density(xi) => -(xi.eval(x + h, t) - xi.eval(x - h, t)) / (2.0 * h),
        }
    }
}

/// `J(A) = int int phi u^A + linear_coeff int A`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    pub weight: Weight,
    pub linear_coeff: f64,
}

impl CostSpec {
    pub fn new(weight: Weight, linear_coeff: f64) -> Result<Self> {
        if !linear_coeff.is_finite() {
            return Err(Error::InvalidControl(format!("linear coefficient must be finite, got {linear_coeff}")));
        }
        Ok(Self { weight, linear_coeff })
    }

    pub fn flux_box(b: BoxWeight) -> Self {
        Self { weight: Weight::Box(b), linear_coeff: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub field_term: f64,
    pub linear_term: f64,
    pub nodes_evaluated: usize,
}

/// A quadrature node carrying `trapezoid weight * phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadNode {
    pub x: f64,
    pub t: f64,
    pub weight: f64,
}

/// Supported quadrature nodes of a [`CostSpec`] on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct CostPlan {
    mesh: Mesh,
    nodes: Vec<QuadNode>,
    linear_coeff: f64,
}

impl CostPlan {
    /// Fails if `phi` does not vanish on the mesh boundary, or if a box or
    /// sampled support sticks out of the mesh.
    pub fn new(spec: &CostSpec, mesh: &Mesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::InvalidMesh("empty mesh".into()));
        }
        let (xmin, xmax) = mesh.x_range();
        let (tmin, tmax) = mesh.t_range();
        match &spec.weight {
            Weight::Box(b) if b.x1 < xmin || b.x2 > xmax || b.t1 < tmin || b.t4 > tmax => {
                return Err(Error::IncompatibleGrids(format!(
                    "box [{}, {}] x [{}, {}] is not inside the mesh [{xmin}, {xmax}] x [{tmin}, {tmax}]",
                    b.x1, b.x2, b.t1, b.t4
                )));
            }
            Weight::Sampled(s) | Weight::Density(s) => {
                let leak = s.boundary_max();
                if leak > 0.0 {
                    return Err(Error::SupportLeakage(leak));
                }
                let (sx, st) = (s.mesh.x_range(), s.mesh.t_range());
                if sx.0 < xmin || sx.1 > xmax || st.0 < tmin || st.1 > tmax {
                    return Err(Error::IncompatibleGrids("sampled weight extends past the mesh".into()));
                }
            }
            _ => {}
        }
        let h = mesh.dx();
        let (nxs, nts) = (mesh.xs().len(), mesh.ts().len());
        let mut nodes = Vec::new();
        let mut leak = 0.0f64;
        for j in 0..nts {
            for i in 0..nxs {
                let (x, t) = (mesh.xs()[i], mesh.ts()[j]);
                let phi = spec.weight.phi(x, t, h);
                if phi == 0.0 {
                    continue;
                }
                if i == 0 || j == 0 || i + 1 == nxs || j + 1 == nts {
                    leak = leak.max(phi.abs());
                }
                nodes.push(QuadNode { x, t, weight: mesh.trapezoid_weight(i, j) * phi });
            }
        }
        if leak > 0.0 {
            return Err(Error::SupportLeakage(leak));
        }
        Ok(Self { mesh: mesh.clone(), nodes, linear_coeff: spec.linear_coeff })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    pub fn linear_coeff(&self) -> f64 {
        self.linear_coeff
    }

    /// `sum |weight|`, the quadrature of `|phi|`.
    pub fn total_variation(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight.abs()).sum()
    }

    /// `J` for the control held by `solver`.
    pub fn evaluate<E: Executor>(&self, solver: &JunctionSolver<'_>, exec: &E) -> Result<CostBreakdown> {
        let (_, tmax) = self.mesh.t_range();
        if tmax > solver.horizon() * (1.0 + 1e-12) {
            return Err(Error::InvalidMesh("mesh extends past the control horizon".into()));
        }
        let u0 = solver.initial_data();
        let values = exec.map(self.nodes.len(), |k| {
            let n = self.nodes[k];
            if n.t <= 0.0 {
                Ok(u0.eval(n.x))
            } else {
                solver.value(n.x, n.t).map(|v| v.0)
            }
        });
        let mut field_term = 0.0;
        for (n, v) in self.nodes.iter().zip(values) {
            field_term += n.weight * v?;
        }
        self.finish(field_term, solver.control())
    }

    /// `J` from a precomputed field on the plan's mesh.
    pub fn evaluate_field(&self, field: &ValueField, control: &Control) -> Result<CostBreakdown> {
        if field.mesh != self.mesh {
            return Err(Error::IncompatibleGrids("value field lives on another mesh".into()));
        }
        let mut field_term = 0.0;
        let mut k = 0;
        for (idx, &v) in field.values.iter().enumerate() {
            if k == self.nodes.len() {
                break;
            }
            let (i, j) = self.mesh.coords(idx);
            let n = self.nodes[k];
            if self.mesh.xs()[i] == n.x && self.mesh.ts()[j] == n.t {
                field_term += n.weight * v;
                k += 1;
            }
        }
        self.finish(field_term, control)
    }

    fn finish(&self, field_term: f64, control: &Control) -> Result<CostBreakdown> {
        let linear_term = if self.linear_coeff == 0.0 {
            0.0
        } else {
            self.linear_coeff * control.integrate(0.0, control.horizon())?
        };
        Ok(CostBreakdown {
            total: field_term + linear_term,
            field_term,
            linear_term,
            nodes_evaluated: self.nodes.len(),
        })
    }
}

/// `J(A)` by trapezoid quadrature on `mesh`.
pub fn cost<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    spec: &CostSpec,
    control: &Control,
    mesh: &Mesh,
    exec: &E,
) -> Result<CostBreakdown> {
    let plan = CostPlan::new(spec, mesh)?;
    let solver = JunctionSolver::new(model, u0, control)?;
    plan.evaluate(&solver, exec)
}

/// `-int int xi_x u^A` with centered differences for `xi_x`.
pub fn cost_weighted_density<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    xi: &SampledWeight,
    control: &Control,
    mesh: &Mesh,
    exec: &E,
) -> Result<CostBreakdown> {
    let spec = CostSpec { weight: Weight::Density(xi.clone()), linear_coeff: 0.0 };
    cost(model, u0, &spec, control, mesh, exec)
}
