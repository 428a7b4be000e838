//! Finite-volume solver for the traffic conservation law with a flux limiter
//! at the junction, and the density cross-check against the value function.
//!
//! Cells are uniform and the junction sits on a face. Interior faces use the
//! Godunov flux of their line; the junction face passes
//! `min(-A, f^{L,+}(rho_l), f^{R,-}(rho_r))`. Outer boundaries are
//! transmissive.

use alloc::format;
use alloc::vec::Vec;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flux::{Hamiltonian, InitialData, JunctionModel};
use crate::hj::JunctionSolver;
use crate::math::ceil;
use crate::mesh::Mesh;

/// Godunov flux for the concave flux of `h`: `min(f^+(rho_l), f^-(rho_r))`.
pub fn godunov_flux(h: &Hamiltonian, rho_l: f64, rho_r: f64) -> Result<f64> {
    let (up, _) = h.flux_branches(rho_l)?;
    let (_, down) = h.flux_branches(rho_r)?;
    Ok(up.min(down))
}

fn godunov_clamped(h: &Hamiltonian, rho_l: f64, rho_r: f64) -> f64 {
    h.branches_clamped(rho_l).0.min(h.branches_clamped(rho_r).1)
}

/// Flux through the junction for limiter value `a`.
pub fn junction_flux(model: &JunctionModel, rho_l: f64, rho_r: f64, a: f64) -> Result<f64> {
    if a.is_nan() || a < model.a0() - 1e-12 || a > 1e-12 {
        return Err(Error::Domain { what: "A", value: a, lo: model.a0(), hi: 0.0 });
    }
    let (up, _) = model.left().flux_branches(rho_l)?;
    let (_, down) = model.right().flux_branches(rho_r)?;
    Ok((-a).max(0.0).min(up).min(down))
}

fn junction_clamped(model: &JunctionModel, rho_l: f64, rho_r: f64, a: f64) -> f64 {
    let up = model.left().branches_clamped(rho_l).0;
    let down = model.right().branches_clamped(rho_r).1;
    (-a).max(0.0).min(up).min(down)
}

/// Pair of junction traces together with the limiter value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GermElement {
    pub e_left: f64,
    pub e_right: f64,
    pub a: f64,
}

impl GermElement {
    /// Largest gap among `f^L(e_L)`, `f^R(e_R)` and the junction flux.
    pub fn residual(&self, model: &JunctionModel) -> Result<f64> {
        let fl = model.left().flux(self.e_left)?;
        let fr = model.right().flux(self.e_right)?;
        let q = junction_flux(model, self.e_left, self.e_right, self.a)?;
        Ok((fl - q).abs().max((fr - q).abs()))
    }

    pub fn is_member(&self, model: &JunctionModel, tol: f64) -> bool {
        self.residual(model).map(|r| r <= tol).unwrap_or(false)
    }
}

/// Cell densities at the requested output times.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    /// Cell faces; cell `i` is `[faces[i], faces[i + 1]]`.
    pub faces: Vec<f64>,
    pub times: Vec<f64>,
    /// `rho[j][i]` at `times[j]` in cell `i`.
    pub rho: Vec<Vec<f64>>,
    pub steps: usize,
    /// Largest `|mass change - dt (inflow - outflow)|` over all steps.
    pub mass_balance_error: f64,
    /// Largest change of any cell density over a single step.
    pub max_step_drift: f64,
}

impl DensityField {
    pub fn centers(&self) -> Vec<f64> {
        self.faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn dx(&self) -> f64 {
        self.faces[1] - self.faces[0]
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.rho[j].iter().sum::<f64>() * self.dx()
    }
}

/// Cell averages of `-u0_x` on the cells of `faces`.
pub fn initial_density(u0: &InitialData, faces: &[f64]) -> Vec<f64> {
    faces.windows(2).map(|w| -(u0.eval(w[1]) - u0.eval(w[0])) / (w[1] - w[0])).collect()
}

/// Explicit Godunov time stepping on the cells of `mesh` (its `x` nodes are
/// the faces, one of them at 0). Densities are recorded at every `t` node of
/// the mesh; the step is shortened to land on them exactly.
pub fn solve_cl(model: &JunctionModel, mesh: &Mesh, rho0: &[f64], control: &Control, cfl: f64) -> Result<DensityField> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Cfl(cfl));
    }
    let faces = mesh.xs().to_vec();
    let zero = mesh.zero_column().ok_or_else(|| Error::IncompatibleGrids("no cell face at x = 0".into()))?;
    if zero == 0 || zero + 1 == faces.len() {
        return Err(Error::IncompatibleGrids("the junction face must be interior".into()));
    }
    let cells = faces.len() - 1;
    if rho0.len() != cells {
        return Err(Error::IncompatibleGrids(format!("{} cells but {} initial densities", cells, rho0.len())));
    }
    for (i, &r) in rho0.iter().enumerate() {
        let h = if i < zero { model.left() } else { model.right() };
        if !(r >= -1e-12 && r <= h.capacity() + 1e-12) {
            return Err(Error::Domain { what: "rho0", value: r, lo: 0.0, hi: h.capacity() });
        }
    }
    let times = mesh.ts().to_vec();
    if times[times.len() - 1] > control.horizon() * (1.0 + 1e-12) {
        return Err(Error::IncompatibleGrids("output times exceed the control horizon".into()));
    }
    let dx = mesh.dx();
    let dt_max = cfl * dx / model.max_speed();
    let mut rho: Vec<f64> = rho0
        .iter()
        .enumerate()
        .map(|(i, &r)| r.clamp(0.0, if i < zero { model.left() } else { model.right() }.capacity()))
        .collect();
    let mut flux = alloc::vec![0.0; cells + 1];
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut steps = 0;
    let mut mass_err: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for &target in &times {
        while t < target {
            let dt = dt_max.min(target - t);
            let a = control.value_at(t);
            for (k, f) in flux.iter_mut().enumerate() {
                *f = if k == 0 {
                    godunov_clamped(model.left_or_right(faces[0]), rho[0], rho[0])
                } else if k == cells {
                    godunov_clamped(model.left_or_right(faces[cells]), rho[cells - 1], rho[cells - 1])
                } else if k == zero {
                    junction_clamped(model, rho[k - 1], rho[k], a)
                } else {
                    godunov_clamped(model.left_or_right(faces[k]), rho[k - 1], rho[k])
                };
            }
            let before: f64 = rho.iter().sum::<f64>() * dx;
            for i in 0..cells {
                let d = dt / dx * (flux[i] - flux[i + 1]);
                rho[i] += d;
                drift = drift.max(d.abs());
            }
            let after: f64 = rho.iter().sum::<f64>() * dx;
            mass_err = mass_err.max((after - before - dt * (flux[0] - flux[cells])).abs());
            t = if target - t <= dt_max { target } else { t + dt };
            steps += 1;
        }
        out.push(rho.clone());
    }
    Ok(DensityField { faces, times, rho: out, steps, mass_balance_error: mass_err, max_step_drift: drift })
}

impl JunctionModel {
    /// Hamiltonian of the line containing a nonzero position.
    fn left_or_right(&self, x: f64) -> &Hamiltonian {
        if x < 0.0 {
            self.left()
        } else {
            self.right()
        }
    }
}

/// Outcome of comparing `-u_x` with the finite-volume density.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheckReport {
    /// Max over time slices of the relative L1 density gap.
    pub l1_density_error: f64,
    pub mass_balance_error: f64,
    /// `(t, relative L1 gap)` per slice.
    pub slices: Vec<(f64, f64)>,
    pub cells: usize,
}

/// Compares the cell averages `-(u(x_{i+1}) - u(x_i)) / dx` of the value
/// function with [`solve_cl`] on the cells of `mesh`, at its time nodes.
///
/// The finite-volume domain is padded by `c T` on both sides so that its
/// outer boundaries cannot reach the compared cells.
pub fn cross_check<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    mesh: &Mesh,
    cfl: f64,
    exec: &E,
) -> Result<CrossCheckReport> {
    if mesh.zero_column().is_none() {
        return Err(Error::IncompatibleGrids("mesh has no face at x = 0".into()));
    }
    if mesh.t_range().0 != 0.0 {
        return Err(Error::IncompatibleGrids("cross-check times must start at 0".into()));
    }
    let solver = JunctionSolver::new(model, u0, control)?;
    let (xmin, xmax) = mesh.x_range();
    let dx = mesh.dx();
    let pad = ceil(model.max_speed() * mesh.t_range().1 / dx) as usize + 2;
    let wide = Mesh::with_time_range(
        xmin - pad as f64 * dx,
        xmax + pad as f64 * dx,
        mesh.nx() + 2 * pad,
        0.0,
        mesh.t_range().1,
        mesh.nt(),
    )?;
    if wide.zero_column().is_none() {
        return Err(Error::IncompatibleGrids("padding lost the junction face".into()));
    }
    let rho0 = initial_density(u0, wide.xs());
    let cl = solve_cl(model, &wide, &rho0, control, cfl)?;
    let faces = mesh.xs();
    let nf = faces.len();
    let mut slices = Vec::with_capacity(mesh.ts().len());
    for (j, &t) in mesh.ts().iter().enumerate() {
        let u: Vec<f64> = if t == 0.0 {
            faces.iter().map(|&x| u0.eval(x)).collect()
        } else {
            exec.map(nf, |i| solver.value(faces[i], t).map(|v| v.0).unwrap_or(f64::NAN))
        };
        let fv = &cl.rho[j][pad..pad + mesh.nx()];
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..mesh.nx() {
            let hj = -(u[i + 1] - u[i]) / dx;
            num += (hj - fv[i]).abs();
            den += hj.abs();
        }
        let rel = if den > 0.0 { num / den } else { num * dx };
        slices.push((t, rel));
    }
    let l1 = slices.iter().fold(0.0f64, |m, s| m.max(s.1));
    Ok(CrossCheckReport { l1_density_error: l1, mass_balance_error: cl.mass_balance_error, slices, cells: mesh.nx() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn unit() -> JunctionModel {
        JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap()
    }

    #[test]
    fn godunov_examples() {
        let h = Hamiltonian::quadratic(1.0, 1.0).unwrap();
        assert!((godunov_flux(&h, 0.9, 0.1).unwrap() - 0.25).abs() < 1e-15);
        for r in [0.0, 0.2, 0.5, 0.7, 1.0] {
            assert!((godunov_flux(&h, r, r).unwrap() - h.flux(r).unwrap()).abs() < 1e-15);
        }
        assert_eq!(godunov_flux(&h, 0.0, 1.0).unwrap(), 0.0);
        assert!(godunov_flux(&h, 1.2, 0.0).is_err());
    }

    #[test]
    fn junction_flux_examples() {
        let m = unit();
        assert_eq!(junction_flux(&m, 0.3, 0.4, 0.0).unwrap(), 0.0);
        assert!((junction_flux(&m, 0.5, 0.5, -0.25).unwrap() - 0.25).abs() < 1e-15);
        assert!((junction_flux(&m, 0.9, 0.1, -0.09).unwrap() - 0.09).abs() < 1e-15);
        assert!(junction_flux(&m, 0.9, 0.1, -0.3).is_err());
    }

    #[test]
    fn germ_membership() {
        let m = unit();
        assert!(GermElement { e_left: 0.9, e_right: 0.1, a: -0.09 }.is_member(&m, 1e-10));
        assert!(!GermElement { e_left: 0.9, e_right: 0.1, a: -0.25 }.is_member(&m, 1e-10));
        assert!(GermElement { e_left: 0.5, e_right: 0.5, a: -0.25 }.is_member(&m, 1e-10));
    }

    #[test]
    fn vacuum_stays_empty() {
        let m = unit();
        let mesh = Mesh::new(-1.0, 1.0, 40, 2.0, 4).unwrap();
        let ctl = Control::new(alloc::vec![0.0, 1.0, 2.0], alloc::vec![0.0, -0.25]).unwrap();
        let f = solve_cl(&m, &mesh, &alloc::vec![0.0; 40], &ctl, 0.9).unwrap();
        assert!(f.rho.iter().flatten().all(|&r| r == 0.0));
    }

    #[test]
    fn germ_state_is_stationary() {
        let m = unit();
        let mesh = Mesh::new(-1.0, 1.0, 40, 2.0, 4).unwrap();
        let rho0: Vec<f64> = (0..40).map(|i| if i < 20 { 0.9 } else { 0.1 }).collect();
        let ctl = Control::constant(2.0, -0.09).unwrap();
        let f = solve_cl(&m, &mesh, &rho0, &ctl, 0.9).unwrap();
        assert!(f.max_step_drift <= 1e-10, "{}", f.max_step_drift);
        assert!(f.mass_balance_error <= 1e-12);
    }

    #[test]
    fn red_light_builds_a_queue() {
        let m = unit();
        let mesh = Mesh::new(-1.0, 1.0, 200, 1.0, 1).unwrap();
        let rho0: Vec<f64> = (0..200).map(|i| if i < 100 { 0.3 } else { 0.0 }).collect();
        let ctl = Control::constant(1.0, 0.0).unwrap();
        let f = solve_cl(&m, &mesh, &rho0, &ctl, 0.9).unwrap();
        let last = &f.rho[1];
        // Backward shock between 0.3 and 1 moves at -f(0.3)/0.7 = -0.3.
        assert!((last[99] - 1.0).abs() < 1e-6);
        assert!((last[90] - 1.0).abs() < 1e-3);
        assert!((last[50] - 0.3).abs() < 1e-6);
        assert!(last[100..].iter().all(|&r| r == 0.0));
        assert!(f.rho.iter().flatten().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn rejects_bad_setups() {
        let m = unit();
        let ctl = Control::constant(1.0, 0.0).unwrap();
        let mesh = Mesh::new(-1.0, 1.0, 10, 1.0, 1).unwrap();
        assert_eq!(solve_cl(&m, &mesh, &[0.0; 10], &ctl, 1.5), Err(Error::Cfl(1.5)));
        assert!(solve_cl(&m, &mesh, &[0.0; 9], &ctl, 0.5).is_err());
        let off = Mesh::new(-0.95, 1.0, 10, 1.0, 1).unwrap();
        assert!(solve_cl(&m, &off, &[0.0; 10], &ctl, 0.5).is_err());
    }

    #[test]
    fn cross_check_free_flow_is_exact() {
        let m = unit();
        let u0 = InitialData::linear(-0.8).unwrap();
        let ctl = Control::constant(2.0, -0.25).unwrap();
        let mesh = Mesh::new(-1.0, 1.0, 40, 2.0, 4).unwrap();
        let r = cross_check(&m, &u0, &ctl, &mesh, 0.9, &Sequential).unwrap();
        assert!(r.l1_density_error < 1e-10, "{r:?}");
    }
}
