//! First-order optimality audit.
//!
//! `H(s)` weighs the box points whose selected optimal path sits at the
//! junction at time `s`:
//!
//! ```text
//! H(s) = int_s^T int_0^inf phi(x, t) 1{gamma(s) = 0} dx dt
//! ```
//!
//! A minimizer must satisfy `H+(s) <= f'(A(s))` where `A(s) < 0` and
//! `H-(s) >= f'(A(s))` where `A(s) > A0`, with `H+` / `H-` taken along the
//! most / least at-zero paths. After the start of the last connected
//! component of `{u^A(0, .) < u^{A0}(0, .)}` the first inequality sharpens
//! to an equality on `{A0 < A < 0}`.

use alloc::vec::Vec;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flux::{InitialData, JunctionModel};
use crate::functional::{CostPlan, CostSpec, Weight};
use crate::hj::{JunctionSolver, Selection, TrajectoryDescriptor};
use crate::math::bisect_first_true;
use crate::mesh::Mesh;

/// Cells of the default sample partition of `(0, T)`.
pub const DEFAULT_SAMPLES: usize = 128;

/// Distance kept between a sample and a breakpoint of the control.
const BREAKPOINT_NUDGE: f64 = 1e-9;

/// Controls are compared with `0` and `A0` up to this slack.
const VALUE_TOL: f64 = 1e-12;

/// Selected paths of the supported quadrature nodes with `x > 0`.
#[derive(Clone, Debug)]
pub struct DwellMap {
    entries: Vec<(f64, TrajectoryDescriptor)>,
}

impl DwellMap {
    pub fn new<E: Executor>(solver: &JunctionSolver<'_>, plan: &CostPlan, select: Selection, exec: &E) -> Result<Self> {
        let nodes: Vec<_> = plan.nodes().iter().filter(|n| n.x > 0.0 && n.t > 0.0).copied().collect();
        let points: Vec<(f64, f64)> = nodes.iter().map(|n| (n.x, n.t)).collect();
        let paths = solver.descriptors(&points, select, exec)?;
        Ok(Self { entries: nodes.iter().map(|n| n.weight).zip(paths).collect() })
    }

    /// `H(s)` by the plan's quadrature.
    pub fn h(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (w, d) in &self.entries {
            if d.t > s && d.dwells_at(s) {
                acc += w;
            }
        }
        acc
    }

    pub fn paths(&self) -> impl Iterator<Item = &TrajectoryDescriptor> {
        self.entries.iter().map(|e| &e.1)
    }
}

/// `H(s)` for one selection rule.
#[allow(clippy::too_many_arguments)]
pub fn cal_h<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    spec: &CostSpec,
    mesh: &Mesh,
    s: f64,
    select: Selection,
    exec: &E,
) -> Result<f64> {
    let horizon = control.horizon();
    if !(s > 0.0 && s < horizon) {
        return Err(Error::Domain { what: "s", value: s, lo: 0.0, hi: horizon });
    }
    let plan = CostPlan::new(spec, mesh)?;
    let solver = JunctionSolver::new(model, u0, control)?;
    Ok(DwellMap::new(&solver, &plan, select, exec)?.h(s))
}

/// Which inequality a sample was held to and whether it passed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    /// `H+ - f' > tol` where `A < 0`.
    FailRestricted,
    /// `H- - f' < -tol` where `A > A0`.
    FailRelaxed,
    /// `|H+ - f'| > tol` where `A0 < A < 0`, after the last component starts.
    FailInteriorEquality,
    /// `H+ - f' < -tol` where `A = 0`, after the last component starts.
    FailBlocked,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::FailRestricted => "fail: H+ above f' where A < 0",
            Verdict::FailRelaxed => "fail: H- below f' where A > A0",
            Verdict::FailInteriorEquality => "fail: H+ differs from f' on the last component",
            Verdict::FailBlocked => "fail: H+ below f' where A = 0 on the last component",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditSample {
    pub s: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub a: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityAudit {
    pub samples: Vec<AuditSample>,
    pub tol_opt: f64,
    pub theta: f64,
    /// `f'`, constant for a linear cost.
    pub f_prime: f64,
    /// Start of the last component, from which the sharper rule applies.
    pub last_component_start: Option<f64>,
    pub violations: usize,
}

/// Knobs of [`check_optimality`]. `None` picks the documented default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditSettings {
    pub s_samples: Option<Vec<f64>>,
    pub tol_opt: Option<f64>,
    pub theta: Option<f64>,
}

/// Midpoints of `cells` uniform cells of `(0, T)`, moved `1e-9` off any
/// switch time of the control.
pub fn default_samples(control: &Control, cells: usize) -> Vec<f64> {
    let horizon = control.horizon();
    (0..cells)
        .map(|k| {
            let mut s = horizon * (k as f64 + 0.5) / cells as f64;
            for &b in control.switch_times() {
                if (s - b).abs() < BREAKPOINT_NUDGE {
                    s = b + BREAKPOINT_NUDGE;
                }
            }
            s
        })
        .collect()
}

/// Default `theta = 1e-6 (1 + max |u^{A0}|)`, the sup taken over `mesh`.
pub fn default_theta<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    horizon: f64,
    mesh: &Mesh,
    exec: &E,
) -> Result<f64> {
    let free = Control::constant(horizon, model.a0())?;
    let field = JunctionSolver::new(model, u0, &free)?.value_grid(mesh, exec)?;
    Ok(1e-6 * (1.0 + field.max_abs()))
}

fn f_prime(spec: &CostSpec) -> f64 {
    spec.linear_coeff
}

/// Audits the first-order conditions at every sample.
///
/// The default `tol_opt` is five times the largest change of `H+` or `H-`
/// between `mesh` and the mesh with every other node (the refined mesh if
/// `mesh` cannot be coarsened).
pub fn check_optimality<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    spec: &CostSpec,
    mesh: &Mesh,
    settings: &AuditSettings,
    exec: &E,
) -> Result<OptimalityAudit> {
    let a0 = model.a0();
    let solver = JunctionSolver::new(model, u0, control)?;
    let plan = CostPlan::new(spec, mesh)?;
    let plus = DwellMap::new(&solver, &plan, Selection::MostAtZero, exec)?;
    let minus = DwellMap::new(&solver, &plan, Selection::LeastAtZero, exec)?;
    let samples = match &settings.s_samples {
        Some(s) => s.clone(),
        None => default_samples(control, DEFAULT_SAMPLES),
    };
    let hp: Vec<f64> = samples.iter().map(|&s| plus.h(s)).collect();
    let hm: Vec<f64> = samples.iter().map(|&s| minus.h(s)).collect();
    let tol_opt = match settings.tol_opt {
        Some(t) => t,
        None => {
            let other = match mesh.coarsened() {
                Some(m) => m,
                None => mesh.refined(),
            };
            let plan2 = CostPlan::new(spec, &other)?;
            let plus2 = DwellMap::new(&solver, &plan2, Selection::MostAtZero, exec)?;
            let minus2 = DwellMap::new(&solver, &plan2, Selection::LeastAtZero, exec)?;
            let mut gap = 0.0f64;
            for (k, &s) in samples.iter().enumerate() {
                gap = gap.max((hp[k] - plus2.h(s)).abs()).max((hm[k] - minus2.h(s)).abs());
            }
            (5.0 * gap).max(1e-9 * plan.total_variation())
        }
    };
    let theta = match settings.theta {
        Some(t) => t,
        None => default_theta(model, u0, control.horizon(), mesh, exec)?,
    };
    let components = components(&solver, model, u0, mesh, theta)?;
    let last_start = components.last().map(|c| c.0);
    let fp = f_prime(spec);
    let mut out = Vec::with_capacity(samples.len());
    let mut violations = 0;
    for (k, &s) in samples.iter().enumerate() {
        let a = control.value_at(s);
        let restricted = a < -VALUE_TOL;
        let relaxed = a > a0 + VALUE_TOL;
        let mut verdict = Verdict::Pass;
        if restricted && hp[k] - fp > tol_opt {
            verdict = Verdict::FailRestricted;
        } else if relaxed && hm[k] - fp < -tol_opt {
            verdict = Verdict::FailRelaxed;
        } else if matches!(last_start, Some(a_bar) if s > a_bar) {
            if restricted && relaxed && (hp[k] - fp).abs() > tol_opt {
                verdict = Verdict::FailInteriorEquality;
            } else if !restricted && hp[k] - fp < -tol_opt {
                verdict = Verdict::FailBlocked;
            }
        }
        if verdict != Verdict::Pass {
            violations += 1;
        }
        out.push(AuditSample { s, h_plus: hp[k], h_minus: hm[k], a, verdict });
    }
    Ok(OptimalityAudit { samples: out, tol_opt, theta, f_prime: fp, last_component_start: last_start, violations })
}

/// Connected components of `{u^A(0, .) < u^{A0}(0, .) - theta}` and the
/// switch structure inside them.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentReport {
    pub intervals: Vec<(f64, f64)>,
    /// Per component, the first switch from `0` to `A0` inside it, if the
    /// control is bang-bang.
    pub tau_hat: Vec<Option<f64>>,
    /// Latest time in `[t1, t2]` at which some least-at-zero path to a
    /// lagging point of the positive slab still waits at the junction.
    pub tau: Option<f64>,
    /// Arrival time at the junction of the most-at-zero path to the end of
    /// the last component.
    pub s_bar_minus: Option<f64>,
    pub theta: f64,
}

fn components(
    solver: &JunctionSolver<'_>,
    model: &JunctionModel,
    u0: &InitialData,
    mesh: &Mesh,
    theta: f64,
) -> Result<Vec<(f64, f64)>> {
    let free = Control::constant(solver.horizon(), model.a0())?;
    let reference = JunctionSolver::new(model, u0, &free)?;
    let lag = |t: f64| reference.junction_value(t) - solver.junction_value(t) > theta;
    let ts = mesh.ts();
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (j, &t) in ts.iter().enumerate() {
        let inside = lag(t);
        match (open, inside) {
            (None, true) => {
                let start = if j == 0 { t } else { bisect_first_true(lag, ts[j - 1], t, 64) };
                open = Some(start);
            }
            (Some(a), false) => {
                let end = bisect_first_true(|s| !lag(s), ts[j - 1], t, 64);
                out.push((a, end));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        out.push((a, ts[ts.len() - 1]));
    }
    Ok(out)
}

/// Components of the junction lag on the time nodes of `mesh`, refined by
/// bisection, plus `tau`, `tau_hat` and `s_bar_minus`. `tau` needs a box
/// weight.
#[allow(clippy::too_many_arguments)]
pub fn component_report<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    control: &Control,
    spec: &CostSpec,
    mesh: &Mesh,
    theta: Option<f64>,
    exec: &E,
) -> Result<ComponentReport> {
    let solver = JunctionSolver::new(model, u0, control)?;
    let theta = match theta {
        Some(t) => t,
        None => default_theta(model, u0, control.horizon(), mesh, exec)?,
    };
    let intervals = components(&solver, model, u0, mesh, theta)?;
    let a0 = model.a0();
    let bangbang = control.is_bangbang(a0);
    let tau_hat = intervals
        .iter()
        .map(|&(a, b)| {
            if !bangbang {
                return None;
            }
            let times = control.times();
            let values = control.values();
            (1..values.len())
                .find(|&i| times[i] > a && times[i] < b && values[i - 1] == 0.0 && values[i] != 0.0)
                .map(|i| times[i])
        })
        .collect();
    let tau = match &spec.weight {
        Weight::Box(bx) => {
            let free = Control::constant(control.horizon(), a0)?;
            let reference = JunctionSolver::new(model, u0, &free)?;
            let points: Vec<(f64, f64)> = mesh
                .ts()
                .iter()
                .filter(|&&t| t > bx.t1 && t < bx.t2)
                .flat_map(|&t| mesh.xs().iter().filter(|&&x| x > bx.x1 && x < bx.x2).map(move |&x| (x, t)))
                .collect();
            let lagging: Vec<(f64, f64)> = points
                .into_iter()
                .filter(|&(x, t)| match (solver.value(x, t), reference.value(x, t)) {
                    (Ok(u), Ok(r)) => u.0 < r.0 - theta,
                    _ => false,
                })
                .collect();
            let paths = solver.descriptors(&lagging, Selection::LeastAtZero, exec)?;
            paths
                .iter()
                .filter_map(|d| {
                    let (a, b) = d.dwell_interval()?;
                    let s = b.min(bx.t2);
                    (s >= bx.t1 && s >= a && s < d.t).then_some(s)
                })
                .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))))
        }
        _ => None,
    };
    let s_bar_minus = match intervals.last() {
        Some(&(_, b_bar)) => {
            let d = solver.optimal_trajectory(0.0, b_bar.max(f64::MIN_POSITIVE), Selection::MostAtZero)?;
            d.dwell_interval().map(|(a, _)| a)
        }
        None => None,
    };
    Ok(ComponentReport { intervals, tau_hat, tau, s_bar_minus, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::functional::BoxWeight;
    use alloc::vec;

    fn setup() -> (JunctionModel, InitialData, CostSpec, Mesh) {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.8).unwrap();
        let b = BoxWeight::new(0.1, 0.18, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap();
        (m, u0, CostSpec::flux_box(b), Mesh::new(0.09, 0.19, 20, 6.0, 240).unwrap())
    }

    #[test]
    fn zero_weight_gives_zero() {
        let (m, u0, _, mesh) = setup();
        let a = Control::constant(6.0, 0.0).unwrap();
        let spec = CostSpec::new(Weight::Zero, 0.0).unwrap();
        assert_eq!(cal_h(&m, &u0, &a, &spec, &mesh, 1.0, Selection::MostAtZero, &Sequential).unwrap(), 0.0);
    }

    #[test]
    fn nothing_above_the_support() {
        let (m, u0, spec, mesh) = setup();
        let a = Control::constant(6.0, 0.0).unwrap();
        assert_eq!(cal_h(&m, &u0, &a, &spec, &mesh, 5.2, Selection::MostAtZero, &Sequential).unwrap(), 0.0);
        assert!(cal_h(&m, &u0, &a, &spec, &mesh, 0.0, Selection::MostAtZero, &Sequential).is_err());
    }

    #[test]
    fn most_at_zero_dominates_on_positive_slab() {
        let (m, u0, spec, mesh) = setup();
        let a = Control::new(vec![0.0, 1.5, 6.0], vec![0.0, -0.25]).unwrap();
        for &s in &[0.5, 1.0, 1.2, 1.4] {
            let p = cal_h(&m, &u0, &a, &spec, &mesh, s, Selection::MostAtZero, &Sequential).unwrap();
            let q = cal_h(&m, &u0, &a, &spec, &mesh, s, Selection::LeastAtZero, &Sequential).unwrap();
            assert!(p >= q - 1e-15, "{s}: {p} {q}");
        }
    }

    #[test]
    fn free_flow_is_optimal_for_nonpositive_weight() {
        let (m, u0, _, mesh) = setup();
        let b = BoxWeight::new(0.1, 0.18, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap();
        let w = crate::functional::SampledWeight::from_fn(mesh.clone(), |x, t| -b.psi1(x) * b.psi2(t)).unwrap();
        let spec = CostSpec::new(Weight::Sampled(w), 0.0).unwrap();
        let a = Control::constant(6.0, m.a0()).unwrap();
        let audit = check_optimality(&m, &u0, &a, &spec, &mesh, &AuditSettings::default(), &Sequential).unwrap();
        assert_eq!(audit.violations, 0);
        assert_eq!(audit.samples.len(), DEFAULT_SAMPLES);
    }

    #[test]
    fn blocked_is_optimal_for_nonnegative_weight() {
        let (m, u0, _, mesh) = setup();
        let b = BoxWeight::new(0.1, 0.18, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap();
        let w = crate::functional::SampledWeight::from_fn(mesh.clone(), |x, t| b.psi1(x) * b.psi2(t)).unwrap();
        let spec = CostSpec::new(Weight::Sampled(w), 0.0).unwrap();
        let a = Control::constant(6.0, 0.0).unwrap();
        let audit = check_optimality(&m, &u0, &a, &spec, &mesh, &AuditSettings::default(), &Sequential).unwrap();
        assert_eq!(audit.violations, 0);
    }

    #[test]
    fn free_flow_has_no_components() {
        let (m, u0, spec, mesh) = setup();
        let a = Control::constant(6.0, m.a0()).unwrap();
        let r = component_report(&m, &u0, &a, &spec, &mesh, None, &Sequential).unwrap();
        assert!(r.intervals.is_empty());
        assert_eq!(r.s_bar_minus, None);
    }

    #[test]
    fn switching_control_has_one_component() {
        let (m, u0, spec, mesh) = setup();
        let a = Control::new(vec![0.0, 1.5, 6.0], vec![0.0, -0.25]).unwrap();
        let r = component_report(&m, &u0, &a, &spec, &mesh, None, &Sequential).unwrap();
        assert_eq!(r.intervals.len(), 1);
        let (lo, hi) = r.intervals[0];
        // The queue empties when 0.25 (b - 1.5) meets 0.16 b.
        assert!(lo < 0.03 && (hi - 0.375 / 0.09).abs() < 1e-3, "{lo} {hi}");
        assert_eq!(r.tau_hat, vec![Some(1.5)]);
        let tau = r.tau.unwrap();
        assert!(tau > 1.3 && tau <= 1.5, "{tau}");
        assert!(r.s_bar_minus.unwrap() < 1e-6);
        let wider = component_report(&m, &u0, &a, &spec, &mesh, Some(2.0 * r.theta), &Sequential).unwrap();
        assert!(wider.intervals[0].0 >= lo && wider.intervals[0].1 <= hi);
    }

    #[test]
    fn samples_avoid_switch_times() {
        let mid = 6.0 * 10.5 / 128.0;
        let a = Control::new(vec![0.0, mid, 6.0], vec![0.0, -0.25]).unwrap();
        let s = default_samples(&a, 128);
        assert_eq!(s.len(), 128);
        assert!(s.iter().all(|&v| v != mid));
    }
}
