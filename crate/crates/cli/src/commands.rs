//! The named experiments. Each writes its files into `out` and reports
//! whether the audits it ran passed.

use crate::config::{Command, ExperimentConfig, Setup};
use crate::output::{mesh_json, num, nums, opt, sci, write_csv, write_json};
use crate::prop;
use junction_core::conservation::cross_check;
use junction_core::functional::{cost, CostSpec};
use junction_core::mesh::junction_trace;
use junction_core::optimality::{
    check_optimality, component_report, default_samples, AuditSettings, ComponentReport, OptimalityAudit,
};
use junction_core::optimizer::{optimize_bangbang, optimize_relaxed, pattern_extract, OptimizeResult};
use junction_core::{Control, Executor, JunctionModel, JunctionSolver, Mesh};
use serde_json::{json, Value};
use std::fs;
use std::path::Path;

/// Why a run stopped before finishing its audits.
#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    /// Every validation problem of the config.
    Config(Vec<String>),
    /// A hypothesis of the reproduction experiment is violated.
    Condition(String),
    /// IO or numerical failure.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(errs) => {
                writeln!(f, "invalid configuration:")?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            Failure::Condition(m) => writeln!(f, "condition violated: {m}"),
            Failure::Runtime(m) => writeln!(f, "error: {m}"),
        }
    }
}

fn rt<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Audit verdict and the lines to print.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

pub fn run<E: Executor>(command: Command, config: &ExperimentConfig, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let setup = config.validate(command).map_err(Failure::Config)?;
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("creating {}: {e}", out.display())))?;
    match command {
        Command::Solve => solve(&setup, out, exec),
        Command::Cost => cost_cmd(&setup, out, exec),
        Command::Optimize => optimize(&setup, out, exec),
        Command::Audit => audit(&setup, out, exec),
        Command::Crosscheck => crosscheck(&setup, out, exec),
        Command::ReproduceProp511 => reproduce(&setup, out, exec),
    }
}

fn control_json(c: &Control) -> Value {
    json!({"times": nums(c.times()), "values": nums(c.values())})
}

/// `(t, A)` at every cell boundary; the last row repeats the last value.
fn write_control_csv(path: &Path, c: &Control) -> Result<(), Failure> {
    let vals = c.values();
    let rows = c.times().iter().enumerate().map(|(i, &t)| vec![sci(t), sci(vals[i.min(vals.len() - 1)])]);
    write_csv(path, &["t", "A"], rows).map_err(Failure::Runtime)
}

fn solve<E: Executor>(s: &Setup, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let (control, mesh) = (s.control.as_ref().expect("validated"), s.mesh.as_ref().expect("validated"));
    let solver = JunctionSolver::new(&s.model, &s.u0, control).map_err(rt)?;
    let field = solver.value_grid(mesh, exec).map_err(rt)?;
    let (xs, ts) = (mesh.xs(), mesh.ts());
    let rows = ts.iter().enumerate().flat_map(|(j, &t)| {
        let row = field.row(j);
        xs.iter().zip(row).map(move |(&x, &u)| vec![sci(x), sci(t), sci(u)])
    });
    write_csv(&out.join("u.csv"), &["x", "t", "u"], rows).map_err(Failure::Runtime)?;
    let rho = field.density_cells();
    let rows = ts
        .iter()
        .zip(&rho)
        .flat_map(|(&t, r)| xs.windows(2).zip(r).map(move |(w, &v)| vec![sci(0.5 * (w[0] + w[1])), sci(t), sci(v)]));
    write_csv(&out.join("rho_hj.csv"), &["x", "t", "rho"], rows).map_err(Failure::Runtime)?;
    let trace = junction_trace(&field).map_err(rt)?;
    let rows = trace.iter().map(|&(t, l, r)| vec![sci(t), sci(l), sci(r)]);
    write_csv(&out.join("trace.csv"), &["t", "u_left", "u_right"], rows).map_err(Failure::Runtime)?;
    write_control_csv(&out.join("control.csv"), control)?;
    let g = field.gradient_audit(&s.model);
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "solve",
            "mesh": mesh_json(mesh),
            "control": control_json(control),
            "max_abs_u": num(field.max_abs()),
            "gradient_audit": {
                "ux_left": [num(g.min_ux_left), num(g.max_ux_left)],
                "ux_right": [num(g.min_ux_right), num(g.max_ux_right)],
                "ut": [num(g.min_ut), num(g.max_ut)],
                "ux_left_lower_bound": num(g.ux_left_lo),
                "ux_right_lower_bound": num(g.ux_right_lo),
                "ut_upper_bound": num(g.ut_hi),
                "tol": num(g.tol),
                "passed": g.passed,
            },
            "passed": g.passed,
        }),
    )
    .map_err(Failure::Runtime)?;
    Ok(Outcome {
        passed: g.passed,
        lines: vec![format!(
            "solve: {} nodes, gradient audit {}",
            field.values.len(),
            if g.passed { "passed" } else { "FAILED" }
        )],
    })
}

fn cost_cmd<E: Executor>(s: &Setup, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let (control, mesh, spec) = (s.control.as_ref().unwrap(), s.mesh.as_ref().unwrap(), s.spec.as_ref().unwrap());
    let c = cost(&s.model, &s.u0, spec, control, mesh, exec).map_err(rt)?;
    write_json(
        &out.join("cost.json"),
        &json!({
            "J": num(c.total),
            "J_field_term": num(c.field_term),
            "J_linear_term": num(c.linear_term),
            "nodes_evaluated": c.nodes_evaluated,
            "mesh": mesh_json(mesh),
        }),
    )
    .map_err(Failure::Runtime)?;
    Ok(Outcome { passed: true, lines: vec![format!("cost: J = {}", sci(c.total))] })
}

fn result_json(r: &OptimizeResult, a0: f64) -> Value {
    let pattern = pattern_extract(r, a0);
    let (k, start, switches) = match &pattern {
        Ok(p) => (json!(p.k()), num(p.start_value), nums(&p.switch_times)),
        Err(_) => (Value::Null, Value::Null, Value::Null),
    };
    let rejection = match &pattern {
        Ok(_) => Value::Null,
        Err(rej) => Value::Array(
            rej.cells.iter().map(|&(i, v, d)| json!({"cell": i, "value": num(v), "distance": num(d)})).collect(),
        ),
    };
    json!({
        "method": r.method.as_str(),
        "k": k,
        "start_value": start,
        "switch_times": switches,
        "cost": num(r.cost),
        "evals": r.evals,
        "exhausted": r.exhausted,
        "control": control_json(&r.control),
        "cell_times": nums(&r.cell_times),
        "cell_values": nums(&r.cell_values),
        "integral": num(r.integral),
        "first_moment": num(r.first_moment),
        "pattern_rejection": rejection,
    })
}

fn history_rows(r: &OptimizeResult) -> impl Iterator<Item = Vec<String>> + '_ {
    r.history.iter().map(|&(i, c)| vec![r.method.as_str().to_string(), i.to_string(), sci(c)])
}

/// `relaxed >= bangbang - rel |bangbang|`.
fn dominance(bangbang: f64, relaxed: f64, rel: f64) -> bool {
    relaxed >= bangbang - rel * bangbang.abs()
}

fn optimize<E: Executor>(s: &Setup, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let (mesh, spec) = (s.mesh.as_ref().unwrap(), s.spec.as_ref().unwrap());
    let horizon = mesh.t_range().1;
    let a0 = s.model.a0();
    let method = s.optimizer.method.as_str();
    let mut runs = Vec::new();
    if method != "relaxed" {
        runs.push(optimize_bangbang(&s.model, &s.u0, spec, mesh, horizon, &s.optimizer.bangbang(), exec).map_err(rt)?);
    }
    if method != "bangbang" {
        runs.push(optimize_relaxed(&s.model, &s.u0, spec, mesh, horizon, &s.optimizer.relaxed(), exec).map_err(rt)?);
    }
    let mut lines = Vec::new();
    let mut passed = true;
    write_json(&out.join("result.json"), &result_json(&runs[0], a0)).map_err(Failure::Runtime)?;
    write_control_csv(&out.join("control.csv"), &runs[0].control)?;
    if runs.len() == 2 {
        let mut v = result_json(&runs[1], a0);
        let ok = dominance(runs[0].cost, runs[1].cost, s.tolerances.bangbang_rel);
        v["bangbang_cost"] = num(runs[0].cost);
        v["bangbang_dominates"] = json!(ok);
        write_json(&out.join("relaxed.json"), &v).map_err(Failure::Runtime)?;
        passed &= ok;
        lines.push(format!(
            "relaxed: J = {}, bang-bang dominance {}",
            sci(runs[1].cost),
            if ok { "holds" } else { "FAILS" }
        ));
    }
    write_csv(&out.join("history.csv"), &["method", "eval", "cost"], runs.iter().flat_map(history_rows))
        .map_err(Failure::Runtime)?;
    let r = &runs[0];
    lines.insert(
        0,
        format!(
            "{}: J = {}, {} evaluations{}",
            r.method.as_str(),
            sci(r.cost),
            r.evals,
            if r.exhausted { ", budget exhausted" } else { "" }
        ),
    );
    Ok(Outcome { passed, lines })
}

fn audit_json(a: &OptimalityAudit) -> Value {
    json!({
        "samples": a.samples.iter().map(|x| json!({
            "s": num(x.s),
            "H_plus": num(x.h_plus),
            "H_minus": num(x.h_minus),
            "A": num(x.a),
            "verdict": x.verdict.as_str(),
        })).collect::<Vec<_>>(),
        "violations": a.violations,
        "tolerances": {"tol_opt": num(a.tol_opt), "theta": num(a.theta)},
        "f_prime": num(a.f_prime),
        "last_component_start": opt(a.last_component_start),
    })
}

fn components_json(c: &ComponentReport) -> Value {
    json!({
        "intervals": c.intervals.iter().map(|&(a, b)| nums(&[a, b])).collect::<Vec<_>>(),
        "tau": opt(c.tau),
        "tau_hat": c.tau_hat.iter().map(|t| opt(*t)).collect::<Vec<_>>(),
        "s_bar_minus": opt(c.s_bar_minus),
        "theta": num(c.theta),
    })
}

/// `H+` on the audit samples inside `(s_bar_minus, tau)`: nonnegative and
/// nonincreasing up to `tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct HStructure {
    pub window: Option<(f64, f64)>,
    pub samples: usize,
    pub min: f64,
    pub max_rise: f64,
    pub tol: f64,
    pub nonnegative: bool,
    pub nonincreasing: bool,
}

pub fn h_structure(a: &OptimalityAudit, c: &ComponentReport) -> HStructure {
    let window = match (c.s_bar_minus, c.tau) {
        (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
        _ => None,
    };
    let inside: Vec<f64> = match window {
        Some((lo, hi)) => a.samples.iter().filter(|x| x.s > lo && x.s < hi).map(|x| x.h_plus).collect(),
        None => Vec::new(),
    };
    let min = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let max_rise = inside.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let tol = a.tol_opt;
    HStructure {
        window,
        samples: inside.len(),
        min: if inside.is_empty() { 0.0 } else { min },
        max_rise: if inside.len() < 2 { 0.0 } else { max_rise },
        tol,
        nonnegative: inside.iter().all(|&h| h >= -tol),
        nonincreasing: inside.windows(2).all(|w| w[1] - w[0] <= tol),
    }
}

fn h_structure_json(h: &HStructure) -> Value {
    json!({
        "window": h.window.map(|(a, b)| nums(&[a, b])).unwrap_or(Value::Null),
        "samples": h.samples,
        "min_H_plus": num(h.min),
        "max_rise": num(h.max_rise),
        "tol": num(h.tol),
        "nonnegative": h.nonnegative,
        "nonincreasing": h.nonincreasing,
    })
}

fn run_audit<E: Executor>(
    s: &Setup,
    control: &Control,
    spec: &CostSpec,
    mesh: &Mesh,
    exec: &E,
) -> Result<(OptimalityAudit, ComponentReport, HStructure), Failure> {
    let settings = AuditSettings {
        s_samples: Some(default_samples(control, s.tolerances.audit_samples)),
        tol_opt: s.tolerances.tol_opt,
        theta: s.tolerances.theta,
    };
    let a = check_optimality(&s.model, &s.u0, control, spec, mesh, &settings, exec).map_err(rt)?;
    let c = component_report(&s.model, &s.u0, control, spec, mesh, Some(a.theta), exec).map_err(rt)?;
    let h = h_structure(&a, &c);
    Ok((a, c, h))
}

fn audit<E: Executor>(s: &Setup, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let (control, mesh, spec) = (s.control.as_ref().unwrap(), s.mesh.as_ref().unwrap(), s.spec.as_ref().unwrap());
    let (a, c, h) = run_audit(s, control, spec, mesh, exec)?;
    let mut v = audit_json(&a);
    v["h_plus_structure"] = h_structure_json(&h);
    write_json(&out.join("audit.json"), &v).map_err(Failure::Runtime)?;
    write_json(&out.join("components.json"), &components_json(&c)).map_err(Failure::Runtime)?;
    Ok(Outcome {
        passed: a.violations == 0,
        lines: vec![format!(
            "audit: {} samples, {} violations at tol_opt = {}, {} components",
            a.samples.len(),
            a.violations,
            sci(a.tol_opt),
            c.intervals.len()
        )],
    })
}

fn crosscheck<E: Executor>(s: &Setup, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let (control, mesh) = (s.control.as_ref().unwrap(), s.crosscheck.as_ref().unwrap());
    let r = cross_check(&s.model, &s.u0, control, mesh, s.crosscheck_cfl, exec).map_err(rt)?;
    let tol = s.tolerances.crosscheck_l1;
    let mut passed = r.l1_density_error <= tol;
    let mut v = json!({
        "cells": r.cells,
        "l1_density_error": num(r.l1_density_error),
        "mass_balance_error": num(r.mass_balance_error),
        "tolerance": num(tol),
        "slices": r.slices.iter().map(|&(t, e)| json!({"t": num(t), "error": num(e)})).collect::<Vec<_>>(),
    });
    let mut lines =
        vec![format!("crosscheck: {} cells, relative L1 density error {}", r.cells, sci(r.l1_density_error))];
    if s.crosscheck_refine {
        let (xmin, xmax) = mesh.x_range();
        let fine = Mesh::new(xmin, xmax, 2 * mesh.nx(), mesh.t_range().1, mesh.nt()).map_err(rt)?;
        let f = cross_check(&s.model, &s.u0, control, &fine, s.crosscheck_cfl, exec).map_err(rt)?;
        let decreasing = f.l1_density_error < r.l1_density_error;
        passed &= decreasing;
        v["refined"] = json!({"cells": f.cells, "l1_density_error": num(f.l1_density_error)});
        v["decreasing"] = json!(decreasing);
        lines.push(format!("crosscheck: {} cells, relative L1 density error {}", f.cells, sci(f.l1_density_error)));
    }
    v["passed"] = json!(passed);
    write_json(&out.join("crosscheck.json"), &v).map_err(Failure::Runtime)?;
    Ok(Outcome { passed, lines })
}

/// `(rhs - lhs) / max(|lhs|, |rhs|)`: positive iff `lhs < rhs`.
fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (rhs - lhs) / scale
    }
}

/// Control `0` on `[0, t2]` and `A0` after.
pub fn switching_control(model: &JunctionModel, t2: f64, horizon: f64) -> Result<Control, Failure> {
    Control::new(vec![0.0, t2, horizon], vec![0.0, model.a0()]).map_err(rt)
}

fn reproduce<E: Executor>(s: &Setup, out: &Path, exec: &E) -> Result<Outcome, Failure> {
    let (mesh, spec) = (s.mesh.as_ref().unwrap(), s.spec.as_ref().unwrap());
    let b = s.flux_box.expect("validated");
    let conds = prop::conditions(&s.model, &s.u0, &b).map_err(Failure::Condition)?;
    let mut lines: Vec<String> = conds
        .iter()
        .map(|c| format!("{:>9} {}  [{}]", c.name, c.arithmetic, if c.holds { "ok" } else { "VIOLATED" }))
        .collect();
    if let Some(bad) = conds.iter().find(|c| !c.holds) {
        return Err(Failure::Condition(format!("{} {} fails: {}", bad.name, bad.statement, bad.arithmetic)));
    }

    let horizon = mesh.t_range().1;
    let a0 = s.model.a0();
    let free = Control::constant(horizon, a0).map_err(rt)?;
    let blocked = Control::constant(horizon, 0.0).map_err(rt)?;
    let switching = switching_control(&s.model, b.t2, horizon)?;
    let j_free = cost(&s.model, &s.u0, spec, &free, mesh, exec).map_err(rt)?.total;
    let j_blocked = cost(&s.model, &s.u0, spec, &blocked, mesh, exec).map_err(rt)?.total;
    let j_switch = cost(&s.model, &s.u0, spec, &switching, mesh, exec).map_err(rt)?.total;
    let margin_rel = s.tolerances.margin_rel;
    let ineqs = [("J_switch < J_A0", j_free), ("J_switch < J_zero", j_blocked)].map(|(name, other)| {
        let m = relative_margin(j_switch, other);
        (name, other, m, m > margin_rel)
    });
    lines.push(format!("J(A0) = {}, J(0) = {}, J(switch at t2) = {}", sci(j_free), sci(j_blocked), sci(j_switch)));
    for (name, _, m, ok) in &ineqs {
        lines.push(format!("{name}: relative margin {} {}", sci(*m), if *ok { "ok" } else { "FAILED" }));
    }

    let bb = optimize_bangbang(&s.model, &s.u0, spec, mesh, horizon, &s.optimizer.bangbang(), exec).map_err(rt)?;
    let below = bb.cost < j_free.min(j_blocked);
    lines.push(format!("bang-bang optimum J = {} after {} evaluations", sci(bb.cost), bb.evals));
    let (audit, comps, h) = run_audit(s, &bb.control, spec, mesh, exec)?;
    lines.push(format!("optimality audit: {} violations at tol_opt = {}", audit.violations, sci(audit.tol_opt)));
    lines.push(format!("H+ on (s_bar_minus, tau): nonnegative {}, nonincreasing {}", h.nonnegative, h.nonincreasing));
    write_csv(&out.join("history.csv"), &["method", "eval", "cost"], history_rows(&bb)).map_err(Failure::Runtime)?;

    let mut passed = ineqs.iter().all(|i| i.3) && below && audit.violations == 0 && h.nonnegative && h.nonincreasing;
    let mut report = json!({
        "mesh": mesh_json(mesh),
        "box": {"x1": num(b.x1), "x2": num(b.x2), "t1": num(b.t1), "t2": num(b.t2), "t3": num(b.t3), "t4": num(b.t4), "delta": num(b.delta)},
        "p": num(s.u0.slopes()[0]),
        "A0": num(a0),
        "conditions": conds.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        "costs": {"J_A0": num(j_free), "J_zero": num(j_blocked), "J_switch": num(j_switch)},
        "inequalities": ineqs.iter().map(|(name, other, m, ok)| json!({
            "name": name,
            "J_switch": num(j_switch),
            "J_other": num(*other),
            "relative_margin": num(*m),
            "required_margin": num(margin_rel),
            "holds": ok,
        })).collect::<Vec<_>>(),
        "optimizer": result_json(&bb, a0),
        "optimizer_below_constants": below,
        "audit": audit_json(&audit),
        "components": components_json(&comps),
        "h_plus_structure": h_structure_json(&h),
    });
    if s.optimizer.method == "both" {
        let rel = optimize_relaxed(&s.model, &s.u0, spec, mesh, horizon, &s.optimizer.relaxed(), exec).map_err(rt)?;
        let ok = dominance(bb.cost, rel.cost, s.tolerances.bangbang_rel);
        let switches = pattern_extract(&rel, a0).map(|p| p.k()).ok();
        let snaps = switches.is_some_and(|k| k <= 2);
        passed &= ok && snaps;
        lines.push(format!(
            "relaxed optimum J = {}, bang-bang dominance {}, snapped switches {:?}",
            sci(rel.cost),
            ok,
            switches
        ));
        report["relaxed"] = result_json(&rel, a0);
        report["bangbang_dominates"] = json!(ok);
        report["relaxed_snaps_to_at_most_two_switches"] = json!(snaps);
    }
    report["passed"] = json!(passed);
    write_json(&out.join("report.json"), &report).map_err(Failure::Runtime)?;
    Ok(Outcome { passed, lines })
}
