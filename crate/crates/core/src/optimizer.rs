//! Minimizing `J` over limiters.
//!
//! [`optimize_bangbang`] enumerates the number of switches and the starting
//! value and runs coordinate descent on the switch times, one golden-section
//! search per coordinate. [`optimize_relaxed`] works on cell values in
//! `[A0, 0]` over a uniform partition. Both count distinct controls against
//! the budget and memoize costs by the canonical control.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::control::{uniform_times, Control};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flux::{InitialData, JunctionModel};
use crate::functional::{CostPlan, CostSpec, Weight};
use crate::hj::JunctionSolver;
use crate::math::golden_section;
use crate::mesh::Mesh;

/// Multi-start seedings per `(k, start value)`.
pub const SEEDS: usize = 5;

/// Relative distance to `{A0, 0}` accepted by [`pattern_extract`].
pub const SNAP_REL: f64 = 1e-3;

/// A control taking only the values `A0` and `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BangBangPattern {
    /// `A0` or `0`.
    pub start_value: f64,
    pub switch_times: Vec<f64>,
    pub horizon: f64,
}

impl BangBangPattern {
    pub fn k(&self) -> usize {
        self.switch_times.len()
    }

    pub fn to_control(&self, a0: f64) -> Result<Control> {
        let other = if self.start_value == 0.0 { a0 } else { 0.0 };
        let mut times = Vec::with_capacity(self.switch_times.len() + 2);
        times.push(0.0);
        times.extend_from_slice(&self.switch_times);
        times.push(self.horizon);
        let values = (0..=self.switch_times.len()).map(|i| if i % 2 == 0 { self.start_value } else { other }).collect();
        Control::new(times, values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    BangBang,
    Relaxed,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BangBang => "bangbang",
            Method::Relaxed => "relaxed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub method: Method,
    pub control: Control,
    /// Cell partition the search worked on: the relaxed grid, or the
    /// canonical cells of a bang-bang control.
    pub cell_times: Vec<f64>,
    pub cell_values: Vec<f64>,
    pub cost: f64,
    /// Distinct controls evaluated.
    pub evals: usize,
    /// `(evaluation index, incumbent cost)` at every improvement.
    pub history: Vec<(usize, f64)>,
    pub exhausted: bool,
    /// `int A` and `int s A(s) ds` of the result.
    pub integral: f64,
    pub first_moment: f64,
}

/// Settings of [`optimize_bangbang`].
#[derive(Clone, Debug, PartialEq)]
pub struct BangBangSettings {
    pub k_max: usize,
    pub budget: usize,
    /// Coordinate-descent sweeps per start.
    pub sweeps: usize,
    /// Golden-section evaluations per coordinate.
    pub line_evals: usize,
}

impl Default for BangBangSettings {
    fn default() -> Self {
        Self { k_max: 4, budget: 5000, sweeps: 2, line_evals: 20 }
    }
}

/// Settings of [`optimize_relaxed`].
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedSettings {
    pub cells: usize,
    pub budget: usize,
    pub sweeps: usize,
    pub line_evals: usize,
}

impl Default for RelaxedSettings {
    fn default() -> Self {
        Self { cells: 8, budget: 1000, sweeps: 4, line_evals: 20 }
    }
}

/// Budgeted, memoized cost evaluation.
struct Evaluator<'a, E: Executor> {
    model: &'a JunctionModel,
    u0: &'a InitialData,
    plan: CostPlan,
    exec: &'a E,
    cache: BTreeMap<Vec<u64>, f64>,
    budget: usize,
    evals: usize,
    best: Option<(f64, Control)>,
    history: Vec<(usize, f64)>,
}

impl<'a, E: Executor> Evaluator<'a, E> {
    fn new(
        model: &'a JunctionModel,
        u0: &'a InitialData,
        spec: &CostSpec,
        mesh: &Mesh,
        budget: usize,
        exec: &'a E,
    ) -> Result<Self> {
        Ok(Self {
            model,
            u0,
            plan: CostPlan::new(spec, mesh)?,
            exec,
            cache: BTreeMap::new(),
            budget,
            evals: 0,
            best: None,
            history: Vec::new(),
        })
    }

    fn key(control: &Control) -> Vec<u64> {
        control.times().iter().chain(control.values()).map(|v| v.to_bits()).collect()
    }

    /// `None` once the budget is spent on a control not seen before.
    fn cost(&mut self, control: &Control) -> Result<Option<f64>> {
        let key = Self::key(control);
        if let Some(&c) = self.cache.get(&key) {
            return Ok(Some(c));
        }
        if self.evals >= self.budget {
            return Ok(None);
        }
        let solver = JunctionSolver::new(self.model, self.u0, control)?;
        let c = self.plan.evaluate(&solver, self.exec)?.total;
        self.evals += 1;
        self.cache.insert(key, c);
        if self.best.as_ref().is_none_or(|b| c < b.0) {
            self.best = Some((c, control.clone()));
            self.history.push((self.evals, c));
        }
        Ok(Some(c))
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }
}

fn check_common(spec: &CostSpec, mesh: &Mesh, horizon: f64, budget: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidOptimizer(format!("horizon must be positive, got {horizon}")));
    }
    if budget < 50 {
        return Err(Error::InvalidOptimizer(format!("budget must be at least 50 evaluations, got {budget}")));
    }
    if mesh.t_range().1 > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidOptimizer("mesh extends past the horizon".into()));
    }
    if !spec.linear_coeff.is_finite() {
        return Err(Error::InvalidOptimizer("linear coefficient must be finite".into()));
    }
    Ok(())
}

/// Starting switch times for `k` switches.
fn seedings(k: usize, horizon: f64, spec: &CostSpec) -> Vec<Vec<f64>> {
    let uniform = |shift: f64| -> Vec<f64> {
        (1..=k).map(|i| horizon * (i as f64 - shift) / (k as f64 + 1.0 - 2.0 * shift)).collect()
    };
    let mut out = alloc::vec![uniform(0.0), uniform(0.25)];
    let marks = match &spec.weight {
        Weight::Box(b) => Some([b.t1, b.t2, b.t3]),
        _ => None,
    };
    let mut anchored = |first: usize| {
        let mut s: Vec<f64> = match marks {
            Some(m) => m.iter().cycle().skip(first).take(k.min(3)).copied().collect(),
            None => (1..=k).map(|i| horizon * (i as f64 + 0.5 * first as f64) / (k as f64 + 2.0)).collect(),
        };
        let mut extra = 1;
        while s.len() < k {
            s.push(horizon * extra as f64 / (k as f64 + 1.0));
            extra += 1;
        }
        s.sort_by(f64::total_cmp);
        out.push(s);
    };
    for first in 0..SEEDS - 2 {
        anchored(first);
    }
    out
}

/// Pushes switch times apart so each gap is at least `margin`.
fn separate(times: &mut [f64], horizon: f64, margin: f64) -> bool {
    times.sort_by(f64::total_cmp);
    let k = times.len();
    if (k + 1) as f64 * margin >= horizon {
        return false;
    }
    for i in 0..k {
        let lo = if i == 0 { 0.0 } else { times[i - 1] } + margin;
        times[i] = times[i].max(lo);
    }
    for i in (0..k).rev() {
        let hi = if i + 1 == k { horizon } else { times[i + 1] } - margin;
        times[i] = times[i].min(hi);
    }
    true
}

/// Bang-bang search over `k = 0..=k_max` switches and both start values.
#[allow(clippy::too_many_arguments)]
pub fn optimize_bangbang<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    spec: &CostSpec,
    mesh: &Mesh,
    horizon: f64,
    settings: &BangBangSettings,
    exec: &E,
) -> Result<OptimizeResult> {
    check_common(spec, mesh, horizon, settings.budget)?;
    if settings.k_max < 1 {
        return Err(Error::InvalidOptimizer("k_max must be at least 1".into()));
    }
    let a0 = model.a0();
    let margin = 1e-6 * horizon;
    let mut ev = Evaluator::new(model, u0, spec, mesh, settings.budget, exec)?;
    'outer: for k in 0..=settings.k_max {
        for &start in &[a0, 0.0] {
            let pattern = |times: &[f64]| BangBangPattern { start_value: start, switch_times: times.to_vec(), horizon };
            if k == 0 {
                if ev.cost(&pattern(&[]).to_control(a0)?)?.is_none() {
                    break 'outer;
                }
                continue;
            }
            for mut times in seedings(k, horizon, spec) {
                if !separate(&mut times, horizon, margin) {
                    continue;
                }
                let mut current = match ev.cost(&pattern(&times).to_control(a0)?)? {
                    Some(c) => c,
                    None => break 'outer,
                };
                for _ in 0..settings.sweeps {
                    let before = current;
                    for i in 0..k {
                        let lo = if i == 0 { 0.0 } else { times[i - 1] } + margin;
                        let hi = if i + 1 == k { horizon } else { times[i + 1] } - margin;
                        if hi <= lo {
                            continue;
                        }
                        let mut failure: Option<Error> = None;
                        let mut starved = false;
                        let base = times.clone();
                        let ev_ref = &mut ev;
                        let probe = |s: f64| {
                            let mut trial = base.clone();
                            trial[i] = s;
                            match pattern(&trial).to_control(a0).and_then(|c| ev_ref.cost(&c)) {
                                Ok(Some(v)) => v,
                                Ok(None) => {
                                    starved = true;
                                    f64::INFINITY
                                }
                                Err(e) => {
                                    failure = Some(e);
                                    f64::INFINITY
                                }
                            }
                        };
                        let m = golden_section(probe, lo, hi, 1e-9 * horizon, settings.line_evals);
                        if let Some(e) = failure {
                            return Err(e);
                        }
                        if m.fx < current {
                            current = m.fx;
                            times[i] = m.x;
                        }
                        if starved {
                            break 'outer;
                        }
                    }
                    if current >= before || current.is_nan() {
                        break;
                    }
                }
            }
        }
    }
    finish(ev, Method::BangBang)
}

/// Projected coordinate descent on `cells` uniform cells, starting from
/// `A0` everywhere. Each cell tries `A0`, `0` and a golden-section interior
/// value and keeps the best strict improvement.
#[allow(clippy::too_many_arguments)]
pub fn optimize_relaxed<E: Executor>(
    model: &JunctionModel,
    u0: &InitialData,
    spec: &CostSpec,
    mesh: &Mesh,
    horizon: f64,
    settings: &RelaxedSettings,
    exec: &E,
) -> Result<OptimizeResult> {
    check_common(spec, mesh, horizon, settings.budget)?;
    if settings.cells < 1 {
        return Err(Error::InvalidOptimizer("need at least one cell".into()));
    }
    let a0 = model.a0();
    let times = uniform_times(horizon, settings.cells);
    let mut values = alloc::vec![a0; settings.cells];
    let build = |v: &[f64]| Control::clamp_project(times.clone(), v, a0);
    let mut ev = Evaluator::new(model, u0, spec, mesh, settings.budget, exec)?;
    let mut current = match ev.cost(&build(&values)?)? {
        Some(c) => c,
        None => return finish_relaxed(ev, times, values, a0),
    };
    'outer: for _ in 0..settings.sweeps {
        let before = current;
        for i in 0..settings.cells {
            for &v in &[a0, 0.0] {
                let mut trial = values.clone();
                trial[i] = v;
                match ev.cost(&build(&trial)?)? {
                    Some(c) if c < current => {
                        current = c;
                        values = trial;
                    }
                    Some(_) => {}
                    None => break 'outer,
                }
            }
            let mut failure: Option<Error> = None;
            let mut starved = false;
            let base = values.clone();
            let ev_ref = &mut ev;
            let m = golden_section(
                |v| {
                    let mut trial = base.clone();
                    trial[i] = v;
                    match build(&trial).and_then(|c| ev_ref.cost(&c)) {
                        Ok(Some(c)) => c,
                        Ok(None) => {
                            starved = true;
                            f64::INFINITY
                        }
                        Err(e) => {
                            failure = Some(e);
                            f64::INFINITY
                        }
                    }
                },
                a0,
                0.0,
                1e-9 * a0.abs(),
                settings.line_evals,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if m.fx < current {
                current = m.fx;
                values[i] = m.x;
            }
            if starved {
                break 'outer;
            }
        }
        if current >= before || current.is_nan() {
            break;
        }
    }
    finish_relaxed(ev, times, values, a0)
}

fn finish<E: Executor>(ev: Evaluator<'_, E>, method: Method) -> Result<OptimizeResult> {
    let exhausted = ev.exhausted();
    let (cost, control) = ev.best.ok_or_else(|| Error::InvalidOptimizer("budget allowed no evaluation".into()))?;
    Ok(OptimizeResult {
        method,
        cell_times: control.times().to_vec(),
        cell_values: control.values().to_vec(),
        integral: control.integrate(0.0, control.horizon())?,
        first_moment: control.first_moment(),
        control,
        cost,
        evals: ev.evals,
        history: ev.history,
        exhausted,
    })
}

fn finish_relaxed<E: Executor>(
    ev: Evaluator<'_, E>,
    times: Vec<f64>,
    values: Vec<f64>,
    a0: f64,
) -> Result<OptimizeResult> {
    let mut r = finish(ev, Method::Relaxed)?;
    // The incumbent is the last accepted point, so its cells are `values`.
    r.cell_values = crate::control::clamp_values(&values, a0);
    r.cell_times = times;
    Ok(r)
}

/// Cells of a result that are not within `SNAP_REL |A0|` of `{A0, 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternRejection {
    /// `(cell index, value, distance to {A0, 0})`.
    pub cells: Vec<(usize, f64, f64)>,
}

/// Snaps every cell of `result` to `A0` or `0` and returns the induced
/// bang-bang pattern, or the offending cells.
pub fn pattern_extract(result: &OptimizeResult, a0: f64) -> core::result::Result<BangBangPattern, PatternRejection> {
    let tol = SNAP_REL * a0.abs();
    let mut snapped = Vec::with_capacity(result.cell_values.len());
    let mut bad = Vec::new();
    for (i, &v) in result.cell_values.iter().enumerate() {
        let (d0, da) = (v.abs(), (v - a0).abs());
        if d0.min(da) <= tol {
            snapped.push(if d0 <= da { 0.0 } else { a0 });
        } else {
            bad.push((i, v, d0.min(da)));
        }
    }
    if !bad.is_empty() {
        return Err(PatternRejection { cells: bad });
    }
    let times = &result.cell_times;
    let mut switches = Vec::new();
    for i in 1..snapped.len() {
        if snapped[i] != snapped[i - 1] {
            switches.push(times[i]);
        }
    }
    Ok(BangBangPattern { start_value: snapped[0], switch_times: switches, horizon: times[times.len() - 1] })
}
