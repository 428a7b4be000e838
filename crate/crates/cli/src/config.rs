//! Experiment configuration: one TOML file, validated into core objects.

use junction_core::functional::{BoxWeight, CostPlan, CostSpec, Weight};
use junction_core::optimizer::{BangBangSettings, RelaxedSettings};
use junction_core::{Control, Hamiltonian, InitialData, JunctionModel, Mesh};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<CrossCheckBlock>,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub left: HamiltonianBlock,
    pub right: HamiltonianBlock,
}

/// `kind = "quadratic"` with `kappa` and `R`, or `kind = "tabulated"` with
/// `samples = [[p, H], ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianBlock {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
}

impl HamiltonianBlock {
    pub fn quadratic(kappa: f64, capacity: f64) -> Self {
        Self { kind: "quadratic".into(), kappa: Some(kappa), capacity: Some(capacity), samples: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    #[serde(default)]
    pub allow_boundary_slopes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Without a `box` table the weight is zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalBlock {
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub flux_box: Option<BoxBlock>,
    #[serde(default)]
    pub linear_coeff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBlock {
    pub x1: f64,
    pub x2: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    pub xmin: f64,
    pub xmax: f64,
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "Nt")]
    pub nt: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    /// `"bangbang"`, `"relaxed"` or `"both"`.
    pub method: String,
    pub k_max: usize,
    pub budget: usize,
    pub sweeps: usize,
    pub line_evals: usize,
    pub relaxed_cells: usize,
    pub relaxed_budget: usize,
    pub relaxed_sweeps: usize,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let b = BangBangSettings::default();
        let r = RelaxedSettings::default();
        Self {
            method: "bangbang".into(),
            k_max: b.k_max,
            budget: b.budget,
            sweeps: b.sweeps,
            line_evals: b.line_evals,
            relaxed_cells: r.cells,
            relaxed_budget: r.budget,
            relaxed_sweeps: r.sweeps,
        }
    }
}

impl OptimizerBlock {
    pub fn bangbang(&self) -> BangBangSettings {
        BangBangSettings { k_max: self.k_max, budget: self.budget, sweeps: self.sweeps, line_evals: self.line_evals }
    }

    pub fn relaxed(&self) -> RelaxedSettings {
        RelaxedSettings {
            cells: self.relaxed_cells,
            budget: self.relaxed_budget,
            sweeps: self.relaxed_sweeps,
            line_evals: self.line_evals,
        }
    }
}

/// Finite-volume comparison grid; its time slices run over `[0, T]` of the
/// control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckBlock {
    pub xmin: f64,
    pub xmax: f64,
    pub cells: usize,
    #[serde(rename = "Nt")]
    pub nt: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Also run on twice the cells and report whether the error drops.
    #[serde(default = "default_true")]
    pub refine: bool,
}

fn default_cfl() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_workers: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Uniform cells of `(0, T)` whose midpoints are audited.
    pub audit_samples: usize,
    /// Fixed optimality slack; derived from mesh refinement when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_opt: Option<f64>,
    /// Junction-lag threshold; `1e-6 (1 + max |u^{A0}|)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Largest accepted relative L1 density gap in `crosscheck`.
    pub crosscheck_l1: f64,
    /// Relaxed optimum may undercut the bang-bang one by this times `|J|`.
    pub bangbang_rel: f64,
    /// Smallest accepted relative margin of the strict cost inequalities.
    pub margin_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            audit_samples: 128,
            tol_opt: None,
            theta: None,
            crosscheck_l1: 0.05,
            bangbang_rel: 1e-3,
            margin_rel: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Cost,
    Optimize,
    Audit,
    Crosscheck,
    ReproduceProp511,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Cost,
        Command::Optimize,
        Command::Audit,
        Command::Crosscheck,
        Command::ReproduceProp511,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Cost => "cost",
            Command::Optimize => "optimize",
            Command::Audit => "audit",
            Command::Crosscheck => "crosscheck",
            Command::ReproduceProp511 => "reproduce-prop511",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    fn needs(self) -> &'static [&'static str] {
        match self {
            Command::Solve => &["model", "initial", "control", "mesh"],
            Command::Cost => &["model", "initial", "control", "functional", "mesh"],
            Command::Optimize => &["model", "initial", "functional", "mesh", "optimizer"],
            Command::Audit => &["model", "initial", "control", "functional", "mesh"],
            Command::Crosscheck => &["model", "initial", "control", "crosscheck"],
            Command::ReproduceProp511 => &["model", "initial", "functional", "mesh"],
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn has(&self, block: &str) -> bool {
        match block {
            "model" => self.model.is_some(),
            "initial" => self.initial.is_some(),
            "control" => self.control.is_some(),
            "functional" => self.functional.is_some(),
            "mesh" => self.mesh.is_some(),
            "optimizer" => self.optimizer.is_some(),
            "crosscheck" => self.crosscheck.is_some(),
            _ => false,
        }
    }

    /// Builds every object `command` needs, or lists every problem found.
    pub fn validate(&self, command: Command) -> Result<Setup, Vec<String>> {
        let mut errs = Vec::new();
        for block in command.needs() {
            if !self.has(block) {
                errs.push(format!("[{block}] block is required by `{}`", command.name()));
            }
        }
        if let Some(c) = &self.run.command {
            if Command::parse(c).is_none() {
                errs.push(format!("run.command = {c:?} is not a known command"));
            }
        }
        if self.run.parallel_workers == Some(0) {
            errs.push("run.parallel_workers must be at least 1".into());
        }
        let tol = &self.run.tolerances;
        if tol.audit_samples == 0 {
            errs.push("run.tolerances.audit_samples must be at least 1".into());
        }
        for (name, v) in [
            ("crosscheck_l1", Some(tol.crosscheck_l1)),
            ("bangbang_rel", Some(tol.bangbang_rel)),
            ("margin_rel", Some(tol.margin_rel)),
            ("tol_opt", tol.tol_opt),
            ("theta", tol.theta),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    errs.push(format!("run.tolerances.{name} = {v} must be finite and nonnegative"));
                }
            }
        }

        let model = self.model.as_ref().and_then(|m| {
            let left = hamiltonian(&m.left, "model.left", &mut errs);
            let right = hamiltonian(&m.right, "model.right", &mut errs);
            Some(JunctionModel::new(left?, right?))
        });

        let u0 = self.initial.as_ref().and_then(|b| {
            let mut u0 = match InitialData::new(b.breakpoints.clone(), b.slopes.clone()) {
                Ok(u) => u,
                Err(e) => {
                    errs.push(format!("[initial]: {e}"));
                    return None;
                }
            };
            if b.allow_boundary_slopes {
                u0 = u0.allow_boundary_slopes();
            }
            if let Some(m) = &model {
                if let Err(e) = u0.validate(m) {
                    errs.push(format!("[initial]: {e}"));
                    return None;
                }
            }
            Some(u0)
        });

        let control = self.control.as_ref().and_then(|b| match Control::new(b.times.clone(), b.values.clone()) {
            Ok(c) => {
                if let Some(m) = &model {
                    if let Err(e) = c.validate(m.a0()) {
                        errs.push(format!("[control]: {e}"));
                        return None;
                    }
                }
                Some(c)
            }
            Err(e) => {
                errs.push(format!("[control]: {e}"));
                None
            }
        });

        let mesh = self.mesh.as_ref().and_then(|b| match Mesh::new(b.xmin, b.xmax, b.nx, b.horizon, b.nt) {
            Ok(m) => Some(m),
            Err(e) => {
                errs.push(format!("[mesh]: {e}"));
                None
            }
        });
        if let (Some(c), Some(m)) = (&control, &self.mesh) {
            if command != Command::Crosscheck && c.horizon() != m.horizon {
                errs.push(format!("[control] horizon {} differs from mesh.T = {}", c.horizon(), m.horizon));
            }
        }
        if command == Command::Solve {
            if let Some(m) = &mesh {
                if m.zero_column().is_none() {
                    errs.push("[mesh]: solve needs a node at x = 0 for the junction trace".into());
                }
            }
        }

        let flux_box = self.functional.as_ref().and_then(|f| f.flux_box).and_then(|b| {
            match BoxWeight::new(b.x1, b.x2, b.t1, b.t2, b.t3, b.t4, b.delta) {
                Ok(w) => Some(w),
                Err(e) => {
                    errs.push(format!("[functional.box]: {e}"));
                    None
                }
            }
        });
        let spec = self.functional.as_ref().and_then(|f| {
            if f.flux_box.is_some() && flux_box.is_none() {
                return None;
            }
            let weight = match flux_box {
                Some(b) => Weight::Box(b),
                None => Weight::Zero,
            };
            match CostSpec::new(weight, f.linear_coeff) {
                Ok(s) => Some(s),
                Err(e) => {
                    errs.push(format!("[functional]: {e}"));
                    None
                }
            }
        });
        if matches!(command, Command::Audit | Command::ReproduceProp511)
            && self.functional.is_some()
            && self.functional.as_ref().and_then(|f| f.flux_box).is_none()
        {
            errs.push(format!("[functional.box] is required by `{}`", command.name()));
        }
        if let (Some(s), Some(m)) = (&spec, &mesh) {
            if matches!(command, Command::Cost | Command::Optimize | Command::Audit | Command::ReproduceProp511) {
                if let Err(e) = CostPlan::new(s, m) {
                    errs.push(format!("[mesh] does not carry the functional: {e}"));
                }
            }
        }

        let optimizer = self.optimizer.clone().unwrap_or_default();
        if command == Command::Optimize || (command == Command::ReproduceProp511 && self.optimizer.is_some()) {
            if !matches!(optimizer.method.as_str(), "bangbang" | "relaxed" | "both") {
                errs.push(format!("optimizer.method = {:?} must be bangbang, relaxed or both", optimizer.method));
            }
            if command == Command::ReproduceProp511 && optimizer.method == "relaxed" {
                errs.push("reproduce-prop511 needs optimizer.method bangbang or both".into());
            }
            if optimizer.k_max < 1 {
                errs.push("optimizer.k_max must be at least 1".into());
            }
            for (name, v) in [("budget", optimizer.budget), ("relaxed_budget", optimizer.relaxed_budget)] {
                if v < 50 {
                    errs.push(format!("optimizer.{name} = {v} must be at least 50"));
                }
            }
            for (name, v) in [
                ("sweeps", optimizer.sweeps),
                ("line_evals", optimizer.line_evals),
                ("relaxed_cells", optimizer.relaxed_cells),
                ("relaxed_sweeps", optimizer.relaxed_sweeps),
            ] {
                if v < 1 {
                    errs.push(format!("optimizer.{name} must be at least 1"));
                }
            }
        }

        let crosscheck = self.crosscheck.as_ref().and_then(|b| {
            if !(b.cfl > 0.0 && b.cfl <= 1.0) {
                errs.push(format!("crosscheck.cfl = {} must lie in (0, 1]", b.cfl));
            }
            let horizon = control.as_ref().map(|c| c.horizon()).unwrap_or(1.0);
            match Mesh::new(b.xmin, b.xmax, b.cells, horizon, b.nt) {
                Ok(m) => {
                    if m.zero_column().is_none() {
                        errs.push("[crosscheck]: the cell faces must include x = 0".into());
                        None
                    } else {
                        Some(m)
                    }
                }
                Err(e) => {
                    errs.push(format!("[crosscheck]: {e}"));
                    None
                }
            }
        });

        if !errs.is_empty() {
            return Err(errs);
        }
        Ok(Setup {
            model: model.expect("validated"),
            u0: u0.expect("validated"),
            control,
            spec,
            flux_box,
            mesh,
            optimizer,
            crosscheck,
            crosscheck_cfl: self.crosscheck.map(|c| c.cfl).unwrap_or(0.9),
            crosscheck_refine: self.crosscheck.map(|c| c.refine).unwrap_or(false),
            tolerances: self.run.tolerances.clone(),
        })
    }
}

fn hamiltonian(b: &HamiltonianBlock, at: &str, errs: &mut Vec<String>) -> Option<Hamiltonian> {
    let built = match b.kind.as_str() {
        "quadratic" => {
            if b.samples.is_some() {
                errs.push(format!("{at}: `samples` is only used by kind = \"tabulated\""));
            }
            match (b.kappa, b.capacity) {
                (Some(k), Some(r)) => Hamiltonian::quadratic(k, r),
                _ => {
                    errs.push(format!("{at}: quadratic needs `kappa` and `R`"));
                    return None;
                }
            }
        }
        "tabulated" => {
            if b.kappa.is_some() || b.capacity.is_some() {
                errs.push(format!("{at}: `kappa` and `R` are only used by kind = \"quadratic\""));
            }
            match &b.samples {
                Some(s) => Hamiltonian::tabulated(&s.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>()),
                None => {
                    errs.push(format!("{at}: tabulated needs `samples`"));
                    return None;
                }
            }
        }
        other => {
            errs.push(format!("{at}.kind = {other:?} must be quadratic or tabulated"));
            return None;
        }
    };
    match built {
        Ok(h) => Some(h),
        Err(e) => {
            errs.push(format!("{at}: {e}"));
            None
        }
    }
}

/// Validated objects for one command. Blocks the command does not need may
/// still be present.
#[derive(Clone, Debug)]
pub struct Setup {
    pub model: JunctionModel,
    pub u0: InitialData,
    pub control: Option<Control>,
    pub spec: Option<CostSpec>,
    pub flux_box: Option<BoxWeight>,
    pub mesh: Option<Mesh>,
    pub optimizer: OptimizerBlock,
    pub crosscheck: Option<Mesh>,
    pub crosscheck_cfl: f64,
    pub crosscheck_refine: bool,
    pub tolerances: Tolerances,
}

/// The canonical flux-box experiment.
pub fn canonical() -> ExperimentConfig {
    ExperimentConfig {
        model: Some(ModelBlock {
            left: HamiltonianBlock::quadratic(1.0, 1.0),
            right: HamiltonianBlock::quadratic(1.0, 1.0),
        }),
        initial: Some(InitialBlock { breakpoints: Vec::new(), slopes: vec![-0.8], allow_boundary_slopes: false }),
        control: None,
        functional: Some(FunctionalBlock {
            flux_box: Some(BoxBlock { x1: 0.1, x2: 0.18, t1: 1.0, t2: 1.5, t3: 4.5, t4: 5.0, delta: 0.01 }),
            linear_coeff: 0.0,
        }),
        mesh: Some(MeshBlock { xmin: 0.09, xmax: 0.19, nx: 40, horizon: 6.0, nt: 600 }),
        optimizer: Some(OptimizerBlock::default()),
        crosscheck: None,
        run: RunBlock { command: Some("reproduce-prop511".into()), ..RunBlock::default() },
    }
}
