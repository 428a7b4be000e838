use alloc::string::String;

/// Errors raised by the junction toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain { what: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("invalid Hamiltonian: {0}")]
    InvalidHamiltonian(String),
    #[error("invalid junction model: {0}")]
    InvalidModel(String),
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh has no node at x = 0")]
    MissingJunctionColumn,
    #[error("lattice resolution {nx}x{nt} is below the 8x8 minimum")]
    ResolutionTooSmall { nx: usize, nt: usize },
    #[error("CFL number {0} is outside (0, 1]")]
    Cfl(f64),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
    #[error("weight does not vanish on the mesh boundary (|phi| = {0})")]
    SupportLeakage(f64),
    #[error("invalid box weight: {0}")]
    InvalidBox(String),
    #[error("invalid optimizer settings: {0}")]
    InvalidOptimizer(String),
}

pub type Result<T> = core::result::Result<T, Error>;
