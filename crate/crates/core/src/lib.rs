//! Flux-limiter control of traffic through a two-road junction.
//!
//! The value (Moskowitz) function `u^A` of the junction Hamilton-Jacobi
//! problem is evaluated from its optimal-control representation, an
//! independent Godunov solver for the conservation law serves as a
//! cross-check, and cost functionals of the limiter `A(t)` can be evaluated,
//! audited against first-order optimality conditions and minimized.
//!
//! The crate is `no_std` (it needs `alloc`). Parallel sweeps go through the
//! [`exec::Executor`] trait so that callers choose the thread pool.

#![no_std]

extern crate alloc;

pub mod conservation;
pub mod control;
pub mod error;
pub mod exec;
pub mod flux;
pub mod functional;
pub mod hj;
pub mod lattice;
pub mod math;
pub mod mesh;
pub mod optimality;
pub mod optimizer;

pub use control::Control;
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use flux::{Hamiltonian, InitialData, JunctionModel, Side};
pub use hj::{JunctionSolver, PathKind, Selection, TrajectoryDescriptor};
pub use mesh::{Mesh, ValueField};
