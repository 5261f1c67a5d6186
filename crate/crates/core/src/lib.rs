//! Pseudospectral solver for the Davey-Stewartson II system on a periodic box,
//! with a regularized treatment of the singular nonlocal multiplier.

pub mod diagnostics;
pub mod error;
pub mod field_io;
pub mod initial;
pub mod nls1d;
pub mod regularizer;
pub mod solver;
pub mod spectral;
pub mod stepper;
pub mod theta;

pub use diagnostics::{
    classify, convergence_sweep, cross_grid_error, fourier_decay_report, interpolate_to, l2_norm,
    linf_error, DecayClass, DecayReport, Level, SweepSpec, SweepTable,
};
pub use error::{DsError, Result};
pub use regularizer::{
    classical_nonlocal, closed_form_w, closed_form_w_conj, compute_moments, regularized_nonlocal,
    DerivativeExpansion, MomentSet, RegularizationTables,
};
pub use rustfft::num_complex::Complex64;
pub use solver::{evolve, DsOperator, Method, RunResult, RunStatus, SolverConfig};
pub use spectral::{Field, Grid, Space, Spectral, TransformCounts};
pub use stepper::{CompositeRk, IfRk4, NonlinearTerm, Scheme, Stepper};
pub use theta::{
    check_periodicity, eval_on_grid, eval_solution, theta_auto, PeriodicityReport, RiemannMatrix,
    ThetaSurfaceData,
};
