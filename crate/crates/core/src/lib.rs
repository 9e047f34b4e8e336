//! Arbitrary-precision dynamics of a driven non-Hermitian two-level system
//! whose parameters encircle exceptional points.

pub mod error;
pub mod exact;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod precision;
pub mod rng;
pub mod special;
pub mod sweep;

pub use error::{Error, Result};
pub use exact::{
    asymptotic_offdiag, floquet_quasienergies, kummer_work, symmetry_check, transfer_matrix_exact,
    transfer_one_cycle, AsymptoticReport, KummerWork, Provenance, SymmetryResiduals, TransferMatrix,
};
pub use integrator::{
    convergence_ladder, rk4_transfer, rk4_transfer_in_cell, IntegrationSpec, LadderRung, NoiseSpec,
};
pub use linalg::Mat2;
pub use model::{
    eigenframe, hamiltonian, Angle, Direction, EigenFrame, LabelPolicy, LoopSpec, StateVector,
};
pub use precision::{HpComplex, PrecisionContext};
pub use rng::{gaussian_stream, SubstreamId};
pub use special::gamma::gamma_complex;
pub use special::kummer::{kummer_f, kummer_u, pochhammer, KummerParams};
pub use observables::{
    chi_boundary_scan, chirality_ensemble, chirality_exact, chirality_integrated, condition_boundary,
    condition_number_2x2, condition_profile, find_critical_epsilons, linear_fit, nonchirality,
    sensitivity_kernel, transition_asymmetry_trace, transition_probabilities, BoundaryMethod, BoundaryPoint,
    BoundaryScan, ChiralityReport, ConditionProfile, CriticalBoundary, EnsembleChirality, LinearFit,
    TransitionReport,
};
pub use sweep::{
    emit_csv, emit_heatmap_svg, read_csv, run_sweep, Axis, AxisKind, Colormap, Quantity, SweepPlan, SweepResult,
};
