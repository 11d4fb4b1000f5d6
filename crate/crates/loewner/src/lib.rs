//! Evolution families, Loewner chains, and semigroups of holomorphic
//! self-maps of the unit disk, driven by Berkson-Porta data.
//!
//! The crate is organized around a pipeline:
//!
//! * [`driver`] — Berkson-Porta data `(p, tau)` and raw vector fields `G(z,t)`;
//! * [`engine`] — adaptive integration of `dw/dt = G(w,t)` for `phi_{s,t}`;
//! * [`chain`] — the associated normalized Loewner chain via the limit
//!   `f_s(z) = lim_T h_T^{-1}(phi_{s,T}(z)) / beta(T)`, the beta invariant,
//!   and uniqueness classification;
//! * [`semigroup`] — the autonomous case: Denjoy-Wolff classification,
//!   hyperbolic step, and Koenigs functions;
//! * [`verify`] — numerical certification of the algebraic and differential
//!   identities the construction must satisfy.

pub mod chain;
pub mod driver;
pub mod engine;
pub mod expr;
pub mod geometry;
pub mod semigroup;
pub mod verify;

pub use chain::{
    beta_limit, beta_z, classify, frame_at, induced_evolution, read_frames_csv, write_frames_csv,
    BetaLimit, ChainClassification, ChainError, ChainEvaluator, ChainValue, DecompositionFrame,
    FrozenChain, Omega, StandardChain, TransportedChain, Verdict,
};
pub use driver::{
    ComplexPath, DriverError, HerglotzDriver, RealPath, ScalarField, ValidationGrid,
    ValidationReport,
};
pub use engine::{
    evolve_grid, evolve_point, evolve_with_derivative, trajectory, EngineError, EvolutionConfig,
    EvolutionResult,
};
pub use expr::{EvalError, Expr, ParseError};
pub use semigroup::{
    classify_dw, hyperbolic_step, koenigs_boundary, koenigs_elliptic,
    koenigs_elliptic_with_schedule, BoundaryKoenigs, DWClass, DWKind, HyperbolicStepResult,
    KoenigsElliptic, SemigroupError, SemigroupModel, StepVerdict,
};
pub use verify::{
    check_beta_monotone, check_chain_equation, check_ef_axioms, check_growth_bound, check_lk_pde,
    check_univalence, contour_inverse_oracle, CheckReport, VerifyError, Witness,
};
pub use geometry::{
    cayley_from_halfplane, cayley_to_halfplane, hyperbolic_distance, pseudo_hyperbolic,
    DiskAutomorphism, DiskPoint, GeometryError,
};
