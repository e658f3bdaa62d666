//! Finding integers `n < x` at which every polynomial in a system is close to
//! an integer, by exhaustive search or by a density-increment reduction that
//! trades coordinates for a shorter search horizon.

pub mod denomstruct;
pub mod diophantine;
pub mod driver;
pub mod error;
pub mod expsum;
pub mod hpmath;
pub mod intmat;
pub mod latgeom;
pub mod real;
pub mod reduction;
pub mod residue;
pub mod serde_str;
pub mod system;

pub use error::{Error, Result};
pub use real::Real;
pub use driver::{solve, verify_certificate, Certificate, SolveOutcome, SolverConfig, Status};
pub use system::{
    brute_force_min, eval_system, first_hit, frac_dist, hit_count, Epsilons, Poly, PolySystem, SystemState,
};
