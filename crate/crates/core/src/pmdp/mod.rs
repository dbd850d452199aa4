//! Parametric MDPs and the reduction from one-sided POSGs.

mod json;
mod memory;
mod poly;
mod reduction;

pub use json::{read_pmdp, write_pmdp, PmdpDocument};
pub use memory::{fsc_from_unfolded, unfold_memory, FiniteStateController, MemoryUnfolding};
pub use poly::{parse_rational, rational, to_f64, ParamId, PolynomialExpr};
pub(crate) use reduction::WELL_DEFINED_TOL;
pub use reduction::{
    instantiate, instantiation_of, istrat, posg_to_pmdp, Instantiation, Parameter, ParametricChoice, ParametricMdp,
    BOTTOM,
};
