#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod csv;
pub mod fitting;
pub mod functor;
pub mod integration;
pub mod kinematics;
pub mod param;
pub mod parallel;
pub mod phasespace;
pub mod rng;
pub mod sampling;
pub mod splot;
pub mod store;
