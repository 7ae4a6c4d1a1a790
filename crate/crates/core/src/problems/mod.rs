//! Problem instances and their oracle bundles.

mod build;
mod logistic;
mod lrmr;
pub mod multilinear;
mod multilinear_problem;
mod quadratic;
pub mod setfn;
mod stochastic;

pub use build::{build_problem, MultilinearSampling, ProblemBundle, ProblemSpec, SetFunctionSpec};
pub use logistic::LogisticL1;
pub use lrmr::{robust_loss, robust_loss_d1, robust_loss_d2, RobustLrmr};
pub use multilinear::{multilinear_exact, multilinear_value, MultilinearExact, MultilinearTable};
pub use multilinear_problem::{
    BernoulliMultilinear, ComponentMultilinear, ExactMultilinearOracle, SampledMultilinearOracle, BERNOULLI_CLAMP,
};
pub use quadratic::{Nqp, Quadratic, QuadraticSum};
pub use setfn::{ConcaveModular, Coverage, Decomposable, FacilityLocation, LogDet, Modular, SetFunction, TableSetFunction};
pub use stochastic::{
    check_constants, estimate_constants, Capabilities, ComponentHessian, Constants, FiniteSum, FiniteSumProblem, Mode,
    Payload, Sample, StochasticProblem, ValueOracle,
};
