//! Shock tracking and shifted stochastic collocation for one-dimensional
//! scalar conservation laws whose initial data depend on a random variable.

pub(crate) mod roots;

pub mod collocate;
pub mod detect;
pub mod experiment;
pub mod hodograph;
pub mod ode;
pub mod problem;
pub mod solver;
