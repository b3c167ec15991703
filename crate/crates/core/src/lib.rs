//! Car-following workbench: driving-style classification, per-style
//! acceleration regressors, IDM baselines and a SAC-Lagrangian longitudinal
//! controller trained in a headway-constrained environment.

pub mod baselines;
pub mod classifier;
pub mod container;
pub mod env;
pub mod harness;
pub mod kinematics;
pub mod kv;
pub mod nn;
pub mod predictor;
pub mod regressor;
pub mod sac;
pub mod style;
pub mod trajectory;

pub use style::DrivingStyle;
