//! Vehicle dynamics on non-planar road surfaces: surface geometry, body
//! kinematics in surface coordinates, tire forces, vehicle models and a
//! differential-algebraic simulator.

pub mod autodiff;
pub mod kinematics;
pub mod linalg;
pub mod models;
pub mod params;
pub mod simulation;
pub mod spline;
pub mod surface;
pub mod tire;
