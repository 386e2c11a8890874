//! Fully-corrective Frank-Wolfe over discrete volunteer measures.
//!
//! Volunteers are modelled as a Poisson process with intensity `μ` of total
//! mass `b`; an incident at `y ~ η` is answered by the nearest volunteer at
//! distance `R`, and death occurs with probability `β(R)`. The crate
//! minimizes `J(μ) = E[β(R)] − β(0)` over measures of mass `b`.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod l1;
pub mod measure;
pub mod response;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{convex_hull, distance, ConvexPolygon, Norm, Point2, Rect};
pub use measure::{Atom, DiscreteMeasure};
pub use response::{Demand, InfluenceField, SampleBatch, WeightObjective};
pub use scenario::{DeathCurve, IncidentDistribution, Problem, ScenarioDoc};
pub use solver::{SolveTrace, SolverConfig};
