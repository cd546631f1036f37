//! Contracting curvature flows of convex curves and hypersurfaces in the round
//! sphere, with the diagnostics needed to check their qualitative behavior.

pub mod axisym_flow;
pub mod curve_flow;
pub mod error;
pub mod gnomonic;
pub mod quad;
pub mod quantities;
pub mod record;
pub mod reflection;
pub mod spectral;
pub mod speeds;
pub mod sphere_ode;
mod stepper;

pub use error::{Error, Result};
pub use speeds::{SpeedFunction, SpeedSpec};
