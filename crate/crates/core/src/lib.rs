pub mod bath;
pub mod dicke;
pub mod e2ls;
pub mod error;
pub mod lindblad;
pub mod mcwf;
pub mod ode;
pub mod scalar;
pub mod series;
pub mod site;

pub use error::{Error, Result};
