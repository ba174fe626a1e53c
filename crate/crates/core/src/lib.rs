pub mod bounds;
pub mod error;
pub mod geometry;
pub mod hl;
pub mod kernel;
pub mod levi;
pub mod par;
pub mod profiles;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use par::ExecMode;
