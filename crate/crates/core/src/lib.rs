pub mod control;
pub mod error;
pub mod gpe;
pub mod grid;
pub mod io;
pub mod observables;
pub mod piston;
pub mod potentials;
pub mod trial;
pub mod units;

pub use error::{Error, Result};
pub use grid::{Grid, SpinorField};
pub use units::SystemParams;
