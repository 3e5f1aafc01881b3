pub mod cli;
pub mod constants;
pub mod convex_order;
pub mod error;
pub mod examples;
pub mod io;
pub mod itm;
pub mod lp;
pub mod measures;
pub mod mot;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
