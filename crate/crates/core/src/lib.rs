pub mod assessment;
pub mod ate;
pub mod data;
pub mod error;
pub mod ite;
pub mod num;
pub mod shift;
pub mod sim;
pub mod survival;

pub use error::{Error, Result, Stage};
