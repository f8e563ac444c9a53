//! Matrix Rademacher chaos and degenerate matrix U-statistics of order 2:
//! exact and Monte Carlo moment oracles, variance proxies, and moment and
//! tail bounds with explicit constants.

pub mod adamczak;
pub mod bounds;
pub mod chaos;
pub mod corpus;
pub mod digest;
pub mod enumerate;
pub mod error;
pub mod examples;
pub mod io;
pub mod linalg;
pub mod ustat;

pub use error::{Error, Result};
