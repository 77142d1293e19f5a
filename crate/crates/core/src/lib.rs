pub mod cca;
pub mod covariance;
pub mod directed;
pub mod error;
pub mod io;
pub mod linalg;
pub mod multiview;
pub mod parallel;
pub mod pattern;
pub mod report;
pub mod simulate;
pub mod tuning;
