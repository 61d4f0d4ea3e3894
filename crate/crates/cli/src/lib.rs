//! Library side of the experiment runner: configuration schema, pipelines,
//! reports and the named verification suites.

pub mod config;
pub mod pipelines;
pub mod report;
pub mod suite;
