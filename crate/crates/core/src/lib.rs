pub mod calibration;
pub mod cli;
pub mod cohort;
pub mod ingest;
pub mod metrics;
pub mod session;
pub mod synth;
