//! FX benchmark fixing engine, synthetic tick-market simulator and the
//! fix-window microstructure analyses (per-minute volatility, extreme-return
//! probability surfaces and centred-extremum histograms).

pub mod centered;
pub mod extrema;
pub mod fix;
pub mod ingest;
pub mod sim;
pub mod stats;
pub mod types;
pub mod vol;

pub use types::*;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
