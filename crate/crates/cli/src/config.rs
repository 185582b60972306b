//! Run configuration, read from a single TOML file.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fixlab_core::extrema::SurfaceGrid;
use fixlab_core::sim::SimScenario;
use fixlab_core::types::{PairConfig, PriceStream};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which slice of the bar history the analyses see.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    /// Days up to 2013-05-31.
    Pre,
    /// Days from 2013-06-01.
    Post,
    #[default]
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    /// Minute-bar CSV.
    pub bars: Option<PathBuf>,
    /// Tick CSV.
    pub ticks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Half-width `k` of the spike detector's neighbourhood, in minutes.
    pub spike_window: usize,
    pub spike_z: f64,
    /// Fixing hours `T_F` of the extrema surfaces.
    pub hours: Vec<usize>,
    /// Interval sizes `Δt` of the extrema surfaces, in minutes.
    pub delta_ts: Vec<usize>,
    pub streams: Vec<PriceStream>,
    /// Shuffles of the directional-correlation permutation test.
    pub permutations: usize,
    pub correlation_seed: u64,
    /// Minute whose centred events are correlated with the external series.
    pub correlation_minute: usize,
    /// Optional `date,return` series for the directional correlation.
    pub external_returns: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let grid = SurfaceGrid::default();
        Self {
            spike_window: 30,
            spike_z: 4.0,
            hours: grid.hours,
            delta_ts: grid.delta_ts,
            streams: PriceStream::ANALYSED.to_vec(),
            permutations: 10_000,
            correlation_seed: 0,
            correlation_minute: 960,
            external_returns: None,
        }
    }
}

impl AnalysisConfig {
    pub fn grid(&self) -> SurfaceGrid {
        SurfaceGrid {
            hours: self.hours.clone(),
            delta_ts: self.delta_ts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Seconds of ticks kept ahead of each fixing window; the quality
    /// filter's reference needs the preceding five minutes of trades.
    pub tick_margin_s: i64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { tick_margin_s: 600 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub scenario: Option<SimScenario>,
    #[serde(default)]
    pub input: InputPaths,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub period: Period,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            scenario: None,
            input: InputPaths::default(),
            analysis: AnalysisConfig::default(),
            simulate: SimulateConfig::default(),
            out_dir: default_out_dir(),
            period: Period::default(),
        }
    }
}

impl RunConfig {
    /// Read a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.input.bars);
        fix(&mut self.input.ticks);
        fix(&mut self.analysis.external_returns);
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
    }

    /// Check every knob before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        for pair in &self.pairs {
            pair.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(s) = &self.scenario {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let a = &self.analysis;
        a.grid().validate().map_err(|e| CliError::Config(format!("extrema grid: {e}")))?;
        if a.spike_window == 0 || !a.spike_z.is_finite() {
            return bad("spike_window must be positive and spike_z finite".into());
        }
        if a.streams.is_empty() {
            return bad("at least one price stream is required".into());
        }
        if a.correlation_minute >= fixlab_core::types::MINUTES_PER_DAY {
            return bad(format!("correlation_minute {} is outside the day", a.correlation_minute));
        }
        if self.simulate.tick_margin_s < 0 {
            return bad("tick_margin_s must be non-negative".into());
        }
        Ok(())
    }

    /// Every configured input file must exist.
    pub fn check_inputs(&self) -> Result<(), CliError> {
        for path in [&self.input.bars, &self.input.ticks, &self.analysis.external_returns].into_iter().flatten() {
            if !path.is_file() {
                return Err(CliError::MissingInput(path.clone()));
            }
        }
        Ok(())
    }
}
