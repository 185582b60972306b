//! Subcommand orchestration.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use chrono::{NaiveDate, Timelike, Utc};
use fixlab_core::centered::{aggregate, directional_correlation, events_at, read_external_returns};
use fixlab_core::extrema::{build_surface_on, write_surfaces_csv, ExtremumKind, Side};
use fixlab_core::fix::{compute_fix_on, FixError};
use fixlab_core::ingest::{
    filter_complete_days, parse_bar_csv, parse_tick_csv, split_periods, write_bar_csv, write_tick_csv, Dataset,
    RawDayMap,
};
use fixlab_core::sim::gen_day_bars_and_ticks;
use fixlab_core::types::{utc_ms_to_london, PairConfig, Tick, MS_PER_SECOND};
use fixlab_core::vol::{detect_spikes, minute_returns, vol_profile, write_spikes_csv};
use rayon::prelude::*;

use crate::config::{Period, RunConfig};
use crate::report::{write_correlation_rows, write_fix_rows, CorrelationRow, FixRow, Manifest, RunDir, Seeds};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fix,
    Vol,
    Extrema,
    Centered,
    /// Every stage the configuration has data for.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fix => "fix",
            Command::Vol => "vol",
            Command::Extrema => "extrema",
            Command::Centered => "centered",
            Command::Report => "report",
        }
    }
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub pair: Option<String>,
    pub period: Option<Period>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Tick CSV for `fix`, bar CSV for the analyses.
    pub input: Option<PathBuf>,
}

/// Where a run's results went.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

type DayTicks = BTreeMap<NaiveDate, Vec<Tick>>;

struct Run {
    command: Command,
    config: RunConfig,
    pair: Option<String>,
    dir: RunDir,
    notes: Vec<String>,
}

pub fn execute(command: Command, mut config: RunConfig, overrides: Overrides) -> Result<RunSummary, CliError> {
    if let Some(seed) = overrides.seed {
        match config.scenario.as_mut() {
            Some(s) => s.seed = seed,
            None => return Err(CliError::Config("--seed needs a [scenario] section".into())),
        }
    }
    if let Some(p) = overrides.period {
        config.period = p;
    }
    if let Some(out) = overrides.out {
        config.out_dir = out;
    }
    if let Some(input) = overrides.input {
        match command {
            Command::Fix => config.input.ticks = Some(input),
            Command::Simulate => return Err(CliError::Config("simulate takes no --input".into())),
            _ => config.input.bars = Some(input),
        }
    }
    if let Some(code) = &overrides.pair {
        if !config.pairs.is_empty() {
            config.pairs.retain(|p| &p.pair == code);
            if config.pairs.is_empty() {
                return Err(CliError::Config(format!("pair `{code}` is not configured")));
            }
        }
    }
    config.validate()?;
    config.check_inputs()?;

    let dir = RunDir::create(&config.out_dir, command.name())?;
    let pair = overrides.pair.or_else(|| config.pairs.first().map(|p| p.pair.clone()));
    let mut run = Run {
        command,
        config,
        pair,
        dir,
        notes: Vec::new(),
    };
    run.dispatch()?;
    run.finish()
}

impl Run {
    fn dispatch(&mut self) -> Result<(), CliError> {
        match self.command {
            Command::Simulate => {
                self.simulate()?;
            }
            Command::Fix => {
                let ticks = self.file_ticks()?;
                self.fix(&ticks)?;
            }
            Command::Vol => {
                let ds = self.dataset(None)?;
                self.vol(&ds)?;
            }
            Command::Extrema => {
                let ds = self.dataset(None)?;
                self.extrema(&ds)?;
            }
            Command::Centered => {
                let ds = self.dataset(None)?;
                self.centered(&ds)?;
            }
            Command::Report => self.report()?,
        }
        Ok(())
    }

    fn report(&mut self) -> Result<(), CliError> {
        let from_files = self.config.input.bars.is_some() || self.config.input.ticks.is_some();
        if from_files {
            if self.config.input.ticks.is_some() {
                let ticks = self.file_ticks()?;
                self.fix(&ticks)?;
            }
            if self.config.input.bars.is_some() {
                let ds = self.dataset(None)?;
                self.analyses(&ds)?;
            }
            return Ok(());
        }
        let (bars, ticks) = self.simulate()?;
        self.fix(&ticks)?;
        let ds = self.dataset(Some(bars))?;
        self.analyses(&ds)
    }

    fn analyses(&mut self, ds: &Dataset) -> Result<(), CliError> {
        self.vol(ds)?;
        self.extrema(ds)?;
        self.centered(ds)
    }

    fn label(&self) -> String {
        self.pair
            .clone()
            .or_else(|| self.config.scenario.as_ref().map(|s| s.source.clone()))
            .unwrap_or_else(|| "UNKNOWN".into())
    }

    fn in_period(&self, date: NaiveDate) -> bool {
        match self.config.period {
            Period::Full => true,
            Period::Pre => date <= fixlab_core::ingest::period_boundary(),
            Period::Post => date > fixlab_core::ingest::period_boundary(),
        }
    }

    /// Simulated bars for the whole day plus the ticks around each fix.
    fn simulate(&mut self) -> Result<(RawDayMap, DayTicks), CliError> {
        let scenario = self
            .config
            .scenario
            .clone()
            .ok_or_else(|| CliError::Config("no [scenario] section to simulate".into()))?;
        let fix_ms = scenario.fix_time.num_seconds_from_midnight() as i64 * MS_PER_SECOND;
        let margin = self.config.simulate.tick_margin_s * MS_PER_SECOND;
        let span = fix_ms - scenario.window_half_width_ms - margin..fix_ms + scenario.window_half_width_ms + 1;
        let days: Vec<_> = (0..scenario.day_count)
            .into_par_iter()
            .map(|d| {
                let (bars, ticks) = gen_day_bars_and_ticks(&scenario, d, span.clone());
                (scenario.date_of(d), bars, ticks)
            })
            .collect();
        let mut raw = RawDayMap::new();
        let mut ticks = DayTicks::new();
        for (date, bars, day_ticks) in days {
            raw.insert(date, bars.into_iter().map(|b| (b.minute, b)).collect());
            ticks.insert(date, day_ticks);
        }
        self.dir.write_csv("bars.csv", |w| write_bar_csv(w, raw.values().flat_map(|d| d.values())))?;
        self.dir.write_csv("ticks.csv", |w| write_tick_csv(w, ticks.values().flatten()))?;
        Ok((raw, ticks))
    }

    fn file_ticks(&mut self) -> Result<DayTicks, CliError> {
        let path = self
            .config
            .input
            .ticks
            .clone()
            .ok_or_else(|| CliError::Config("no tick input: pass --input or set [input] ticks".into()))?;
        let mut by_date = DayTicks::new();
        for t in parse_tick_csv(&path)? {
            by_date.entry(utc_ms_to_london(t.timestamp()).0).or_default().push(t);
        }
        Ok(by_date)
    }

    fn fix(&mut self, ticks: &DayTicks) -> Result<(), CliError> {
        if self.config.pairs.is_empty() {
            return Err(CliError::Config("no [[pairs]] configured to fix".into()));
        }
        let mut rows = Vec::new();
        for pair in self.config.pairs.clone() {
            let dates: Vec<(&NaiveDate, &Vec<Tick>)> = ticks.iter().filter(|(d, _)| self.in_period(**d)).collect();
            let results: Vec<(NaiveDate, Result<_, FixError>)> = dates
                .par_iter()
                .map(|(date, day)| (**date, compute_fix_on(day, &pair, **date)))
                .collect();
            let mut missing = 0usize;
            for (date, result) in results {
                match result {
                    Ok(fix) => rows.push(FixRow::new(&pair.pair, date, &fix)),
                    Err(FixError::NoData) => missing += 1,
                    Err(e) => return Err(CliError::analysis("fix_engine", e)),
                }
            }
            if missing > 0 {
                tracing::warn!(pair = %pair.pair, missing, "no usable data in the fixing window");
                self.notes.push(format!("{}: {missing} dates without usable fix data", pair.pair));
            }
            check_sources(&pair, ticks);
        }
        self.dir.write_csv("fixes.csv", |w| write_fix_rows(w, &rows))?;
        Ok(())
    }

    fn dataset(&mut self, simulated: Option<RawDayMap>) -> Result<Dataset, CliError> {
        let raw = match (simulated, &self.config.input.bars) {
            (Some(raw), _) => raw,
            (None, Some(path)) => parse_bar_csv(path)?,
            (None, None) => match &self.config.scenario {
                Some(s) => fixlab_core::sim::simulate_bars(s)
                    .into_iter()
                    .map(|(d, bars)| (d, bars.into_iter().map(|b| (b.minute, b)).collect()))
                    .collect(),
                None => return Err(CliError::Config("no bar input: pass --input, set [input] bars or add a [scenario]".into())),
            },
        };
        let complete = filter_complete_days(&raw, &self.label());
        if !complete.excluded.is_empty() {
            self.notes.push(format!("{} incomplete days excluded", complete.excluded.len()));
        }
        let ds = match self.config.period {
            Period::Full => complete.dataset,
            Period::Pre => split_periods(&complete.dataset).0,
            Period::Post => split_periods(&complete.dataset).1,
        };
        if ds.is_empty() {
            return Err(CliError::Input("no complete days in the selected period".into()));
        }
        Ok(ds)
    }

    fn vol(&mut self, ds: &Dataset) -> Result<(), CliError> {
        let a = self.config.analysis.clone();
        for stream in a.streams {
            let returns = minute_returns(ds, stream).map_err(|e| CliError::analysis("analysis_vol", e))?;
            let profile = vol_profile(&returns);
            let spikes = detect_spikes(&profile, a.spike_window, a.spike_z);
            self.dir.write_csv(&format!("vol_{}.csv", stream.as_str()), |w| profile.write_csv(w))?;
            self.dir.write_csv(&format!("spikes_{}.csv", stream.as_str()), |w| write_spikes_csv(w, &spikes))?;
        }
        Ok(())
    }

    fn extrema(&mut self, ds: &Dataset) -> Result<(), CliError> {
        let grid = self.config.analysis.grid();
        let mut surfaces = Vec::new();
        for &stream in &self.config.analysis.streams {
            for side in Side::ALL {
                for kind in ExtremumKind::ALL {
                    surfaces.push(
                        build_surface_on(ds, side, kind, stream, &grid).map_err(|e| CliError::analysis("analysis_extrema", e))?,
                    );
                }
            }
        }
        self.dir.write_csv("extrema_surfaces.csv", |w| write_surfaces_csv(w, &surfaces))?;
        Ok(())
    }

    fn centered(&mut self, ds: &Dataset) -> Result<(), CliError> {
        let a = self.config.analysis.clone();
        let histogram = aggregate(ds, &a.streams);
        self.dir.write_csv("centered_histogram.csv", |w| histogram.write_csv(w))?;
        let Some(path) = &a.external_returns else { return Ok(()) };
        let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let external = read_external_returns(BufReader::new(file)).map_err(|e| CliError::Input(e.to_string()))?;
        let mut rows = Vec::new();
        for &stream in &a.streams {
            let events = events_at(ds, stream, a.correlation_minute);
            match directional_correlation(&events, &external, a.permutations, a.correlation_seed) {
                Ok(c) => rows.push(CorrelationRow {
                    stream,
                    minute: a.correlation_minute,
                    r: c.r,
                    p_value: c.p_value,
                    n: c.n,
                    shuffles: c.shuffles,
                }),
                Err(e) => {
                    tracing::warn!(?stream, error = %e, "directional correlation skipped");
                    self.notes.push(format!("correlation on {}: {e}", stream.as_str()));
                }
            }
        }
        self.dir.write_csv("centered_correlation.csv", |w| write_correlation_rows(w, &rows))?;
        Ok(())
    }

    fn finish(self) -> Result<RunSummary, CliError> {
        let manifest = Manifest {
            tool: "fixlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: fixlab_core::VERSION.into(),
            command: self.command.name().into(),
            created_at: Utc::now().to_rfc3339(),
            period: self.config.period,
            pair: self.pair.clone(),
            seeds: Seeds {
                scenario: self.config.scenario.as_ref().map(|s| s.seed),
                correlation: self.config.analysis.correlation_seed,
            },
            config: self.config.clone(),
            outputs: self.dir.outputs().to_vec(),
            notes: self.notes,
        };
        self.dir.write_manifest(&manifest)?;
        Ok(RunSummary {
            dir: self.dir.path().to_path_buf(),
            manifest,
        })
    }
}

/// Warn when none of a pair's sources appear in the ticks at all.
fn check_sources(pair: &PairConfig, ticks: &DayTicks) {
    let ids = pair.source_ids();
    let seen = ticks.values().flatten().any(|t| ids.contains(t.source()));
    if !seen && !ticks.is_empty() {
        tracing::warn!(pair = %pair.pair, sources = ?pair.sources, "no ticks from any configured source");
    }
}
