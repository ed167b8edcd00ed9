//! Stage runners behind the CLI. Each stage reads what earlier stages left
//! in the output directory and writes its own JSON artifact next to them.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{build_dirt_map, ingest_pass_log, load_dirt_grid, load_grid, DirtMap, DirtMapDoc, Horizon};
use crate::partition::{partition_with, validate_partition, Partition, PartitionConfig, ValidationReport};
use crate::render;
use crate::route::{annotate_route, plan_route, Route, RouteConfig};
use crate::sim::{compare, sample_dirt_field, simulate_baseline, simulate_team, ComparisonReport, SimReport};

pub const DIRTMAP_JSON: &str = "dirtmap.json";
pub const PARTITION_JSON: &str = "partition.json";
pub const ROUTES_JSON: &str = "routes.json";
pub const REPORT_JSON: &str = "report.json";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const ERROR_JSON: &str = "error.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Estimate,
    Partition,
    Plan,
    Simulate,
    Compare,
    Run,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Estimate => "estimate",
            Stage::Partition => "partition",
            Stage::Plan => "plan",
            Stage::Simulate => "simulate",
            Stage::Compare => "compare",
            Stage::Run => "run",
        };
        f.write_str(name)
    }
}

/// Process exit code for a failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Parse { .. }
        | Error::Format(_)
        | Error::Ordering { .. }
        | Error::Domain(_)
        | Error::InsufficientData { .. }
        | Error::Interval { .. }
        | Error::Consistency(_) => 3,
        Error::Topology { .. }
        | Error::Infeasible { .. }
        | Error::Exhausted
        | Error::PartitionFailure { .. }
        | Error::BranchingOverflow { .. }
        | Error::Degenerate(_) => 4,
        Error::Io { .. } => 5,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Parse { .. } => "parse",
        Error::Format(_) => "format",
        Error::Ordering { .. } => "ordering",
        Error::Domain(_) => "domain",
        Error::InsufficientData { .. } => "insufficient_data",
        Error::Interval { .. } => "interval",
        Error::Consistency(_) => "consistency",
        Error::Topology { .. } => "topology",
        Error::Infeasible { .. } => "infeasible",
        Error::Exhausted => "exhausted",
        Error::PartitionFailure { .. } => "partition_failure",
        Error::BranchingOverflow { .. } => "branching_overflow",
        Error::Degenerate(_) => "degenerate",
        Error::Config(_) => "config",
        Error::Io { .. } => "io",
    }
}

/// Machine-readable failure written to `error.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub stage: Stage,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorReport {
    pub fn new(stage: Stage, err: &Error) -> Self {
        ErrorReport {
            stage,
            kind: error_kind(err).to_string(),
            message: err.to_string(),
            exit_code: exit_code(err),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub robots: usize,
    #[serde(flatten)]
    pub partition: Partition<f64>,
    pub validation: ValidationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutesDoc {
    pub routes: Vec<Route>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub seed: u64,
    pub robots: usize,
    pub team: SimReport,
    pub baseline: SimReport,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Domain(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        row: e.line(),
        column: e.column(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Runs stages against one config and output directory.
pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = &cfg.output_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Pipeline { cfg })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    /// Runs `stage` (all of them for [`Stage::Run`]) and returns the paths
    /// written.
    pub fn run(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        match stage {
            Stage::Estimate => self.estimate(),
            Stage::Partition => self.partition(),
            Stage::Plan => self.plan(),
            Stage::Simulate => self.simulate(),
            Stage::Compare => self.compare(),
            Stage::Run => {
                let mut written = self.estimate()?;
                written.extend(self.partition()?);
                written.extend(self.plan()?);
                written.extend(self.simulate()?);
                written.extend(self.compare()?);
                Ok(written)
            }
        }
    }

    fn load_inputs(&self) -> Result<DirtMap<f64>> {
        let cfg = self.cfg;
        if let Some(path) = &cfg.dirt_model_path {
            let (grid, levels) = load_dirt_grid::<f64>(&read_text(path)?)?;
            let (s, t) = cfg.horizon.unwrap_or((0.0, 1.0));
            return DirtMap::from_levels(grid, Horizon::new(s, t)?, &levels);
        }
        let (map, log) = match (&cfg.map_path, &cfg.log_path) {
            (Some(m), Some(l)) => (m, l),
            _ => return Err(Error::Config("no input configured".into())),
        };
        let (s, t) = cfg
            .horizon
            .ok_or_else(|| Error::Config("estimation needs a horizon".into()))?;
        let grid = load_grid(&read_text(map)?)?;
        let histories = ingest_pass_log(&grid, &read_text(log)?, cfg.epoch)?;
        build_dirt_map(&grid, &histories, s, t)
    }

    fn load_dirt_map(&self) -> Result<DirtMap<f64>> {
        DirtMap::from_doc(&read_json::<DirtMapDoc>(&self.out(DIRTMAP_JSON))?)
    }

    fn emit(&self, written: &mut Vec<PathBuf>, name: &str, text: &str) -> Result<()> {
        let path = self.out(name);
        write_text(&path, text)?;
        written.push(path);
        Ok(())
    }

    fn estimate(&self) -> Result<Vec<PathBuf>> {
        let dirt_map = self.load_inputs()?;
        let mut written = Vec::new();
        let path = self.out(DIRTMAP_JSON);
        write_json(&path, &dirt_map.to_doc())?;
        written.push(path);
        if self.cfg.render.dirtmap {
            let r = render::render_dirt_map(&dirt_map, self.cfg.fixed_scale);
            self.emit(&mut written, "dirtmap.pgm", &r.pgm)?;
            self.emit(&mut written, "dirtmap.txt", &r.ascii)?;
        }
        if self.cfg.render.timemap {
            let r = render::render_time_map(&dirt_map)?;
            self.emit(&mut written, "timemap.pgm", &r.pgm)?;
            self.emit(&mut written, "timemap.txt", &r.ascii)?;
        }
        Ok(written)
    }

    fn partition(&self) -> Result<Vec<PathBuf>> {
        let dirt_map = self.load_dirt_map()?;
        let config = PartitionConfig {
            max_expansions: self.cfg.max_expansions,
        };
        let partition = partition_with(&dirt_map, self.cfg.robots, &config)?;
        let validation = validate_partition(&partition, &dirt_map);
        if !validation.passed() {
            let failed: Vec<&str> = validation
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            return Err(Error::PartitionFailure {
                region: partition.regions.len().saturating_sub(1),
                reason: format!("validation failed: {}", failed.join(", ")),
                assigned: partition.regions.iter().map(|r| r.cells.len()).sum(),
            });
        }
        let mut written = Vec::new();
        if self.cfg.render.partition {
            let mut text = render::render_partition(&partition, &dirt_map);
            text.push('\n');
            text.push_str(&render::partition_summary(&partition));
            self.emit(&mut written, "partition.txt", &text)?;
        }
        let path = self.out(PARTITION_JSON);
        write_json(
            &path,
            &PartitionDoc {
                robots: self.cfg.robots,
                partition,
                validation,
            },
        )?;
        written.insert(0, path);
        Ok(written)
    }

    fn plan(&self) -> Result<Vec<PathBuf>> {
        let dirt_map = self.load_dirt_map()?;
        let doc: PartitionDoc = read_json(&self.out(PARTITION_JSON))?;
        let config = RouteConfig {
            max_branches: self.cfg.max_branches,
            ..RouteConfig::default()
        };
        let routes = doc
            .partition
            .regions
            .iter()
            .map(|r| annotate_route(r.id, &plan_route(&r.cells, &config)?, &dirt_map))
            .collect::<Result<Vec<_>>>()?;
        let mut written = Vec::new();
        let path = self.out(ROUTES_JSON);
        if self.cfg.render.routes {
            let text = render::render_partition_routes(&doc.partition, &routes, &dirt_map)?;
            self.emit(&mut written, "routes.txt", &text)?;
        }
        write_json(&path, &RoutesDoc { routes })?;
        written.insert(0, path);
        Ok(written)
    }

    fn simulate(&self) -> Result<Vec<PathBuf>> {
        let dirt_map = self.load_dirt_map()?;
        let RoutesDoc { routes } = read_json(&self.out(ROUTES_JSON))?;
        let params = self.cfg.sim;
        let field = sample_dirt_field(&dirt_map, params.rng_seed);
        let report = ReportDoc {
            seed: params.rng_seed,
            robots: routes.len(),
            team: simulate_team(&routes, &dirt_map, &field, &params)?,
            baseline: simulate_baseline(&dirt_map, &field, &params)?,
        };
        let path = self.out(REPORT_JSON);
        write_json(&path, &report)?;
        Ok(vec![path])
    }

    fn compare(&self) -> Result<Vec<PathBuf>> {
        let report: ReportDoc = read_json(&self.out(REPORT_JSON))?;
        let comparison: ComparisonReport = compare(&report.team, &report.baseline)?;
        let path = self.out(COMPARISON_JSON);
        write_json(&path, &comparison)?;
        Ok(vec![path])
    }
}

/// Writes `error.json` into `dir`, creating it if needed. Best effort: the
/// original error matters more than a failure to report it.
pub fn write_error_report(dir: &Path, report: &ErrorReport) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(ERROR_JSON);
    write_json(&path, report)?;
    Ok(path)
}
