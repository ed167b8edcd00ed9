//! `key = value` scenario files.
//!
//! ```text
//! # inputs: a grid plus a pass log, or a ready-made dirt model
//! map = warehouse.grid
//! log = passes.csv
//! horizon_start = 100
//! horizon_end = 160
//! robots = 3
//! seed = 7
//! output_dir = out
//! render = dirtmap, partition, routes, timemap
//! ```
//!
//! Relative paths resolve against the directory holding the file. Unknown
//! and repeated keys are rejected.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::SimParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RenderFlags {
    pub dirtmap: bool,
    pub partition: bool,
    pub routes: bool,
    pub timemap: bool,
}

impl RenderFlags {
    pub fn all() -> Self {
        RenderFlags {
            dirtmap: true,
            partition: true,
            routes: true,
            timemap: true,
        }
    }

    fn parse(value: &str) -> Result<Self> {
        let mut flags = RenderFlags::default();
        for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "dirtmap" => flags.dirtmap = true,
                "partition" => flags.partition = true,
                "routes" => flags.routes = true,
                "timemap" => flags.timemap = true,
                "none" => {}
                other => return Err(Error::Config(format!("unknown render flag {other:?}"))),
            }
        }
        Ok(flags)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub map_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    /// Dirt levels given directly, skipping estimation.
    pub dirt_model_path: Option<PathBuf>,
    pub robots: usize,
    pub horizon: Option<(f64, f64)>,
    pub epoch: f64,
    pub sim: SimParams,
    pub output_dir: PathBuf,
    pub render: RenderFlags,
    pub fixed_scale: bool,
    pub max_branches: usize,
    pub max_expansions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map_path: None,
            log_path: None,
            dirt_model_path: None,
            robots: 3,
            horizon: None,
            epoch: 0.0,
            sim: SimParams::default(),
            output_dir: PathBuf::from("out"),
            render: RenderFlags::all(),
            fixed_scale: false,
            max_branches: 10_000,
            max_expansions: 1_000_000,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses a config. Call [`RunConfig::validate`] once overrides are in.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        let mut s = None;
        let mut t = None;
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {}: empty value for {key:?}", lineno + 1)));
            }
            match key {
                "map" => cfg.map_path = Some(resolve(value)),
                "log" => cfg.log_path = Some(resolve(value)),
                "dirt_model" => cfg.dirt_model_path = Some(resolve(value)),
                "robots" => cfg.robots = number(key, value)?,
                "horizon_start" => s = Some(number(key, value)?),
                "horizon_end" => t = Some(number(key, value)?),
                "epoch" => cfg.epoch = number(key, value)?,
                "travel_speed" => cfg.sim.travel_speed = number(key, value)?,
                "move_power" => cfg.sim.move_power = number(key, value)?,
                "clean_power" => cfg.sim.clean_power = number(key, value)?,
                "overhead_per_robot" => cfg.sim.overhead_per_robot = number(key, value)?,
                "seed" => cfg.sim.rng_seed = number(key, value)?,
                "output_dir" => cfg.output_dir = resolve(value),
                "render" => cfg.render = RenderFlags::parse(value)?,
                "fixed_scale" => cfg.fixed_scale = number(key, value)?,
                "max_branches" => cfg.max_branches = number(key, value)?,
                "max_expansions" => cfg.max_expansions = number(key, value)?,
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        cfg.horizon = match (s, t) {
            (Some(s), Some(t)) => Some((s, t)),
            (None, None) => None,
            _ => return Err(Error::Config("horizon_start and horizon_end go together".into())),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots == 0 {
            return Err(Error::Config("robots must be at least 1".into()));
        }
        if let Some((s, t)) = self.horizon {
            if !(s <= t) {
                return Err(Error::Config(format!("horizon_start {s} is after horizon_end {t}")));
            }
        }
        let empty = |p: &Option<PathBuf>| p.as_ref().is_some_and(|p| p.as_os_str().is_empty());
        if empty(&self.map_path) || empty(&self.log_path) || empty(&self.dirt_model_path) {
            return Err(Error::Config("paths must be non-empty".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must be non-empty".into()));
        }
        match (&self.dirt_model_path, &self.map_path, &self.log_path) {
            (Some(_), None, None) => {}
            (None, Some(_), Some(_)) => {
                if self.horizon.is_none() {
                    return Err(Error::Config("estimation needs horizon_start and horizon_end".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "give either map and log, or dirt_model on its own".into(),
                ))
            }
        }
        if self.max_branches == 0 || self.max_expansions == 0 {
            return Err(Error::Config("max_branches and max_expansions must be positive".into()));
        }
        self.sim.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# comment
map = maps/a.grid
log = /data/passes.csv
horizon_start = 5
horizon_end = 10
robots = 2
seed = 9
render = dirtmap, routes
";

    #[test]
    fn parses_and_resolves_paths() {
        let cfg = RunConfig::parse(SAMPLE, Path::new("/base")).unwrap();
        assert_eq!(cfg.map_path, Some(PathBuf::from("/base/maps/a.grid")));
        assert_eq!(cfg.log_path, Some(PathBuf::from("/data/passes.csv")));
        assert_eq!(cfg.horizon, Some((5.0, 10.0)));
        assert_eq!((cfg.robots, cfg.sim.rng_seed), (2, 9));
        assert!(cfg.render.dirtmap && cfg.render.routes && !cfg.render.timemap);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(RunConfig::parse("speed = 3\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("robots = 3\nrobots = 4\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("robots\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("robots = many\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("render = video\n", Path::new(".")).is_err());
    }

    #[test]
    fn validation_catches_bad_scenarios() {
        let mut cfg = RunConfig::parse(SAMPLE, Path::new("/base")).unwrap();
        cfg.robots = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let reversed = SAMPLE.replace("horizon_start = 5", "horizon_start = 50");
        assert!(RunConfig::parse(&reversed, Path::new(".")).unwrap().validate().is_err());

        let mixed = format!("{SAMPLE}dirt_model = m.txt\n");
        assert!(RunConfig::parse(&mixed, Path::new(".")).unwrap().validate().is_err());

        let model_only = RunConfig::parse("dirt_model = m.txt\n", Path::new(".")).unwrap();
        model_only.validate().unwrap();
        assert!(RunConfig::parse("", Path::new(".")).unwrap().validate().is_err());
    }
}
