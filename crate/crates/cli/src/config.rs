//! Run configuration: defaults, then a flat `key=value` file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kgwave::Params;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub omega: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub max_grid: usize,
    pub n_points: usize,
    pub raster: usize,
    pub t: f64,
    pub m: i32,
    pub radius: i64,
    pub delta: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            out: PathBuf::from("."),
            workers: None,
            max_grid: kgwave::propagator::DEFAULT_MAX_GRID,
            n_points: kgwave::velocity::ATLAS_POINTS,
            raster: 201,
            t: 10.0,
            m: 0,
            radius: 32,
            delta: 0.05,
            t_min: 50.0,
            t_max: 800.0,
            samples: 16,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError(format!("cannot parse {key} = {value:?}")))
}

impl RunConfig {
    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "omega" => self.omega = parse(key, value)?,
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "workers" => self.workers = Some(parse(key, value)?),
            "max_grid" => self.max_grid = parse(key, value)?,
            "n_points" => self.n_points = parse(key, value)?,
            "raster" => self.raster = parse(key, value)?,
            "t" => self.t = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "t_min" => self.t_min = parse(key, value)?,
            "t_max" => self.t_max = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            _ => return Err(ConfigError(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn apply_overrides(&mut self, pairs: &BTreeMap<&'static str, String>) -> Result<(), ConfigError> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn params(&self) -> Result<Params, ConfigError> {
        Params::new(self.omega, self.lambda1, self.lambda2).map_err(|e| ConfigError(e.to_string()))
    }

    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> Result<Params, ConfigError> {
        let p = self.params()?;
        if self.workers == Some(0) {
            return Err(ConfigError("workers must be positive".into()));
        }
        if self.max_grid < 64 || !self.max_grid.is_power_of_two() {
            return Err(ConfigError(format!("max_grid = {} must be a power of two >= 64", self.max_grid)));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(ConfigError(format!("delta = {} must be positive", self.delta)));
        }
        if !(0.0 < self.t_min && self.t_min < self.t_max) {
            return Err(ConfigError(format!("need 0 < t_min < t_max, got {} and {}", self.t_min, self.t_max)));
        }
        if self.radius < 0 || self.raster < 2 || self.samples < 2 {
            return Err(ConfigError("radius must be >= 0, raster and samples >= 2".into()));
        }
        if !self.t.is_finite() {
            return Err(ConfigError(format!("t = {} must be finite", self.t)));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# lattice\nomega = 0\nlambda2=4\n\nsamples=8\n").unwrap();
        let mut o = BTreeMap::new();
        o.insert("lambda2", "2".to_string());
        c.apply_overrides(&o).unwrap();
        assert_eq!((c.omega, c.lambda1, c.lambda2, c.samples), (0.0, 1.0, 2.0, 8));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("colour=blue").is_err());
        assert!(c.apply_text("omega").is_err());
        assert!(c.apply_text("omega=fast").is_err());
        c.lambda1 = 0.0;
        assert!(c.validate().is_err());
        let c = RunConfig { max_grid: 1000, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }
}
