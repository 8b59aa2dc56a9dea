//! Plain-text `key=value` run configuration with an explicit schema version.
//!
//! The file format is diff-friendly and language-agnostic; the canonical
//! serialisation (fixed key order) is hashed into every emitted record so a
//! results file carries its own provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::lattice::TorusGrid;
use crate::potential::{ModelKind, ModelParams, WickConvention};
use crate::rng::splitmix64;
use crate::scales::{ScaleGrid, ScaleParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub beta: f64,
    pub lambda: f64,
    pub mass: f64,
    pub n: usize,
    pub wick: WickConvention,
    /// Largest scale; `None` means `100/m²`.
    pub t_max: Option<f64>,
    pub scale_steps: usize,
    /// Midpoint-refinement levels applied to the dyadic grid (halves every
    /// step per level; the drift is explicit Euler, so this is the accuracy
    /// knob).
    pub scale_refine: usize,
    pub mc_samples_flow: usize,
    pub mc_samples_diag: usize,
    pub replicas: usize,
    /// Lattice side counts of a sweep, e.g. `16,32,64`.
    pub eps_sweep: Vec<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub name: String,
    pub drift_clamp: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Liouville,
            beta: std::f64::consts::PI,
            lambda: 1.0,
            mass: 1.0,
            n: 16,
            wick: WickConvention::EpsilonPower,
            t_max: None,
            scale_steps: 24,
            scale_refine: 0,
            mc_samples_flow: 256,
            mc_samples_diag: 4096,
            replicas: 100,
            eps_sweep: vec![16, 32, 64],
            seed: 1,
            out: PathBuf::from("results"),
            name: String::new(),
            drift_clamp: crate::tolerances::DRIFT_CLAMP,
        }
    }
}

impl RunConfig {
    pub fn effective_t_max(&self) -> f64 {
        self.t_max.unwrap_or(100.0 / (self.mass * self.mass))
    }

    pub fn scale_params(&self) -> Result<ScaleParams> {
        ScaleParams::new(self.mass, TorusGrid::new(self.n)?)
    }

    pub fn scale_params_for(&self, n: usize) -> Result<ScaleParams> {
        ScaleParams::new(self.mass, TorusGrid::new(n)?)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model, self.beta, self.lambda, self.scale_params()?)
    }

    pub fn model_params_for(&self, n: usize) -> Result<ModelParams> {
        ModelParams::new(self.model, self.beta, self.lambda, self.scale_params_for(n)?)
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let mut grid = ScaleGrid::dyadic(self.effective_t_max(), self.scale_steps)?;
        for _ in 0..self.scale_refine {
            grid = grid.refined();
        }
        FlowConfig::new(grid, self.mc_samples_flow, self.drift_clamp)
    }

    /// Canonical serialisation: one `key=value` per line, fixed order.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("schema={SCHEMA_VERSION}\n"));
        s.push_str(&format!("model={}\n", self.model.as_str()));
        s.push_str(&format!("beta={:.17e}\n", self.beta));
        s.push_str(&format!("lambda={:.17e}\n", self.lambda));
        s.push_str(&format!("mass={:.17e}\n", self.mass));
        s.push_str(&format!("n={}\n", self.n));
        s.push_str(&format!(
            "wick={}\n",
            match self.wick {
                WickConvention::EpsilonPower => "epsilon-power",
                WickConvention::VarianceSubtraction => "variance-subtraction",
            }
        ));
        match self.t_max {
            Some(t) => s.push_str(&format!("t_max={t:.17e}\n")),
            None => s.push_str("t_max=auto\n"),
        }
        s.push_str(&format!("scale_steps={}\n", self.scale_steps));
        s.push_str(&format!("scale_refine={}\n", self.scale_refine));
        s.push_str(&format!("mc.samples.flow={}\n", self.mc_samples_flow));
        s.push_str(&format!("mc.samples.diag={}\n", self.mc_samples_diag));
        s.push_str(&format!("replicas={}\n", self.replicas));
        s.push_str(&format!(
            "eps_sweep={}\n",
            self.eps_sweep
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        s.push_str(&format!("seed={}\n", self.seed));
        s.push_str(&format!("out={}\n", self.out.display()));
        s.push_str(&format!("name={}\n", self.name));
        s.push_str(&format!("drift_clamp={:.17e}\n", self.drift_clamp));
        s
    }

    /// 64-bit hash of the canonical serialisation, rendered as hex.  The
    /// output directory and run name are excluded: they do not influence any
    /// computed statistic, and `(config, seed)` must hash identically
    /// wherever the results land.
    pub fn hash(&self) -> String {
        let mut state = 0xcbf29ce484222325u64;
        for line in self.canonical_string().lines() {
            if line.starts_with("out=") || line.starts_with("name=") {
                continue;
            }
            for b in line.bytes() {
                state ^= b as u64;
                splitmix64(&mut state);
            }
            state ^= b'\n' as u64;
            splitmix64(&mut state);
        }
        format!("{state:016x}")
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut cfg = RunConfig::default();
        for (k, v) in &map {
            cfg.apply(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Apply one key (used both by the parser and by CLI overrides).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{v}' for {key}")))
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad integer '{v}' for {key}")))
        };
        match key {
            "schema" | "schema_version" => {
                let s: u32 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad schema '{value}'")))?;
                if s != SCHEMA_VERSION {
                    return Err(Error::Config(format!(
                        "unsupported schema version {s}, expected {SCHEMA_VERSION}"
                    )));
                }
            }
            "model" => self.model = value.parse()?,
            "beta" => self.beta = parse_f64(value)?,
            "lambda" => self.lambda = parse_f64(value)?,
            "mass" => self.mass = parse_f64(value)?,
            "n" | "grid" => self.n = parse_usize(value)?,
            "wick" => self.wick = value.parse()?,
            "t_max" => {
                self.t_max = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(value)?)
                }
            }
            "scale_steps" => self.scale_steps = parse_usize(value)?,
            "scale_refine" => self.scale_refine = parse_usize(value)?,
            "mc.samples.flow" => self.mc_samples_flow = parse_usize(value)?,
            "mc.samples.diag" => self.mc_samples_diag = parse_usize(value)?,
            "replicas" => self.replicas = parse_usize(value)?,
            "eps_sweep" => {
                self.eps_sweep = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad sweep entry '{s}'")))
                    })
                    .collect::<Result<_>>()?;
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed '{value}'")))?
            }
            "out" => self.out = PathBuf::from(value),
            "name" => self.name = value.to_string(),
            "drift_clamp" => self.drift_clamp = parse_f64(value)?,
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }
}
