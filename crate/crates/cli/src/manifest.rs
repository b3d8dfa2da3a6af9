//! Experiment manifests and the flat `key = value` config format.
//!
//! Grammar: one `key = value` pair per line, surrounding whitespace ignored,
//! blank lines and lines starting with `#` skipped. Keys may appear at most
//! once. [`ExperimentManifest::to_config`] writes every key in a fixed order,
//! and parsing that text gives back the same manifest.

use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use submax::network::Bootstrap;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Alg1,
    Alg2,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "alg1" => Ok(Algorithm::Alg1),
            "alg2" => Ok(Algorithm::Alg2),
            _ => Err(format!("unknown algorithm `{s}` (expected alg1 or alg2)")),
        }
    }
}

/// A fixed step size or `min(0.0005, 1/Δ̂^max)` resolved per instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Auto => f.write_str("auto"),
            StepSize::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl std::str::FromStr for StepSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(StepSize::Auto);
        }
        let g: f64 = s.parse().map_err(|_| format!("invalid step size `{s}`"))?;
        Ok(StepSize::Fixed(g))
    }
}

/// Built-in graph names; anything else is read as an edge-list file.
pub const BUILTIN_TOPOLOGIES: [&str; 5] = ["complete", "string", "ring", "star", "general10"];

#[derive(Clone, Debug, PartialEq)]
pub enum TopologySpec {
    None,
    Builtin(String),
    File(PathBuf),
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::None => f.write_str("none"),
            TopologySpec::Builtin(name) => f.write_str(name),
            TopologySpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl std::str::FromStr for TopologySpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "" => return Err("empty topology".into()),
            "none" => TopologySpec::None,
            name if BUILTIN_TOPOLOGIES.contains(&name) => TopologySpec::Builtin(name.to_string()),
            path => TopologySpec::File(PathBuf::from(path)),
        })
    }
}

pub fn parse_bootstrap(s: &str) -> Result<Bootstrap, String> {
    match s {
        "empty" => Ok(Bootstrap::Empty),
        "uniform" => Ok(Bootstrap::UniformSample),
        _ => Err(format!(
            "unknown bootstrap `{s}` (expected empty or uniform)"
        )),
    }
}

fn bootstrap_name(b: Bootstrap) -> &'static str {
    match b {
        Bootstrap::Empty => "empty",
        Bootstrap::UniformSample => "uniform",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub instance: PathBuf,
    pub algorithm: Algorithm,
    pub gamma: StepSize,
    pub sample_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub eps_vertex: f64,
    pub eps_eq: f64,
    pub check_every: usize,
    pub stop_on_equilibrium: bool,
    pub include_empty_strategy: bool,
    pub delta_max_includes_empty: bool,
    pub topology: TopologySpec,
    pub hop_offset: usize,
    pub bootstrap: Bootstrap,
    pub trials: usize,
    pub out: PathBuf,
    pub probs: bool,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        let cfg = submax::RunConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            instance: PathBuf::new(),
            algorithm: Algorithm::Alg1,
            gamma: StepSize::Auto,
            sample_size: cfg.sample_size,
            max_iters: cfg.max_iters,
            seed: cfg.seed,
            eps_vertex: cfg.eps_vertex,
            eps_eq: cfg.eps_eq,
            check_every: cfg.check_every,
            stop_on_equilibrium: cfg.stop_on_equilibrium,
            include_empty_strategy: false,
            delta_max_includes_empty: true,
            topology: TopologySpec::None,
            hop_offset: 0,
            bootstrap: Bootstrap::Empty,
            trials: 1,
            out: PathBuf::from("out"),
            probs: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| {
        CliError::Validation(format!("line {line}: invalid value `{value}` for `{key}`"))
    })
}

fn parse_with<T>(
    line: usize,
    key: &str,
    value: &str,
    f: impl Fn(&str) -> Result<T, String>,
) -> CliResult<T> {
    f(value).map_err(|e| CliError::Validation(format!("line {line}: `{key}`: {e}")))
}

impl ExperimentManifest {
    /// Applies every pair in `text` on top of `self`.
    pub fn apply_config(&mut self, text: &str) -> CliResult<()> {
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("line {line}: expected `key = value`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::Validation(format!(
                    "line {line}: duplicate key `{key}`"
                )));
            }
            match key {
                "schema_version" => {
                    let v: u32 = parse_value(line, key, value)?;
                    if v != SCHEMA_VERSION {
                        return Err(CliError::Validation(format!(
                            "line {line}: unsupported schema version {v} (this build reads {SCHEMA_VERSION})"
                        )));
                    }
                    self.schema_version = v;
                }
                "instance" => self.instance = PathBuf::from(value),
                "algorithm" => self.algorithm = parse_with(line, key, value, str::parse)?,
                "gamma" => self.gamma = parse_with(line, key, value, str::parse)?,
                "sample_size" => self.sample_size = parse_value(line, key, value)?,
                "max_iters" => self.max_iters = parse_value(line, key, value)?,
                "seed" => self.seed = parse_value(line, key, value)?,
                "eps_vertex" => self.eps_vertex = parse_value(line, key, value)?,
                "eps_eq" => self.eps_eq = parse_value(line, key, value)?,
                "check_every" => self.check_every = parse_value(line, key, value)?,
                "stop_on_equilibrium" => self.stop_on_equilibrium = parse_value(line, key, value)?,
                "include_empty_strategy" => {
                    self.include_empty_strategy = parse_value(line, key, value)?
                }
                "delta_max_includes_empty" => {
                    self.delta_max_includes_empty = parse_value(line, key, value)?
                }
                "topology" => self.topology = parse_with(line, key, value, str::parse)?,
                "hop_offset" => self.hop_offset = parse_value(line, key, value)?,
                "bootstrap" => self.bootstrap = parse_with(line, key, value, parse_bootstrap)?,
                "trials" => self.trials = parse_value(line, key, value)?,
                "out" => self.out = PathBuf::from(value),
                "probs" => self.probs = parse_value(line, key, value)?,
                _ => {
                    return Err(CliError::Validation(format!(
                        "line {line}: unknown key `{key}`"
                    )))
                }
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn from_config(text: &str) -> CliResult<Self> {
        let mut m = Self::default();
        m.apply_config(text)?;
        Ok(m)
    }

    /// Canonical text: every key, fixed order, no comments.
    pub fn to_config(&self) -> String {
        let pairs: [(&str, String); 19] = [
            ("schema_version", self.schema_version.to_string()),
            ("instance", self.instance.display().to_string()),
            ("algorithm", self.algorithm.to_string()),
            ("gamma", self.gamma.to_string()),
            ("sample_size", self.sample_size.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("seed", self.seed.to_string()),
            ("eps_vertex", self.eps_vertex.to_string()),
            ("eps_eq", self.eps_eq.to_string()),
            ("check_every", self.check_every.to_string()),
            ("stop_on_equilibrium", self.stop_on_equilibrium.to_string()),
            (
                "include_empty_strategy",
                self.include_empty_strategy.to_string(),
            ),
            (
                "delta_max_includes_empty",
                self.delta_max_includes_empty.to_string(),
            ),
            ("topology", self.topology.to_string()),
            ("hop_offset", self.hop_offset.to_string()),
            ("bootstrap", bootstrap_name(self.bootstrap).to_string()),
            ("trials", self.trials.to_string()),
            ("out", self.out.display().to_string()),
            ("probs", self.probs.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_config().as_bytes()))
    }

    /// Checks that do not need the instance.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        if self.instance.as_os_str().is_empty() {
            return bad("no instance given (use --instance or `instance = …`)".into());
        }
        if let StepSize::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("step size must be positive, got {g}"));
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        match (self.algorithm, &self.topology) {
            (Algorithm::Alg1, TopologySpec::None) | (Algorithm::Alg2, _) => {}
            (Algorithm::Alg1, t) => return bad(format!("alg1 takes no topology, got `{t}`")),
        }
        if self.algorithm == Algorithm::Alg1 && self.hop_offset != 0 {
            return bad("hop_offset applies to alg2 only".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentManifest {
        ExperimentManifest {
            instance: PathBuf::from("data/movies.inst"),
            algorithm: Algorithm::Alg2,
            gamma: StepSize::Fixed(0.1 + 0.2),
            eps_vertex: 1e-9,
            topology: TopologySpec::File(PathBuf::from("graphs/string10.edges")),
            hop_offset: 1,
            bootstrap: Bootstrap::UniformSample,
            trials: 20,
            probs: true,
            ..Default::default()
        }
    }

    #[test]
    fn config_round_trips() {
        let m = sample();
        let text = m.to_config();
        assert_eq!(ExperimentManifest::from_config(&text).unwrap(), m);
        assert_eq!(
            ExperimentManifest::default().to_config().lines().count(),
            19
        );
        let d = ExperimentManifest::default();
        assert_eq!(ExperimentManifest::from_config(&d.to_config()).unwrap(), d);
    }

    #[test]
    fn comments_blank_lines_and_spacing() {
        let m =
            ExperimentManifest::from_config("# run\n\n  gamma=0.01 \nalgorithm =alg1\n").unwrap();
        assert_eq!(m.gamma, StepSize::Fixed(0.01));
        assert_eq!(m.algorithm, Algorithm::Alg1);
    }

    #[test]
    fn bad_lines_are_rejected() {
        for text in [
            "gamma 0.1",
            "colour = red",
            "seed = -1",
            "seed = 1\nseed = 2",
            "schema_version = 9",
        ] {
            assert!(
                matches!(
                    ExperimentManifest::from_config(text),
                    Err(CliError::Validation(_))
                ),
                "{text}"
            );
        }
    }

    #[test]
    fn topology_names() {
        assert_eq!(
            "string".parse::<TopologySpec>().unwrap(),
            TopologySpec::Builtin("string".into())
        );
        assert_eq!("none".parse::<TopologySpec>().unwrap(), TopologySpec::None);
        assert_eq!(
            "g.edges".parse::<TopologySpec>().unwrap(),
            TopologySpec::File("g.edges".into())
        );
    }

    #[test]
    fn hash_tracks_content() {
        let a = sample();
        let mut b = sample();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let mut m = sample();
        assert!(m.validate().is_ok());
        m.algorithm = Algorithm::Alg1;
        assert!(m.validate().is_err());
        m.topology = TopologySpec::None;
        m.hop_offset = 0;
        assert!(m.validate().is_ok());
        m.gamma = StepSize::Fixed(0.0);
        assert!(m.validate().is_err());
    }
}
