//! Flat `key = value` configuration files.
//!
//! Lines are `key = value` or `key: value`; `#` starts a comment. Unknown or
//! repeated keys are errors, and every error names the offending key.
//!
//! Covariances (`H`, `psi`): `identity`, `diag:v1,v2,...`, `random-psd:rank,seed`.
//! Prior mean (`beta_star`): `zero`, `const:c`, `list:v1,v2,...`.
//! Flow start (`init`): `zero`, `optimum`, `random:seed`.
//! `dt` and `T` accept `auto`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IclError, Result};
use crate::linalg::{Mat, PsdMatrix, Vector};
use crate::task::{substream, TaskSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    RiskEquivalence,
    Minima,
    Gap,
    Flow,
    Bayes,
    Moments,
    All,
}

impl Suite {
    pub const INDIVIDUAL: [Suite; 6] = [
        Suite::RiskEquivalence,
        Suite::Minima,
        Suite::Gap,
        Suite::Flow,
        Suite::Bayes,
        Suite::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::RiskEquivalence => "risk-equivalence",
            Suite::Minima => "minima",
            Suite::Gap => "gap",
            Suite::Flow => "flow",
            Suite::Bayes => "bayes",
            Suite::Moments => "moments",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = IclError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::INDIVIDUAL
            .iter()
            .chain(std::iter::once(&Suite::All))
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| IclError::config("suite", format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceRule {
    Identity,
    Diag(Vec<f64>),
    RandomPsd { rank: usize, seed: u64 },
}

impl CovarianceRule {
    fn parse(key: &str, s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(CovarianceRule::Identity);
        }
        if let Some(rest) = s.strip_prefix("diag:") {
            return Ok(CovarianceRule::Diag(parse_list(key, rest)?));
        }
        if let Some(rest) = s.strip_prefix("random-psd:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(IclError::config(key, "expected random-psd:rank,seed"));
            }
            return Ok(CovarianceRule::RandomPsd {
                rank: parse_num(key, parts[0])?,
                seed: parse_num(key, parts[1])?,
            });
        }
        Err(IclError::config(
            key,
            format!("`{s}` is not identity | diag:list | random-psd:rank,seed"),
        ))
    }

    pub fn build(&self, key: &str, d: usize) -> Result<PsdMatrix> {
        match self {
            CovarianceRule::Identity => Ok(PsdMatrix::identity(d)),
            CovarianceRule::Diag(v) => {
                if v.len() != d {
                    return Err(IclError::config(key, format!("diag has {} entries, d = {d}", v.len())));
                }
                PsdMatrix::diagonal(v).map_err(|e| IclError::config(key, e.to_string()))
            }
            CovarianceRule::RandomPsd { rank, seed } => {
                if *rank > d {
                    return Err(IclError::config(key, format!("rank {rank} exceeds d = {d}")));
                }
                Ok(random_psd(d, *rank, *seed))
            }
        }
    }
}

/// `GGᵀ/max(rank,1)` with `G` a `d × rank` standard normal draw from substream `(seed, 0)`.
pub fn random_psd(d: usize, rank: usize, seed: u64) -> PsdMatrix {
    let mut rng = substream(seed, 0);
    let g = Mat::from_fn(d, rank, |_, _| rng.sample(StandardNormal));
    PsdMatrix::new(&g * g.transpose() / rank.max(1) as f64).expect("Gram matrices are PSD")
}

#[derive(Clone, Debug, PartialEq)]
pub enum BetaRule {
    Zero,
    Const(f64),
    List(Vec<f64>),
}

impl BetaRule {
    fn parse(key: &str, s: &str) -> Result<Self> {
        if s == "zero" {
            return Ok(BetaRule::Zero);
        }
        if let Some(rest) = s.strip_prefix("const:") {
            return Ok(BetaRule::Const(parse_num(key, rest)?));
        }
        if let Some(rest) = s.strip_prefix("list:") {
            return Ok(BetaRule::List(parse_list(key, rest)?));
        }
        Err(IclError::config(key, format!("`{s}` is not zero | const:c | list:values")))
    }

    pub fn build(&self, key: &str, d: usize) -> Result<Vector> {
        match self {
            BetaRule::Zero => Ok(Vector::zeros(d)),
            BetaRule::Const(c) => Ok(Vector::from_element(d, *c)),
            BetaRule::List(v) if v.len() == d => Ok(Vector::from_column_slice(v)),
            BetaRule::List(v) => Err(IclError::config(key, format!("list has {} entries, d = {d}", v.len()))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitRule {
    Zero,
    Optimum,
    Random(u64),
}

impl InitRule {
    fn parse(key: &str, s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitRule::Zero),
            "optimum" => Ok(InitRule::Optimum),
            _ => match s.strip_prefix("random:") {
                Some(rest) => Ok(InitRule::Random(parse_num(key, rest)?)),
                None => Err(IclError::config(key, format!("`{s}` is not zero | optimum | random:seed"))),
            },
        }
    }
}

/// `auto` or an explicit positive value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub d: usize,
    pub context_len: usize,
    pub h: CovarianceRule,
    pub psi: CovarianceRule,
    pub beta_star: BetaRule,
    pub sigma2: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub dt: Auto,
    pub horizon: Auto,
    pub init: InitRule,
    pub record_every: usize,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for every key except `seed`.
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig {
            suite: Suite::All,
            d: 20,
            context_len: 40,
            h: CovarianceRule::Identity,
            psi: CovarianceRule::Identity,
            beta_star: BetaRule::Zero,
            sigma2: 1.0,
            n_samples: 100_000,
            seed,
            restarts: 8,
            max_iters: 10_000,
            dt: Auto::Auto,
            horizon: Auto::Auto,
            init: InitRule::Random(1),
            record_every: 10,
            out: PathBuf::from("."),
        }
    }

    pub fn task_spec(&self) -> Result<TaskSpec> {
        let h = self.h.build("H", self.d)?;
        let psi = self.psi.build("psi", self.d)?;
        let beta = self.beta_star.build("beta_star", self.d)?;
        TaskSpec::new(h, psi, beta, self.sigma2, self.context_len).map_err(|e| IclError::config("spec", e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(IclError::config("d", "must be ≥ 1"));
        }
        if self.context_len == 0 {
            return Err(IclError::config("M", "must be ≥ 1"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(IclError::config("sigma2", "must be finite and ≥ 0"));
        }
        if self.n_samples < 2 {
            return Err(IclError::config("n_samples", "must be ≥ 2"));
        }
        if self.restarts == 0 {
            return Err(IclError::config("restarts", "must be ≥ 1"));
        }
        if self.record_every == 0 {
            return Err(IclError::config("record_every", "must be ≥ 1"));
        }
        for (key, v) in [("dt", self.dt), ("T", self.horizon)] {
            if let Auto::Value(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(IclError::config(key, "must be positive or `auto`"));
                }
            }
        }
        self.task_spec().map(|_| ())
    }
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| IclError::config(key, format!("cannot parse `{}` as a number", s.trim())))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| parse_num(key, v)).collect()
}

fn parse_auto(key: &str, s: &str) -> Result<Auto> {
    if s == "auto" {
        Ok(Auto::Auto)
    } else {
        Ok(Auto::Value(parse_num(key, s)?))
    }
}

/// Parses config text. `seed_override` satisfies the `seed` requirement and
/// takes precedence over the file.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let sep = line
            .find(['=', ':'])
            .ok_or_else(|| IclError::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
        let key = line[..sep].trim().to_string();
        let value = line[sep + 1..].trim().to_string();
        if key.is_empty() {
            return Err(IclError::config(format!("line {}", lineno + 1), "empty key"));
        }
        if entries.insert(key.clone(), value).is_some() {
            return Err(IclError::config(key, "given more than once"));
        }
    }

    let seed = match (seed_override, entries.get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => parse_num("seed", v)?,
        (None, None) => return Err(IclError::config("seed", "missing; a seed is required")),
    };
    let mut cfg = ExperimentConfig::with_seed(seed);

    for (key, v) in &entries {
        let v = v.as_str();
        match key.as_str() {
            "seed" => {}
            "suite" => cfg.suite = v.parse()?,
            "d" => cfg.d = parse_num(key, v)?,
            "M" => cfg.context_len = parse_num(key, v)?,
            "H" => cfg.h = CovarianceRule::parse(key, v)?,
            "psi" => cfg.psi = CovarianceRule::parse(key, v)?,
            "beta_star" => cfg.beta_star = BetaRule::parse(key, v)?,
            "sigma2" => cfg.sigma2 = parse_num(key, v)?,
            "n_samples" => cfg.n_samples = parse_num(key, v)?,
            "restarts" => cfg.restarts = parse_num(key, v)?,
            "max_iters" => cfg.max_iters = parse_num(key, v)?,
            "dt" => cfg.dt = parse_auto(key, v)?,
            "T" => cfg.horizon = parse_auto(key, v)?,
            "init" => cfg.init = InitRule::parse(key, v)?,
            "record_every" => cfg.record_every = parse_num(key, v)?,
            "out" => cfg.out = PathBuf::from(v),
            _ => return Err(IclError::config(key.clone(), "unknown key")),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with_seed(path, None)
}

pub fn load_config_with_seed(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| IclError::config("path", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, seed_override)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("suite: minima\nd: 2\nM: 4\nseed: 7\n", None).unwrap();
        assert_eq!(cfg.suite, Suite::Minima);
        assert_eq!((cfg.d, cfg.context_len, cfg.seed), (2, 4, 7));
        assert_eq!(cfg.h, CovarianceRule::Identity);
        assert_eq!(cfg.psi, CovarianceRule::Identity);
        assert_eq!(cfg.beta_star, BetaRule::Zero);
        assert_eq!(cfg.sigma2, 1.0);
        let spec = cfg.task_spec().unwrap();
        assert_eq!(spec.h().matrix(), &Mat::identity(2, 2));
    }

    #[test]
    fn diag_rule() {
        let cfg = parse_config("d = 3\nseed = 1\nH = diag:3,1,0 # comment\n", None).unwrap();
        let h = cfg.task_spec().unwrap().h().matrix().clone();
        assert_eq!(h, Mat::from_diagonal(&Vector::from_vec(vec![3.0, 1.0, 0.0])));
    }

    #[test]
    fn random_psd_rank() {
        let cfg = parse_config("d = 4\nseed = 1\npsi = random-psd:2,9\n", None).unwrap();
        assert_eq!(cfg.task_spec().unwrap().psi().rank(), 2);
    }

    fn err_key(text: &str) -> String {
        match parse_config(text, None) {
            Err(IclError::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(err_key("d = two\nseed = 1\n"), "d");
        assert_eq!(err_key("d = 2\nseed = 1\nsigma2 = -1\n"), "sigma2");
        assert_eq!(err_key("d = 2\nseed = 1\nfoo = 3\n"), "foo");
        assert_eq!(err_key("d = 2\n"), "seed");
        assert_eq!(err_key("d = 2\nseed = 1\nH = diag:1,2,3\n"), "H");
        assert_eq!(err_key("d = 2\nseed = 1\nbeta_star = const:x\n"), "beta_star");
        assert_eq!(err_key("d = 2\nseed = 1\nd = 3\n"), "d");
        assert_eq!(err_key("seed = 1\nsuite = nope\n"), "suite");
        assert_eq!(err_key("seed = 1\nT = -2\n"), "T");
    }

    #[test]
    fn seed_override_wins() {
        let cfg = parse_config("d = 2\nseed = 1\n", Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(parse_config("d = 2\n", Some(5)).unwrap().seed, 5);
    }
}
