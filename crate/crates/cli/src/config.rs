//! Flat key=value experiment configs with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(clippy::enum_variant_names)]
pub enum Algo {
    ZoVrgda,
    ZoIsarah,
    ZoSgda,
    ZoSgdmsa,
}

impl Algo {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "zo-vrgda" => Ok(Algo::ZoVrgda),
            "zo-isarah" => Ok(Algo::ZoIsarah),
            "zo-sgda" => Ok(Algo::ZoSgda),
            "zo-sgdmsa" => Ok(Algo::ZoSgdmsa),
            other => Err(ConfigError(format!(
                "unknown algo {other:?} (expected zo-vrgda, zo-isarah, zo-sgda or zo-sgdmsa)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Theory,
    Practical,
}

impl ProfileKind {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "theory" => Ok(ProfileKind::Theory),
            "practical" => Ok(ProfileKind::Practical),
            other => Err(ConfigError(format!(
                "unknown profile {other:?} (expected theory or practical)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProblemConfig {
    Quadratic {
        d1: usize,
        d2: usize,
        kappa: f64,
        l: f64,
        sigma: f64,
        finite_sum: Option<usize>,
        x0_scale: f64,
    },
    Dro {
        dataset: PathBuf,
        minority_count: Option<usize>,
        majority_ratio: usize,
        minority_positive: bool,
        reg_weight: f64,
        declared_l: Option<f64>,
        declared_sigma: f64,
        x0_scale: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algo: Algo,
    pub profile: ProfileKind,
    pub eps: f64,
    pub seed: u64,
    pub query_budget: u64,
    pub eval_every: usize,
    pub out: PathBuf,
    pub phi_gap: Option<f64>,
    // baseline knobs
    pub eta: f64,
    pub kappa_pow3: f64,
    pub msa_inner: usize,
    pub batch_c: f64,
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub algo: Option<String>,
    pub profile: Option<String>,
    pub budget: Option<u64>,
    pub out: Option<PathBuf>,
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("key {key}: cannot parse {v:?}"))),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("key {key}: cannot parse {v:?}"))),
        }
    }
}

pub fn load(path: &Path, ov: Overrides) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut f = Fields { map: parse_kv(&text)? };

    let problem_kind = f.take("problem").unwrap_or_else(|| "quadratic".into());
    let problem = match problem_kind.as_str() {
        "quadratic" => {
            let regime = f.take("regime").unwrap_or_else(|| "online".into());
            let finite_sum = match regime.as_str() {
                "online" => None,
                "finite-sum" => Some(f.parse("n", 100usize)?),
                other => return Err(ConfigError(format!("unknown regime {other:?}"))),
            };
            ProblemConfig::Quadratic {
                d1: f.parse("d1", 10)?,
                d2: f.parse("d2", 10)?,
                kappa: f.parse("kappa", 5.0)?,
                l: f.parse("l", 1.0)?,
                sigma: f.parse("sigma", 0.1)?,
                finite_sum,
                x0_scale: f.parse("x0_scale", 1.0)?,
            }
        }
        "dro" => ProblemConfig::Dro {
            dataset: PathBuf::from(
                f.take("dataset")
                    .ok_or_else(|| ConfigError("dro problems need dataset = PATH".into()))?,
            ),
            minority_count: f.parse_opt("minority_count")?,
            majority_ratio: f.parse("majority_ratio", 4)?,
            minority_positive: f.parse("minority_positive", true)?,
            reg_weight: f.parse("reg_weight", 10.0)?,
            declared_l: f.parse_opt("dro_l")?,
            declared_sigma: f.parse("dro_sigma", 1.0)?,
            x0_scale: f.parse("x0_scale", 0.0)?,
        },
        other => return Err(ConfigError(format!("unknown problem {other:?}"))),
    };

    let algo_file = f.take("algo");
    let algo_s = ov.algo.or(algo_file).unwrap_or_else(|| "zo-vrgda".into());
    let profile_file = f.take("profile");
    let profile_s = ov.profile.or(profile_file).unwrap_or_else(|| "practical".into());
    let seed_file = f.parse("seed", 42u64)?;
    let budget_file = f.parse("budget", 10_000_000u64)?;
    let out_file = f.take("out");

    let cfg = ExperimentConfig {
        problem,
        algo: Algo::parse(&algo_s)?,
        profile: ProfileKind::parse(&profile_s)?,
        eps: f.parse("eps", 0.1)?,
        seed: ov.seed.unwrap_or(seed_file),
        query_budget: ov.budget.unwrap_or(budget_file),
        eval_every: f.parse("eval_every", 1usize)?,
        out: ov
            .out
            .unwrap_or_else(|| PathBuf::from(out_file.unwrap_or_else(|| "trace.csv".into()))),
        phi_gap: f.parse_opt("phi_gap")?,
        eta: f.parse("eta", 0.01)?,
        kappa_pow3: f.parse("kappa_pow3", 10.0)?,
        msa_inner: f.parse("msa_inner", 10usize)?,
        batch_c: f.parse("batch_c", 0.1)?,
    };

    if let Some(key) = f.map.keys().next() {
        return Err(ConfigError(format!("unknown config key {key:?}")));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(ConfigError("eps must lie in (0, 1)".into()));
    }
    if cfg.query_budget == 0 {
        return Err(ConfigError("budget must be > 0".into()));
    }
    Ok(cfg)
}
