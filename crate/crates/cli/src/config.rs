//! Lab configuration: `[alpha]`, `[ce]` and `[experiment]` sections.
//!
//! Rationals are strings such as `"3/8"` or `"1/2^10"`; floats are rejected.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use condmeasure::alpha::{GeneratorParams, GeneratorSpec, ParamValue, Specker};
use condmeasure::dyadic::{BitString, Dyadic};
use condmeasure::CeInstance;

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    alpha: toml::Table,
    ce: RawCe,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCe {
    #[serde(default)]
    members: Vec<[u64; 2]>,
    nonmember: u64,
    horizon: u64,
    #[serde(default = "default_scheme")]
    scheme: String,
}

fn default_scheme() -> String {
    "paired".into()
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    seed: Option<u64>,
    max_depth: Option<usize>,
    eps: Option<String>,
    trials: Option<usize>,
    beta: Option<String>,
    beta_prefix: Option<String>,
    beta_tail: Option<String>,
    sample_count: Option<usize>,
    batch_max_members: Option<usize>,
    batch_max_time: Option<u64>,
    batch_horizon: Option<u64>,
}

/// How `β` prefixes are produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BetaSource {
    Explicit { bits: BitString, tail: Option<bool> },
    Sampled,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub seed: u64,
    pub max_depth: usize,
    pub eps: Dyadic,
    pub trials: usize,
    pub beta: BetaSource,
    pub sample_count: usize,
    pub batch_max_members: usize,
    pub batch_max_time: u64,
    pub batch_horizon: u64,
}

#[derive(Debug, Clone)]
pub struct LabConfig {
    pub alpha: GeneratorSpec,
    pub ce: CeInstance,
    pub paired: bool,
    pub experiment: Experiment,
}

impl LabConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Self::parse(DEFAULT_CONFIG).context("built-in configuration"),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let members: Vec<(u64, u64)> = raw.ce.members.iter().map(|p| (p[0], p[1])).collect();
        let ce = CeInstance::new(members.iter().copied(), raw.ce.nonmember, raw.ce.horizon)
            .map_err(|e| anyhow!("[ce]: {e}"))?;
        let paired = match raw.ce.scheme.as_str() {
            "paired" => true,
            "plain" => false,
            other => bail!("[ce] scheme must be \"paired\" or \"plain\", got {other:?}"),
        };
        let alpha = alpha_spec(raw.alpha, &members)?;
        let experiment = experiment(raw.experiment)?;
        Ok(LabConfig {
            alpha,
            ce,
            paired,
            experiment,
        })
    }
}

fn dyadic(key: &str, s: &str) -> Result<Dyadic> {
    s.parse().map_err(|e| anyhow!("`{key}`: {e}"))
}

fn alpha_spec(mut table: toml::Table, ce_members: &[(u64, u64)]) -> Result<GeneratorSpec> {
    let kind = match table.remove("kind") {
        Some(toml::Value::String(s)) => s,
        Some(other) => bail!("[alpha] kind must be a string, got {other}"),
        None => bail!("[alpha] needs a `kind`"),
    };
    let mut params = GeneratorParams::new();
    for (key, value) in table {
        let v = param_value(&key, value).with_context(|| format!("[alpha] key `{key}`"))?;
        params.insert(&key, v);
    }
    if kind == Specker::NAME && !params_has(&params, "members") {
        params.insert("members", ParamValue::Pairs(ce_members.to_vec()));
    }
    Ok(GeneratorSpec { kind, params })
}

fn params_has(params: &GeneratorParams, key: &str) -> bool {
    params.clone().take_pairs(key).is_ok()
}

fn param_value(key: &str, value: toml::Value) -> Result<ParamValue> {
    match value {
        toml::Value::String(s) => Ok(ParamValue::Dyadic(dyadic(key, &s)?)),
        toml::Value::Array(items) => {
            if items.iter().all(|v| v.is_str()) {
                let list = items
                    .iter()
                    .map(|v| dyadic(key, v.as_str().expect("checked")))
                    .collect::<Result<_>>()?;
                Ok(ParamValue::DyadicList(list))
            } else {
                let pairs = items
                    .iter()
                    .map(|v| {
                        let pair = v.as_array().filter(|a| a.len() == 2);
                        let ints =
                            pair.and_then(|a| Some((a[0].as_integer()?, a[1].as_integer()?)));
                        match ints {
                            Some((n, t)) if n >= 0 && t >= 0 => Ok((n as u64, t as u64)),
                            _ => bail!("expected [n, t] pairs of nonnegative integers"),
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok(ParamValue::Pairs(pairs))
            }
        }
        toml::Value::Float(_) => bail!("floats are not allowed; write rationals as \"p/2^k\""),
        other => bail!("unsupported value {other}"),
    }
}

fn experiment(raw: RawExperiment) -> Result<Experiment> {
    let eps = dyadic("eps", raw.eps.as_deref().unwrap_or("1/2^20"))?;
    if eps <= Dyadic::zero() {
        bail!("[experiment] eps must be positive");
    }
    let beta = match raw.beta.as_deref().unwrap_or("explicit") {
        "explicit" => {
            let bits = raw
                .beta_prefix
                .as_deref()
                .unwrap_or("")
                .parse()
                .map_err(|e| anyhow!("[experiment] beta_prefix: {e}"))?;
            let tail = match raw.beta_tail.as_deref().unwrap_or("0") {
                "0" => Some(false),
                "1" => Some(true),
                "none" => None,
                other => {
                    bail!("[experiment] beta_tail must be \"0\", \"1\" or \"none\", got {other:?}")
                }
            };
            BetaSource::Explicit { bits, tail }
        }
        "sampled" => {
            if raw.beta_prefix.is_some() || raw.beta_tail.is_some() {
                bail!("[experiment] beta_prefix/beta_tail only apply to beta = \"explicit\"");
            }
            BetaSource::Sampled
        }
        other => bail!("[experiment] beta must be \"explicit\" or \"sampled\", got {other:?}"),
    };
    Ok(Experiment {
        seed: raw.seed.unwrap_or(42),
        max_depth: raw.max_depth.unwrap_or(16),
        eps,
        trials: raw.trials.unwrap_or(200),
        beta,
        sample_count: raw.sample_count.unwrap_or(10),
        batch_max_members: raw.batch_max_members.unwrap_or(16),
        batch_max_time: raw.batch_max_time.unwrap_or(20),
        batch_horizon: raw.batch_horizon.unwrap_or(24),
    })
}
