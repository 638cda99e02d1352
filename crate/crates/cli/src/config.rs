//! Subcommand parameter blocks.
//!
//! Every field is optional so one struct serves as the clap flag set, the
//! `--config` document and, once defaults are filled in, the resolved config
//! embedded in outputs. Flags override config keys.

use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Forward,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Forward,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Annealed,
    Quenched,
}

/// Lattice coordinates given on the command line as `x1,x2,...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i32>);

impl FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|c| c.trim().parse::<i32>().map_err(|e| format!("bad coordinate \"{c}\": {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Site)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Simulate on [-L, L]^d.
    #[arg(long)]
    pub box_radius: Option<i32>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Initially infected vertices as `x1,x2,..;y1,y2,..`. Defaults to the origin.
    #[arg(long, value_delimiter = ';')]
    pub start: Option<Vec<Site>>,
    #[arg(long)]
    pub env_seed: Option<u64>,
    #[arg(long)]
    pub max_active: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct ZetaArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub box_radius: Option<i32>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct PathsArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Path length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Environments for the open-path count.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// If given, also run the second-moment bound on infection paths.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub fields: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct WalksArgs {
    #[arg(long = "d", value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub replicas: Option<u64>,
    /// With `--lambda`, also estimate the truncated moment and the bound.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub moment_horizons: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct MeanfieldArgs {
    /// The product lambda * d * p.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct SelfdualArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub box_radius: Option<i32>,
}

/// Options shared by the survival-threshold subcommands.
#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct EstimatorArgs {
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub box_radius: Option<i32>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub max_active: Option<usize>,
    #[arg(long)]
    pub extra_starts: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub env_seed: Option<u64>,
    #[arg(long)]
    pub lambda_lo: Option<f64>,
    /// Without it the upper end is found by doubling.
    #[arg(long)]
    pub lambda_hi: Option<f64>,
    #[arg(long)]
    pub max_doublings: Option<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub env_seed: Option<u64>,
    /// Also report survival at twice the horizon.
    #[arg(long)]
    pub long_horizon: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Empirical collision constant for the upper-bound column.
    #[arg(long)]
    pub c_hat: Option<f64>,
    #[arg(long)]
    pub lower_factor: Option<f64>,
    #[arg(long)]
    pub max_doublings: Option<u32>,
    #[arg(long)]
    pub long_horizon: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
}

fn strip_nulls(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

/// Config keys a parameter block accepts: the ids of its flags.
fn known_keys<T: Args>() -> Vec<String> {
    T::augment_args(clap::Command::new("keys"))
        .get_arguments()
        .map(|a| a.get_id().to_string())
        .collect()
}

/// Overlay `flags` on `config` and rebuild the parameter block. Keys that
/// the block does not know are rejected.
pub fn merge<T: Args + Serialize + DeserializeOwned>(
    flags: &T,
    config: &Map<String, Value>,
) -> Result<T, CliError> {
    let mut merged = config.clone();
    merged.remove("master_seed");
    let known = known_keys::<T>();
    if let Some(bad) = merged.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Config(format!("unknown config key \"{bad}\"")));
    }
    for (k, v) in strip_nulls(serde_json::to_value(flags).expect("serializable")) {
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(format!("malformed config: {e}")))
}

/// The value of a required field, or an error naming its flag.
pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::MissingFlag(flag.to_string()))
}
