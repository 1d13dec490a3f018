//! Argument groups shared by the command line and the JSON config file.
//!
//! Every field is optional in both places. A config file supplies a base
//! value per section; any flag given on the command line replaces it; the
//! remaining gaps fall back to the defaults in [`crate::commands`].

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hamiltonian {
    Effective,
    GaugeAnalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeState {
    /// `|↓⟩`
    Ground,
    /// `|↑⟩`
    Excited,
    /// `(|↑⟩ + |↓⟩)/√2`
    Plus,
    /// `(|↑⟩ − |↓⟩)/√2`
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Fast,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "delta")]
    #[value(name = "delta")]
    Delta,
    #[serde(rename = "N")]
    #[value(name = "N", alias = "n")]
    N,
    #[serde(rename = "g")]
    #[value(name = "g")]
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationPreset {
    /// All constants 1.
    Unit,
    /// Constants solved from the reference operating point.
    Reference,
}

/// Flags accepted by every subcommand (before or after its name).
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub hamiltonian: Option<Hamiltonian>,
    /// Coupling strength.
    #[arg(long)]
    pub g: Option<f64>,
    /// Detuning Δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Interaction time (per electron for `simulate`/`sweep`).
    #[arg(long, visible_alias = "tau-t")]
    #[serde(alias = "tau_t")]
    pub t: Option<f64>,
    /// Fock cutoff; the system space holds 0..=cutoff photons.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Initial system state as a Fock basis index.
    #[arg(long, conflicts_with = "amplitudes")]
    pub fock: Option<usize>,
    /// Initial system state as real amplitudes, comma separated, normalized.
    #[arg(long, value_delimiter = ',')]
    pub amplitudes: Option<Vec<f64>>,
    /// Initial probe state (`qnd-check`).
    #[arg(long, value_enum)]
    pub probe: Option<ProbeState>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolArgs {
    #[arg(long, value_enum)]
    pub branch: Option<Branch>,
    /// Number of probe electrons N.
    #[arg(long)]
    pub electrons: Option<u64>,
    /// Monte-Carlo trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Interferometer bias phase (radians).
    #[arg(long = "bias")]
    #[serde(alias = "bias")]
    pub bias_phase: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: Option<SweepParam>,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignArgs {
    /// Relative backaction target.
    #[arg(long)]
    pub eps_ba: Option<f64>,
    /// Relative error target.
    #[arg(long)]
    pub eps_err: Option<f64>,
    /// Shortest admissible pulse duration.
    #[arg(long)]
    pub tau_p_min: Option<f64>,
    #[arg(long)]
    pub gamma_min: Option<f64>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub delta_min: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub electrons_min: Option<f64>,
    #[arg(long)]
    pub electrons_max: Option<f64>,
    /// Grid points per axis and refinement stage.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub calibration: Option<CalibrationPreset>,
    /// Anchor: δn_ba/⟨n⟩ at the reference design.
    #[arg(long)]
    pub ba_ratio: Option<f64>,
    /// Anchor: δn_err at the reference design.
    #[arg(long)]
    pub err: Option<f64>,
    /// Anchor: n_max at the reference design.
    #[arg(long)]
    pub n_max: Option<f64>,
    #[arg(long)]
    pub c_ba: Option<f64>,
    #[arg(long)]
    pub c_err: Option<f64>,
    #[arg(long)]
    pub c_phi: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyArgs {
    #[arg(long)]
    pub n_min: Option<f64>,
    #[arg(long)]
    pub n_max: Option<f64>,
    /// Resolution δn_err.
    #[arg(long)]
    pub err: Option<f64>,
}

/// Top level of the JSON config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub model: Value,
    #[serde(default)]
    pub protocol: Value,
    #[serde(default)]
    pub sweep: Value,
    #[serde(default)]
    pub design: Value,
    #[serde(default)]
    pub entropy: Value,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("malformed config {}: {e}", path.display())))
    }
}

/// `base` with every non-null field of `flags` written over it.
pub fn overlay<T: Serialize + DeserializeOwned>(section: &str, base: &Value, flags: &T) -> Result<T, CliError> {
    let mut merged = match base {
        Value::Null => Value::Object(Default::default()),
        Value::Object(_) => base.clone(),
        _ => return Err(CliError::Validation(format!("config section `{section}` must be an object"))),
    };
    let Value::Object(over) = serde_json::to_value(flags).expect("argument groups serialize") else {
        unreachable!("argument groups are structs")
    };
    let target = merged.as_object_mut().expect("checked above");
    for (k, v) in over {
        if !v.is_null() {
            target.insert(k, v);
        }
    }
    serde_json::from_value(merged).map_err(|e| CliError::Validation(format!("config section `{section}`: {e}")))
}
