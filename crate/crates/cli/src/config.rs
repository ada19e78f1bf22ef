//! Run configuration: one JSON document, every block optional, unknown keys
//! rejected. The schema lives in `config.schema.json` at the repository root.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub forcing: ForcingConfig,
    pub integrator: IntegratorConfig,
    pub initial: InitialConfig,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub simulate: SimulateConfig,
    pub couple: CoupleConfig,
    pub reduce_check: ReduceCheckConfig,
    pub girsanov_check: GirsanovConfig,
    pub diagnostics: DiagnosticsConfig,
    pub partition: PartitionConfig,
    pub mixing: MixingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            forcing: ForcingConfig::default(),
            integrator: IntegratorConfig::default(),
            initial: InitialConfig::default(),
            master_seed: 0,
            output_dir: PathBuf::from("vortmix-out"),
            simulate: SimulateConfig::default(),
            couple: CoupleConfig::default(),
            reduce_check: ReduceCheckConfig::default(),
            girsanov_check: GirsanovConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            partition: PartitionConfig::default(),
            mixing: MixingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub kmax: usize,
    /// Forced modes are those with `|k|² <= n_force`.
    pub n_force: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { kmax: 8, n_force: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    /// Total injection rate `R`, split evenly over the forced modes.
    pub r: f64,
    /// Optional `k1 k2 gamma` lines overriding single modes.
    pub gamma_file: Option<PathBuf>,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self { r: 1.0, gamma_file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Zero,
    /// Gaussian coefficients rescaled to `‖ω‖ = norm`.
    Gaussian,
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub norm: f64,
    pub snapshot: Option<PathBuf>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: InitialKind::Zero,
            norm: 1.0,
            snapshot: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Steps between trajectory rows; 0 records at integer times.
    pub record_every: usize,
    /// Time between snapshots; unset writes the final state only.
    pub snapshot_interval: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Second field drawn independently of the first.
    Full,
    /// Second field differs from the first in the high modes only.
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleConfig {
    /// Horizon; the integrator horizon when unset.
    pub t_end: Option<f64>,
    pub initial_norm: f64,
    pub perturbation: Perturbation,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        Self {
            t_end: None,
            initial_norm: 2.0,
            perturbation: Perturbation::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceCheckConfig {
    pub t_end: f64,
    pub splits: usize,
    pub configurations: usize,
    pub l0_norm: f64,
    pub strides: Vec<usize>,
}

impl Default for ReduceCheckConfig {
    fn default() -> Self {
        Self {
            t_end: 2.0,
            splits: 50,
            configurations: 10,
            l0_norm: 1.0,
            strides: vec![1, 2, 4, 8, 16],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GirsanovConfig {
    pub paths: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Cap on the drift norm; unset disables clipping.
    pub clip: Option<f64>,
}

impl Default for GirsanovConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            t_end: 0.5,
            dt: 1e-2,
            clip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub members: usize,
    /// Integer horizon; the integrator horizon when unset.
    pub t_end: Option<f64>,
    /// Times at which the exponential moment is checked.
    pub moment_times: Vec<usize>,
    /// Tail levels in units of `R`.
    pub tail_levels: Vec<f64>,
    pub tail_window: (usize, usize),
    pub betas: Vec<f64>,
    pub min_hits: usize,
    pub resamples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            members: 1000,
            t_end: Some(4.0),
            moment_times: vec![1, 2, 4],
            tail_levels: vec![4.0, 8.0, 16.0],
            tail_window: (1, 4),
            betas: (0..=24).map(|i| 0.25 * i as f64).collect(),
            min_hits: 10,
            resamples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub t_block: usize,
    pub beta: f64,
    pub beta_prime: f64,
    /// Scale of the partition of unity; the forcing rate when unset.
    pub r: Option<f64>,
    /// Inline class vector; when neither this nor a file is given the classes
    /// are read off a simulated trajectory.
    pub kvector: Option<Vec<u32>>,
    pub kvector_file: Option<PathBuf>,
    /// Exhaustive gluing scan over windows of length `2T` with classes
    /// `0..=scan_max_class`; 0 disables it.
    pub scan_max_class: u32,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            t_block: 2,
            beta: 10.0,
            beta_prime: 2.0,
            r: None,
            kvector: None,
            kvector_file: None,
            scan_max_class: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingConfig {
    pub burn_in: f64,
    pub gap: f64,
    pub n_samples: usize,
    /// Independent stationary runs compared against each other.
    pub runs: usize,
    pub batches: usize,
    /// Autocovariance lags in units of `gap`.
    pub lags: Vec<usize>,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            burn_in: 20.0,
            gap: 1.0,
            n_samples: 500,
            runs: 2,
            batches: 20,
            lags: (0..=8).collect(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("{field}: {why}")));
        if !(self.forcing.r > 0.0 && self.forcing.r.is_finite()) {
            return bad("forcing.r", "must be positive");
        }
        if !(self.integrator.dt > 0.0) {
            return bad("integrator.dt", "must be positive");
        }
        if vortmix_core::integrator::steps_per_unit(self.integrator.dt).is_err() {
            return bad("integrator.dt", "1/dt must be an integer");
        }
        if vortmix_core::integrator::step_count(self.integrator.t_end, self.integrator.dt).is_err() {
            return bad("integrator.t_end", "must be a non-negative multiple of dt");
        }
        if self.initial.kind == InitialKind::Snapshot && self.initial.snapshot.is_none() {
            return bad("initial.snapshot", "required when initial.kind is snapshot");
        }
        if !(self.initial.norm >= 0.0) {
            return bad("initial.norm", "must be non-negative");
        }
        if let Some(iv) = self.simulate.snapshot_interval {
            if vortmix_core::integrator::step_count(iv, self.integrator.dt).map_or(true, |n| n == 0) {
                return bad("simulate.snapshot_interval", "must be a positive multiple of dt");
            }
        }
        if vortmix_core::integrator::steps_per_unit(self.girsanov_check.dt).is_err() {
            return bad("girsanov_check.dt", "1/dt must be an integer");
        }
        let d = &self.diagnostics;
        let horizon = d.t_end.unwrap_or(self.integrator.t_end);
        if horizon.fract() != 0.0 || horizon < 1.0 {
            return bad("diagnostics.t_end", "must be a positive integer");
        }
        if d.moment_times.iter().any(|&t| t as f64 > horizon) {
            return bad("diagnostics.moment_times", "beyond the horizon");
        }
        let (a, b) = d.tail_window;
        if !(a >= 1 && b > a && (b - 1) as f64 <= horizon) {
            return bad("diagnostics.tail_window", "need 1 <= t < t' <= horizon + 1");
        }
        if d.members == 0 {
            return bad("diagnostics.members", "must be at least 1");
        }
        let p = &self.partition;
        if p.t_block == 0 {
            return bad("partition.t_block", "must be at least 1");
        }
        if !(p.beta_prime > 0.0 && p.beta_prime < p.beta) {
            return bad("partition.beta_prime", "need 0 < beta_prime < beta");
        }
        if p.kvector.is_some() && p.kvector_file.is_some() {
            return bad("partition.kvector", "give either kvector or kvector_file");
        }
        let m = &self.mixing;
        if m.runs == 0 {
            return bad("mixing.runs", "must be at least 1");
        }
        if vortmix_core::integrator::step_count(m.gap, self.integrator.dt).map_or(true, |n| n == 0) {
            return bad("mixing.gap", "must be a positive multiple of integrator.dt");
        }
        if vortmix_core::integrator::step_count(m.burn_in, self.integrator.dt).is_err() {
            return bad("mixing.burn_in", "must be a non-negative multiple of integrator.dt");
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `key=value` lines for every field, keys joined with dots.
    pub fn flatten(&self) -> Vec<(String, String)> {
        fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
            match v {
                serde_json::Value::Object(map) => {
                    for (k, v) in map {
                        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&key, v, out);
                    }
                }
                serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
                other => out.push((prefix.to_string(), other.to_string())),
            }
        }
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = Vec::new();
        walk("", &value, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"grid": {"kmax": 4, "nforce": 2}}"#).unwrap_err();
        assert!(err.to_string().contains("nforce"), "{err}");
        assert!(RunConfig::from_json(r#"{"typo": 1}"#).is_err());
    }

    #[test]
    fn misaligned_dt_names_the_field() {
        let err = RunConfig::from_json(r#"{"integrator": {"dt": 0.3, "t_end": 0.0}}"#).unwrap_err();
        assert!(err.to_string().contains("integrator.dt"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.master_seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert!(a.flatten().iter().any(|(k, v)| k == "grid.kmax" && v == "8"));
    }
}
