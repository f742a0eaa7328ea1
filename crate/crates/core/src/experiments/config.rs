//! Experiment configuration: JSON schema, `key=value` overrides, and
//! validation with precise error messages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::linalg::StepKernel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// One noisy ensemble at a single size and noise cell.
    Ensemble,
    /// Final infidelity against system size, with a log-log slope fit.
    ScalingSweep,
    /// Final infidelity over a (Γ_z, c_z) grid.
    NoiseContour,
    /// Noiseless generalized-purity traces per size.
    PurityTrace,
    /// Ensemble run reported through the analytic-bound audit.
    BoundsAudit,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::ScalingSweep => "scaling_sweep",
            ExperimentKind::NoiseContour => "noise_contour",
            ExperimentKind::PurityTrace => "purity_trace",
            ExperimentKind::BoundsAudit => "bounds_audit",
        }
    }
}

/// On-site interaction rule: the size-scaled choice U = 2Δ/j, or a fixed
/// value shared by every size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionRule {
    Scaled,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub delta: f64,
    #[serde(default = "default_interaction")]
    pub interaction: InteractionRule,
    /// Sizes 2j to simulate. Single-cell experiments use exactly one entry.
    pub two_j: Vec<i64>,
}

fn default_interaction() -> InteractionRule {
    InteractionRule::Scaled
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Coherence-preserving transformation (local-control field).
    ScsToScs,
    /// Generic transformation (random spectral field).
    ScsToNonScs,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::ScsToScs => "scs_to_scs",
            TaskKind::ScsToNonScs => "scs_to_non_scs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    /// Random spectral field with i.i.d. Uniform[0,1) mode coefficients.
    Random {
        seed: u64,
        #[serde(default = "default_n_modes")]
        n_modes: usize,
    },
    /// Greedy coherence-preserving field designed once at `design_two_j`
    /// and reused across sizes.
    LocalControl {
        #[serde(default = "default_design_two_j")]
        design_two_j: i64,
        /// Amplitude bound; defaults to 4Δ.
        #[serde(default)]
        u_max: Option<f64>,
    },
    /// Field loaded from a two-column text file.
    File { path: PathBuf },
}

fn default_n_modes() -> usize {
    200
}

fn default_design_two_j() -> i64 {
    20
}

/// Noise settings: lists so grid experiments can sweep both axes. Scalar
/// experiments require singleton lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub gamma_z: Vec<f64>,
    pub c_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment kind; may be omitted when the CLI subcommand names it.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub model: ModelConfig,
    pub task: TaskKind,
    pub field: FieldSource,
    pub noise: NoiseConfig,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// Order-unity constant in the tolerable-noise threshold.
    #[serde(default = "default_c_order")]
    pub c_order: f64,
    #[serde(default)]
    pub kernel: StepKernel,
    /// Polar angle of the initial spin-coherent state.
    #[serde(default)]
    pub initial_theta: f64,
    #[serde(default)]
    pub initial_phi: f64,
    /// Output directory (created if missing).
    pub output: PathBuf,
}

fn default_realizations() -> usize {
    100
}
fn default_t_final() -> f64 {
    10.0
}
fn default_n_steps() -> usize {
    10_000
}
fn default_stride() -> usize {
    100
}
fn default_master_seed() -> u64 {
    1
}
fn default_c_order() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// Structural validation shared by every experiment, then per-kind
    /// constraints.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if let Some(k) = self.experiment {
            if k != kind {
                return fail(format!(
                    "config names experiment '{}' but '{}' was requested",
                    k.as_str(),
                    kind.as_str()
                ));
            }
        }
        if self.model.two_j.is_empty() {
            return fail("model.two_j must be a nonempty list".into());
        }
        for &tj in &self.model.two_j {
            if tj < 1 {
                return fail(format!("model.two_j entries must be >= 1, got {tj}"));
            }
        }
        if !(self.model.delta.is_finite()) {
            return fail(format!("model.delta must be finite, got {}", self.model.delta));
        }
        if let InteractionRule::Fixed(u) = self.model.interaction {
            if !u.is_finite() {
                return fail(format!("model.interaction fixed value must be finite, got {u}"));
            }
        }
        if self.noise.gamma_z.is_empty() || self.noise.c_z.is_empty() {
            return fail("noise.gamma_z and noise.c_z must be nonempty lists".into());
        }
        for &g in &self.noise.gamma_z {
            if !(g.is_finite() && g >= 0.0) {
                return fail(format!("noise.gamma_z entries must be >= 0, got {g}"));
            }
        }
        for &c in &self.noise.c_z {
            if !(c.is_finite() && c >= 0.0) {
                return fail(format!("noise.c_z entries must be >= 0, got {c}"));
            }
        }
        if self.realizations == 0 {
            return fail("realizations must be >= 1".into());
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return fail(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.n_steps == 0 {
            return fail("n_steps must be >= 1".into());
        }
        if self.snapshot_stride == 0 {
            return fail("snapshot_stride must be >= 1".into());
        }
        if !(self.c_order.is_finite() && self.c_order > 0.0) {
            return fail(format!("c_order must be positive, got {}", self.c_order));
        }
        match &self.field {
            FieldSource::Random { n_modes, .. } => {
                if *n_modes == 0 {
                    return fail("field.n_modes must be >= 1".into());
                }
                if self.task == TaskKind::ScsToScs {
                    return fail(
                        "task scs_to_scs needs a coherence-preserving field \
                         (field.kind local_control or file)"
                            .into(),
                    );
                }
            }
            FieldSource::LocalControl { design_two_j, u_max } => {
                if *design_two_j < 1 {
                    return fail(format!(
                        "field.design_two_j must be >= 1, got {design_two_j}"
                    ));
                }
                if let Some(u) = u_max {
                    if !(u.is_finite() && *u > 0.0) {
                        return fail(format!("field.u_max must be positive, got {u}"));
                    }
                }
                if self.task == TaskKind::ScsToNonScs {
                    return fail(
                        "task scs_to_non_scs needs a generic field (field.kind random or file)"
                            .into(),
                    );
                }
            }
            FieldSource::File { path } => {
                if path.as_os_str().is_empty() {
                    return fail("field.path must not be empty".into());
                }
            }
        }
        match kind {
            ExperimentKind::Ensemble | ExperimentKind::BoundsAudit => {
                if self.model.two_j.len() != 1 {
                    return fail(format!(
                        "{} requires exactly one model.two_j entry, got {}",
                        kind.as_str(),
                        self.model.two_j.len()
                    ));
                }
                if self.noise.gamma_z.len() != 1 || self.noise.c_z.len() != 1 {
                    return fail(format!(
                        "{} requires singleton noise lists",
                        kind.as_str()
                    ));
                }
            }
            ExperimentKind::ScalingSweep => {
                if self.model.two_j.len() < 2 {
                    return fail("scaling_sweep needs at least two sizes in model.two_j".into());
                }
                if self.noise.gamma_z.len() != 1 || self.noise.c_z.len() != 1 {
                    return fail("scaling_sweep requires singleton noise lists".into());
                }
            }
            ExperimentKind::NoiseContour => {
                if self.model.two_j.len() != 1 {
                    return fail("noise_contour requires exactly one model.two_j entry".into());
                }
                if self.noise.gamma_z.len() < 2 || self.noise.c_z.len() < 2 {
                    return fail("noise_contour needs at least a 2x2 noise grid".into());
                }
                let sorted = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
                if !sorted(&self.noise.gamma_z) || !sorted(&self.noise.c_z) {
                    return fail("noise grids must be strictly increasing".into());
                }
            }
            ExperimentKind::PurityTrace => {}
        }
        Ok(())
    }

    /// Resolves the amplitude bound of a local-control field.
    pub fn u_max_resolved(&self) -> f64 {
        match &self.field {
            FieldSource::LocalControl { u_max: Some(u), .. } => *u,
            _ => 4.0 * self.model.delta,
        }
    }
}

/// Reads a config file into a JSON value (key order normalized).
pub fn load_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))
}

/// Applies one `key=value` override. Keys are dot-separated paths into the
/// JSON document; values are parsed as JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{spec}' must have the form key=value"))
    })?;
    let parsed: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override '{key}': '{}' is not an object", parts[..i].join(".")))
        })?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("override paths are nonempty");
}

/// Final deserialization of the (possibly overridden) JSON document.
pub fn config_from_value(doc: Value) -> Result<ExperimentConfig> {
    serde_json::from_value(doc).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_doc() -> Value {
        serde_json::json!({
            "model": { "delta": 15.0, "two_j": [20] },
            "task": "scs_to_non_scs",
            "field": { "kind": "random", "seed": 7 },
            "noise": { "gamma_z": [0.0], "c_z": [1e-6] },
            "output": "out/test"
        })
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = config_from_value(base_doc()).unwrap();
        assert_eq!(cfg.realizations, 100);
        assert_eq!(cfg.n_steps, 10_000);
        assert_eq!(cfg.master_seed, 1);
        assert!(matches!(cfg.model.interaction, InteractionRule::Scaled));
        cfg.validate(ExperimentKind::Ensemble).unwrap();
    }

    #[test]
    fn rejects_unknown_fields() {
        let mut doc = base_doc();
        doc.as_object_mut().unwrap().insert("typo_field".into(), Value::Bool(true));
        assert!(config_from_value(doc).is_err());
    }

    #[test]
    fn overrides_navigate_paths() {
        let mut doc = base_doc();
        apply_override(&mut doc, "realizations=25").unwrap();
        apply_override(&mut doc, "noise.c_z=[2e-6]").unwrap();
        apply_override(&mut doc, "model.two_j=[10,20]").unwrap();
        let cfg = config_from_value(doc).unwrap();
        assert_eq!(cfg.realizations, 25);
        assert_eq!(cfg.noise.c_z, vec![2e-6]);
        assert_eq!(cfg.model.two_j, vec![10, 20]);
        assert!(apply_override(&mut base_doc(), "no-equals-sign").is_err());
    }

    #[test]
    fn validation_messages_name_the_problem() {
        let mut doc = base_doc();
        apply_override(&mut doc, "noise.c_z=[]").unwrap();
        let cfg = config_from_value(doc).unwrap();
        let err = cfg.validate(ExperimentKind::Ensemble).unwrap_err();
        assert!(err.to_string().contains("nonempty"));

        let mut doc = base_doc();
        apply_override(&mut doc, "task=\"scs_to_scs\"").unwrap();
        let cfg = config_from_value(doc).unwrap();
        let err = cfg.validate(ExperimentKind::Ensemble).unwrap_err();
        assert!(err.to_string().contains("coherence-preserving"));

        let mut doc = base_doc();
        apply_override(&mut doc, "experiment=\"noise_contour\"").unwrap();
        let cfg = config_from_value(doc).unwrap();
        assert!(cfg.validate(ExperimentKind::Ensemble).is_err());
    }
}
