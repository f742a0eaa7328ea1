//! Control-field generation: the random spectral field used for hard
//! (coherence-breaking) tasks, and a greedy local strategy that holds the
//! state close to a spin-coherent state for easy tasks. Targets are defined
//! by noiseless propagation of the chosen field.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::algebra::{ModelParams, QuantumState, SpinRep};
use crate::dynamics::{
    propagate_deterministic, ControlField, HamiltonianCache, PropagateOptions,
};
use crate::linalg::UnitaryStepper;
use crate::{Error, Result};

/// Gaussian window `exp(-(5t/T)²)` applied to the random field.
pub fn gaussian_envelope(t: f64, t_final: f64) -> f64 {
    let x = 5.0 * t / t_final;
    (-x * x).exp()
}

/// Random spectral control field
/// `u(t) = exp(-(5t/T)²) Σ_{k=1}^{n_modes} a_k sin(k π t / T)`,
/// with i.i.d. coefficients `a_k ~ Uniform[0, 1)` drawn from the seed.
pub fn random_field(t_final: f64, n_modes: usize, n_steps: usize, seed: u64) -> Result<ControlField> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..n_modes).map(|_| rng.random::<f64>()).collect();
    field_from_modes(t_final, n_steps, &coeffs)
}

/// Deterministic variant of [`random_field`] with explicit coefficients.
pub fn field_from_modes(t_final: f64, n_steps: usize, coeffs: &[f64]) -> Result<ControlField> {
    ControlField::from_fn(t_final, n_steps, |t| {
        let phase = std::f64::consts::PI * t / t_final;
        let sum: f64 =
            coeffs.iter().enumerate().map(|(k, a)| a * ((k as f64 + 1.0) * phase).sin()).sum();
        gaussian_envelope(t, t_final) * sum
    })
}

/// The target state of a field-defined task: the final snapshot of the
/// noiseless propagation of `psi_i` under `field`.
pub fn make_target(
    psi_i: &QuantumState,
    field: &ControlField,
    rep: &SpinRep,
    params: &ModelParams,
) -> Result<QuantumState> {
    let opts = PropagateOptions { snapshot_stride: field.n_steps(), ..Default::default() };
    let traj = propagate_deterministic(psi_i, field, rep, params, &opts)?;
    Ok(traj.states.last().expect("trajectory has a final snapshot").clone())
}

/// Result of the local control search.
#[derive(Debug, Clone)]
pub struct LocalControlOutcome {
    pub field: ControlField,
    /// Smallest generalized purity along the noiseless trajectory.
    pub min_generalized_purity: f64,
    /// Whether the trajectory kept generalized purity >= 0.9 throughout.
    /// A miss is a soft-target diagnostic, not an error.
    pub floor_met: bool,
}

/// Number of candidate amplitudes scanned per step (uniform grid over
/// [-u_max, u_max], zero included).
const LOCAL_CONTROL_CANDIDATES_PER_SIDE: usize = 20;

/// Greedy uncertainty-suppressing control: at every step the amplitude is
/// chosen from a fixed candidate grid to minimize the one-step-ahead total
/// uncertainty, ties broken toward smaller |u| (and toward the positive
/// candidate at equal |u|).
///
/// The returned field keeps the noiseless trajectory close to a
/// spin-coherent state; how close is reported through
/// [`LocalControlOutcome::min_generalized_purity`] (checked at the snapshot
/// stride of [`PropagateOptions::default`]).
pub fn local_scs_control(
    psi_i: &QuantumState,
    rep: &SpinRep,
    params: &ModelParams,
    t_final: f64,
    n_steps: usize,
    u_max: f64,
) -> Result<LocalControlOutcome> {
    if !(u_max.is_finite() && u_max > 0.0) {
        return Err(Error::InvalidArgument(format!("u_max must be positive, got {u_max}")));
    }
    if psi_i.dim() != rep.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs representation dimension {}",
            psi_i.dim(),
            rep.dim()
        )));
    }
    let dt = t_final / n_steps as f64;
    let n = rep.dim();
    let step_size = u_max / LOCAL_CONTROL_CANDIDATES_PER_SIDE as f64;
    // 0, +h, -h, +2h, -2h, ...: scan order implements the tie-break.
    let mut candidates = vec![0.0];
    for k in 1..=LOCAL_CONTROL_CANDIDATES_PER_SIDE {
        candidates.push(k as f64 * step_size);
        candidates.push(-(k as f64) * step_size);
    }

    let mut cache = HamiltonianCache::new(rep, params)?;
    let mut stepper = UnitaryStepper::new(crate::linalg::StepKernel::Auto, n);
    let mut psi: Vec<Complex64> = psi_i.amplitudes().to_vec();
    let mut trial = psi.clone();
    let mut best_state = psi.clone();
    let mut samples = Vec::with_capacity(n_steps + 1);

    let stride = PropagateOptions::default().snapshot_stride;
    let mut min_gp = gp_of(&psi, rep);

    for step in 0..n_steps {
        let mut best_u = 0.0;
        let mut best_cost = f64::INFINITY;
        for &u in &candidates {
            trial.copy_from_slice(&psi);
            let h = cache.at(u);
            stepper.apply(h, dt, &mut trial)?;
            let cost = uncertainty_of(&trial, rep);
            if cost < best_cost {
                best_cost = cost;
                best_u = u;
                best_state.copy_from_slice(&trial);
            }
        }
        samples.push(best_u);
        psi.copy_from_slice(&best_state);
        let next = step + 1;
        if next % stride == 0 || next == n_steps {
            min_gp = min_gp.min(gp_of(&psi, rep));
        }
    }
    // Hold the last chosen value on the closing grid point.
    samples.push(*samples.last().unwrap_or(&0.0));
    let field = ControlField::new(t_final, n_steps, samples)?;
    Ok(LocalControlOutcome { field, min_generalized_purity: min_gp, floor_met: min_gp >= 0.9 })
}

fn moments_of(psi: &[Complex64], rep: &SpinRep) -> crate::algebra::JMoments {
    let state = QuantumState::new(ndarray::Array1::from_vec(psi.to_vec()))
        .expect("unitary steps preserve the norm");
    rep.j_moments(&state)
}

fn uncertainty_of(psi: &[Complex64], rep: &SpinRep) -> f64 {
    let m = moments_of(psi, rep);
    (0..3).map(|k| m.second[k] - m.mean[k] * m.mean[k]).sum()
}

fn gp_of(psi: &[Complex64], rep: &SpinRep) -> f64 {
    let j = rep.j();
    let m = moments_of(psi, rep);
    m.mean.iter().map(|v| v * v).sum::<f64>() / (j * j)
}

/// Metadata stored in the header of a serialized field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldMeta {
    pub generator: String,
    pub seed: Option<u64>,
    pub params: String,
}

/// Writes a field as two-column text `t u` with a `#`-prefixed header
/// recording the grid and generator.
pub fn save_field(path: &Path, field: &ControlField, meta: &FieldMeta) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# generator: {}", meta.generator).unwrap();
    writeln!(out, "# t_final: {:.17e}", field.t_final()).unwrap();
    writeln!(out, "# n_steps: {}", field.n_steps()).unwrap();
    match meta.seed {
        Some(s) => writeln!(out, "# seed: {s}").unwrap(),
        None => writeln!(out, "# seed: none").unwrap(),
    }
    writeln!(out, "# params: {}", meta.params).unwrap();
    let dt = field.dt();
    for (k, u) in field.samples().iter().enumerate() {
        writeln!(out, "{:.17e} {:.17e}", k as f64 * dt, u).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a field written by [`save_field`].
pub fn load_field(path: &Path) -> Result<(ControlField, FieldMeta)> {
    let text = std::fs::read_to_string(path)?;
    let mut meta = FieldMeta::default();
    let mut t_final = None;
    let mut n_steps = None;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "generator" => meta.generator = value.to_string(),
                    "t_final" => {
                        t_final = Some(value.parse::<f64>().map_err(|e| {
                            Error::Config(format!("bad t_final in field header: {e}"))
                        })?)
                    }
                    "n_steps" => {
                        n_steps = Some(value.parse::<usize>().map_err(|e| {
                            Error::Config(format!("bad n_steps in field header: {e}"))
                        })?)
                    }
                    "seed" => {
                        meta.seed =
                            if value == "none" { None } else { Some(value.parse().map_err(|e| {
                                Error::Config(format!("bad seed in field header: {e}"))
                            })?) }
                    }
                    "params" => meta.params = value.to_string(),
                    _ => {}
                }
            }
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(_t), Some(u)) = (cols.next(), cols.next()) else {
            return Err(Error::Config(format!(
                "field line {} must have two columns",
                lineno + 1
            )));
        };
        samples.push(
            u.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad amplitude on line {}: {e}", lineno + 1)))?,
        );
    }
    let t_final =
        t_final.ok_or_else(|| Error::Config("field file missing t_final header".into()))?;
    let n_steps =
        n_steps.ok_or_else(|| Error::Config("field file missing n_steps header".into()))?;
    let field = ControlField::new(t_final, n_steps, samples)?;
    Ok((field, meta))
}
