//! Analytic bounds on transformation time and purity loss, and the
//! tolerable-noise conditions, with audit reports for simulation runs.

use crate::dynamics::{ControlField, NoiseSpec};
use crate::metrics::QuasiDistanceResult;

/// Trapezoid integral of `f(u_k)` over the field grid.
fn trapezoid(field: &ControlField, f: impl Fn(f64) -> f64) -> f64 {
    let s = field.samples();
    let dt = field.dt();
    let mut acc = 0.0;
    for k in 0..field.n_steps() {
        acc += 0.5 * (f(s[k]) + f(s[k + 1])) * dt;
    }
    acc
}

/// Average control amplitude `ū = (1/T) ∫ |u(t)| dt` (trapezoid rule).
pub fn average_amplitude(field: &ControlField) -> f64 {
    trapezoid(field, f64::abs) / field.t_final()
}

/// Average dephasing rate `Γ̄ = Γ + c (1/T) ∫ u(t)² dt`.
pub fn average_dephasing(field: &ControlField, noise: &NoiseSpec) -> f64 {
    noise.gamma_static + noise.c_rel * trapezoid(field, |u| u * u) / field.t_final()
}

/// Pointwise arithmetic–geometric-mean inequality of the noise model,
/// `Γ(t) >= 2 |u(t)| sqrt(Γ c)`, checked on every grid point.
pub fn noise_model_pointwise_holds(field: &ControlField, noise: &NoiseSpec) -> bool {
    let root = (noise.gamma_static * noise.c_rel).sqrt();
    field.samples().iter().all(|&u| {
        let lhs = noise.rate_at(u);
        let rhs = 2.0 * u.abs() * root;
        lhs >= rhs - 1e-12 * rhs.abs().max(1.0)
    })
}

/// Minimum transformation time `T >= ‖Δr‖² / (2 Σ_k ū_k |Λ_k|)`.
///
/// Returns infinity when every channel has zero weight but the states
/// differ (the bound is then vacuous in the other direction).
pub fn min_time_bound(qd: &QuasiDistanceResult, u_bars: &[f64], lambdas: &[f64]) -> f64 {
    assert_eq!(u_bars.len(), lambdas.len(), "one Λ per channel");
    let denom: f64 = u_bars.iter().zip(lambdas.iter()).map(|(u, l)| u * l.abs()).sum();
    let num = qd.norm * qd.norm;
    if denom > 0.0 {
        num / (2.0 * denom)
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Purity-loss lower bound
/// `ΔP >= 2 ‖Δr‖² Σ_k Γ̄_k min_t Δ_{X_k}[ψ(t)] / Σ_k ū_k |Λ_k|`.
///
/// `min_variances[k]` is the minimum of the variance of `X_k` along a
/// supplied noiseless trajectory.
pub fn purity_loss_lower_bound(
    qd: &QuasiDistanceResult,
    u_bars: &[f64],
    gamma_bars: &[f64],
    min_variances: &[f64],
    lambdas: &[f64],
) -> f64 {
    assert_eq!(u_bars.len(), lambdas.len());
    assert_eq!(gamma_bars.len(), min_variances.len());
    let denom: f64 = u_bars.iter().zip(lambdas.iter()).map(|(u, l)| u * l.abs()).sum();
    let num: f64 = gamma_bars.iter().zip(min_variances.iter()).map(|(g, v)| g * v).sum();
    if denom > 0.0 {
        2.0 * qd.norm * qd.norm * num / denom
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Right-hand side of the tolerable-noise condition,
/// `ΔP / (2 c ‖Δr‖² N)`.
pub fn noise_threshold(delta_p: f64, delta_r_norm: f64, n_size: f64, c_order: f64) -> f64 {
    delta_p / (2.0 * c_order * delta_r_norm * delta_r_norm * n_size)
}

/// Tolerable-noise condition: `Σ Γ̄_k / Σ ū_k <= ΔP / (2 c ‖Δr‖² N)`.
pub fn noise_condition(
    delta_p: f64,
    delta_r_norm: f64,
    n_size: f64,
    c_order: f64,
    noise_ratio: f64,
) -> bool {
    noise_ratio <= noise_threshold(delta_p, delta_r_norm, n_size, c_order)
}

/// Necessary controllability condition:
/// `min_k sqrt(Γ_k c_k) <= ΔP / (2 c ‖Δr‖² N)`.
pub fn controllability_condition(
    noise: &NoiseSpec,
    delta_p: f64,
    delta_r_norm: f64,
    n_size: f64,
    c_order: f64,
) -> bool {
    let lhs = (noise.gamma_static * noise.c_rel).sqrt();
    lhs <= noise_threshold(delta_p, delta_r_norm, n_size, c_order)
}

/// Evaluation of every bound against one simulated run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    /// Minimum-time bound on T.
    pub t_min: f64,
    /// Actual transformation time.
    pub t_actual: f64,
    /// Purity-loss lower bound.
    pub purity_loss_lb: f64,
    /// Measured purity loss ΔP.
    pub delta_p: f64,
    /// Quasi-distance ‖Δr‖ between initial and target states.
    pub delta_r_norm: f64,
    /// Relative noise strength Σ Γ̄_k / Σ ū_k.
    pub noise_ratio: f64,
    /// Tolerable-noise upper bound on the ratio.
    pub noise_ratio_ub: f64,
    /// `T >= t_min`.
    pub time_bound_ok: bool,
    /// `ΔP >= 0.9 × purity_loss_lb` (slack for the dropped first-order
    /// correction term in the derivation).
    pub purity_bound_ok: bool,
    /// Tolerable-noise inequality.
    pub noise_condition_ok: bool,
    /// Necessary controllability condition.
    pub controllability_ok: bool,
    /// Pointwise noise-model inequality on the grid.
    pub noise_model_pointwise_ok: bool,
    /// ΔP ≪ 1 premise of the noise conditions.
    pub small_loss_premise: bool,
    /// ‖Δr‖ ≪ 1 premise of the noise conditions.
    pub small_distance_premise: bool,
    /// Whether the trajectory kept a generic (order N²) variance, the
    /// premise under which the order-unity constant applies.
    pub generic_variance_premise: bool,
}

/// Inputs for a single-channel bound audit.
pub struct AuditInputs<'a> {
    pub qd: &'a QuasiDistanceResult,
    pub field: &'a ControlField,
    pub noise: &'a NoiseSpec,
    /// Largest |eigenvalue| of the control operator (2j for X = 2 Jz).
    pub lambda: f64,
    /// System size N = 2j.
    pub n_size: f64,
    /// Minimum variance of X along the noiseless trajectory.
    pub min_variance: f64,
    /// Maximum variance of X along the noiseless trajectory.
    pub max_variance: f64,
    /// Measured purity loss at final time.
    pub delta_p: f64,
    /// Order-unity constant of the generic-variance estimate.
    pub c_order: f64,
}

/// Evaluates every inequality for a single-channel run.
pub fn audit(inputs: &AuditInputs<'_>) -> BoundReport {
    let u_bar = average_amplitude(inputs.field);
    let gamma_bar = average_dephasing(inputs.field, inputs.noise);
    let t_min = min_time_bound(inputs.qd, &[u_bar], &[inputs.lambda]);
    let lb = purity_loss_lower_bound(
        inputs.qd,
        &[u_bar],
        &[gamma_bar],
        &[inputs.min_variance],
        &[inputs.lambda],
    );
    let noise_ratio = if u_bar > 0.0 { gamma_bar / u_bar } else { f64::INFINITY };
    let threshold =
        noise_threshold(inputs.delta_p, inputs.qd.norm, inputs.n_size, inputs.c_order);
    let t = inputs.field.t_final();
    BoundReport {
        t_min,
        t_actual: t,
        purity_loss_lb: lb,
        delta_p: inputs.delta_p,
        delta_r_norm: inputs.qd.norm,
        noise_ratio,
        noise_ratio_ub: threshold,
        time_bound_ok: t >= t_min,
        purity_bound_ok: inputs.delta_p >= 0.9 * lb,
        noise_condition_ok: noise_condition(
            inputs.delta_p,
            inputs.qd.norm,
            inputs.n_size,
            inputs.c_order,
            noise_ratio,
        ),
        controllability_ok: controllability_condition(
            inputs.noise,
            inputs.delta_p,
            inputs.qd.norm,
            inputs.n_size,
            inputs.c_order,
        ),
        noise_model_pointwise_ok: noise_model_pointwise_holds(inputs.field, inputs.noise),
        small_loss_premise: inputs.delta_p < 0.1,
        small_distance_premise: inputs.qd.norm < 0.5,
        generic_variance_premise: inputs.max_variance
            >= 0.1 * inputs.n_size * inputs.n_size,
    }
}
