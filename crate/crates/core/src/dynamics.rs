//! Time evolution under the driven dimer Hamiltonian, with and without
//! control noise.
//!
//! All propagation happens on a uniform grid over [0, T] with the control
//! field held piecewise constant on each step. Pure-state steps apply the
//! exact step unitary `exp(-i H(t_k) dt)` (see [`StepKernel`]); noisy
//! realizations add an independent Gaussian increment to the control
//! amplitude each step, which converges to the dephasing master equation
//! with rate `Γ(t) = Γ + c u(t)²` on the control operator `X = 2 Jz`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::algebra::{ModelParams, QuantumState, SpinRep};
use crate::linalg::{SymTridiag, UnitaryStepper};
pub use crate::linalg::StepKernel;
use crate::{Error, Result};

/// A real control amplitude sampled on a uniform grid over [0, T]:
/// `samples[k]` is the value at `t_k = k T / n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    t_final: f64,
    n_steps: usize,
    samples: Vec<f64>,
}

impl ControlField {
    pub fn new(t_final: f64, n_steps: usize, samples: Vec<f64>) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!("t_final must be positive, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if samples.len() != n_steps + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                n_steps + 1,
                samples.len()
            )));
        }
        if samples.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidArgument("field samples must be finite".into()));
        }
        Ok(Self { t_final, n_steps, samples })
    }

    /// Field built by evaluating `f(t)` on the grid.
    pub fn from_fn(t_final: f64, n_steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dt = t_final / n_steps as f64;
        let samples = (0..=n_steps).map(|k| f(k as f64 * dt)).collect();
        Self::new(t_final, n_steps, samples)
    }

    pub fn constant(t_final: f64, n_steps: usize, value: f64) -> Result<Self> {
        Self::new(t_final, n_steps, vec![value; n_steps + 1])
    }

    pub fn zero(t_final: f64, n_steps: usize) -> Result<Self> {
        Self::constant(t_final, n_steps, 0.0)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// Largest |u| on the grid.
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, u| m.max(u.abs()))
    }
}

/// Dephasing-noise model on one control channel: static rate plus a
/// relative part proportional to the squared control amplitude,
/// `Γ(t) = Γ + c u(t)²`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub gamma_static: f64,
    pub c_rel: f64,
}

impl NoiseSpec {
    pub fn new(gamma_static: f64, c_rel: f64) -> Result<Self> {
        if !(gamma_static.is_finite() && gamma_static >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma_static must be nonnegative, got {gamma_static}"
            )));
        }
        if !(c_rel.is_finite() && c_rel >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "c_rel must be nonnegative, got {c_rel}"
            )));
        }
        Ok(Self { gamma_static, c_rel })
    }

    pub fn none() -> Self {
        Self { gamma_static: 0.0, c_rel: 0.0 }
    }

    /// Instantaneous dephasing rate at control amplitude `u`.
    pub fn rate_at(&self, u: f64) -> f64 {
        self.gamma_static + self.c_rel * u * u
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_static == 0.0 && self.c_rel == 0.0
    }
}

/// Hermitian, unit-trace density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Array2<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace (1e-10 each). Positivity is
    /// checked separately by [`DensityMatrix::validate_full`].
    pub fn new(matrix: Array2<Complex64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut herm_err = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                herm_err = herm_err.max((matrix[[i, j]] - matrix[[j, i]].conj()).norm());
            }
        }
        if !(herm_err <= 1e-10) {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (max deviation {herm_err:.3e})"
            )));
        }
        let trace: Complex64 = (0..n).map(|i| matrix[[i, i]]).sum();
        if !((trace.re - 1.0).abs() <= 1e-10 && trace.im.abs() <= 1e-10) {
            return Err(Error::InvalidState(format!("density matrix trace {trace} is not 1")));
        }
        Ok(Self { matrix })
    }

    /// Projector onto a pure state.
    pub fn pure(psi: &QuantumState) -> Self {
        let n = psi.dim();
        let a = psi.amplitudes();
        let mut m = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = a[i] * a[j].conj();
            }
        }
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.matrix[[i, i]]).sum()
    }

    /// Full invariant check including positivity (min eigenvalue >= -1e-8).
    pub fn validate_full(&self) -> Result<()> {
        let min = crate::linalg::hermitian_min_eigenvalue(&self.matrix)?;
        if min < -1e-8 {
            return Err(Error::InvalidState(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// Pure-state snapshots on a subset of the time grid.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub states: Vec<QuantumState>,
}

/// Density-matrix snapshots on a subset of the time grid.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub states: Vec<DensityMatrix>,
}

/// Options shared by the pure-state propagators.
#[derive(Debug, Clone, Copy)]
pub struct PropagateOptions {
    pub kernel: StepKernel,
    /// Snapshots are stored every `snapshot_stride` steps plus the final step.
    pub snapshot_stride: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { kernel: StepKernel::Auto, snapshot_stride: 100 }
    }
}

impl PropagateOptions {
    pub fn with_stride(stride: usize) -> Self {
        Self { snapshot_stride: stride, ..Self::default() }
    }
}

fn snapshot_at(step: usize, n_steps: usize, stride: usize) -> bool {
    let stride = stride.max(1);
    step % stride == 0 || step == n_steps
}

/// Control Hamiltonian `H0 + 2 u Jz` at control amplitude `u`.
pub fn hamiltonian_at(rep: &SpinRep, params: &ModelParams, u: f64) -> Result<Array2<Complex64>> {
    if params.two_j != rep.two_j() {
        return Err(Error::DimensionMismatch(format!(
            "params built for two_j={}, representation has two_j={}",
            params.two_j,
            rep.two_j()
        )));
    }
    if !u.is_finite() {
        return Err(Error::InvalidArgument(format!("control amplitude must be finite, got {u}")));
    }
    let mut tri = crate::algebra::drift_tridiag(params, rep);
    for i in 0..rep.dim() {
        tri.diag[i] += 2.0 * u * rep.jz_diag[i];
    }
    Ok(tri.to_dense_complex())
}

/// Reusable per-step Hamiltonian carrier for the tridiagonal structure
/// `H(u) = H0 + 2u Jz`.
pub(crate) struct HamiltonianCache {
    base_diag: Vec<f64>,
    two_m: Vec<f64>,
    tri: SymTridiag,
}

impl HamiltonianCache {
    pub fn new(rep: &SpinRep, params: &ModelParams) -> Result<Self> {
        if params.two_j != rep.two_j() {
            return Err(Error::DimensionMismatch(format!(
                "params built for two_j={}, representation has two_j={}",
                params.two_j,
                rep.two_j()
            )));
        }
        let tri = crate::algebra::drift_tridiag(params, rep);
        let base_diag = tri.diag.clone();
        let two_m = rep.jz_diag.iter().map(|m| 2.0 * m).collect();
        Ok(Self { base_diag, two_m, tri })
    }

    /// Updates and returns the tridiagonal Hamiltonian at amplitude `u`.
    pub fn at(&mut self, u: f64) -> &SymTridiag {
        for i in 0..self.base_diag.len() {
            self.tri.diag[i] = self.base_diag[i] + u * self.two_m[i];
        }
        &self.tri
    }
}

/// Core stepping loop shared by the deterministic and stochastic propagators.
/// `amps[k]` is the effective control amplitude on step k; the observer is
/// called at every grid point (including both endpoints) with the current
/// state.
pub(crate) fn propagate_observed(
    psi0: &QuantumState,
    field: &ControlField,
    rep: &SpinRep,
    params: &ModelParams,
    amps: &[f64],
    opts: &PropagateOptions,
    mut observer: impl FnMut(usize, f64, &[Complex64]),
) -> Result<StateTrajectory> {
    if psi0.dim() != rep.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs representation dimension {}",
            psi0.dim(),
            rep.dim()
        )));
    }
    let n_steps = field.n_steps();
    assert_eq!(amps.len(), n_steps, "one amplitude per step");
    let dt = field.dt();
    let mut cache = HamiltonianCache::new(rep, params)?;
    let mut stepper = UnitaryStepper::new(opts.kernel, rep.dim());

    let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
    let mut times = Vec::new();
    let mut steps = Vec::new();
    let mut states = Vec::new();

    let mut record = |step: usize, psi: &[Complex64]| -> Result<()> {
        if snapshot_at(step, n_steps, opts.snapshot_stride) {
            let arr = Array1::from_vec(psi.to_vec());
            times.push(step as f64 * dt);
            steps.push(step);
            states.push(QuantumState::new(arr)?);
        }
        Ok(())
    };

    observer(0, 0.0, &psi);
    record(0, &psi)?;
    for k in 0..n_steps {
        let h = cache.at(amps[k]);
        stepper.apply(h, dt, &mut psi)?;
        if psi.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at step {}", k + 1)));
        }
        observer(k + 1, (k + 1) as f64 * dt, &psi);
        record(k + 1, &psi)?;
    }
    Ok(StateTrajectory { times, steps, states })
}

/// Noiseless propagation under the piecewise-constant control field.
///
/// Each step applies the exact unitary `exp(-i H(t_k) dt)`, so the norm is
/// preserved to machine accuracy over the whole run.
pub fn propagate_deterministic(
    psi0: &QuantumState,
    field: &ControlField,
    rep: &SpinRep,
    params: &ModelParams,
    opts: &PropagateOptions,
) -> Result<StateTrajectory> {
    let amps = &field.samples()[..field.n_steps()];
    propagate_observed(psi0, field, rep, params, amps, opts, |_, _, _| {})
}

/// Per-step Gaussian noise increments for one realization.
///
/// `xi[k]` is drawn independently with mean zero and variance
/// `2 Γ(t_k) / dt`, `Γ(t_k) = Γ + c u(t_k)²` evaluated from the designed
/// (noiseless) field. Reproducible from the seed.
pub fn sample_noise_increments(field: &ControlField, noise: &NoiseSpec, seed: u64) -> Vec<f64> {
    let dt = field.dt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..field.n_steps())
        .map(|k| {
            let sigma = (2.0 * noise.rate_at(field.samples()[k]) / dt).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            z * sigma
        })
        .collect()
}

/// One stochastic realization: the effective amplitude on step k is
/// `u(t_k) + xi[k]`, applied inside an exact unitary step.
pub fn propagate_realization(
    psi0: &QuantumState,
    field: &ControlField,
    noise: &NoiseSpec,
    rep: &SpinRep,
    params: &ModelParams,
    seed: u64,
    opts: &PropagateOptions,
) -> Result<StateTrajectory> {
    let xi = sample_noise_increments(field, noise, seed);
    let amps: Vec<f64> =
        field.samples()[..field.n_steps()].iter().zip(xi.iter()).map(|(u, x)| u + x).collect();
    propagate_observed(psi0, field, rep, params, &amps, opts, |_, _, _| {})
}

/// Derives the seed of realization `index` from the master seed
/// (SplitMix64 of `master + (index+1)·golden`), so the first L realizations
/// are independent of the total count.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Options for the master-equation integrator.
#[derive(Debug, Clone, Copy)]
pub struct LindbladOptions {
    /// RK4 substeps per grid step; `None` picks the number automatically from
    /// the spectral scale so that `scale · h <= z_target`.
    pub substeps: Option<usize>,
    pub z_target: f64,
    pub snapshot_stride: usize,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self { substeps: None, z_target: 0.05, snapshot_stride: 100 }
    }
}

impl LindbladOptions {
    /// One RK4 step per grid step (no refinement).
    pub fn same_grid() -> Self {
        Self { substeps: Some(1), ..Self::default() }
    }
}

/// Integrates the dephasing master equation
/// `dρ/dt = -i[H0 + u X, ρ] - Γ(t) [X, [X, ρ]]` with `X = 2 Jz`
/// by classical fourth-order Runge-Kutta on the field grid.
///
/// The trace is a diagnostic: drift beyond 1e-6 aborts with an error rather
/// than being renormalized away. Hermiticity is restored by symmetrization
/// after every step.
pub fn propagate_lindblad(
    rho0: &DensityMatrix,
    field: &ControlField,
    noise: &NoiseSpec,
    rep: &SpinRep,
    params: &ModelParams,
    opts: &LindbladOptions,
) -> Result<DensityTrajectory> {
    if rho0.dim() != rep.dim() {
        return Err(Error::DimensionMismatch(format!(
            "density matrix dimension {} vs representation dimension {}",
            rho0.dim(),
            rep.dim()
        )));
    }
    let n = rep.dim();
    let n_steps = field.n_steps();
    let dt = field.dt();
    let mut cache = HamiltonianCache::new(rep, params)?;
    let x_diag: Vec<f64> = rep.jz_diag.iter().map(|m| 2.0 * m).collect();
    let x_spread = if n > 1 { x_diag[0] - x_diag[n - 1] } else { 0.0 };

    let mut engine = LindbladEngine::new(n);
    let mut rho: Vec<Complex64> = rho0.matrix().iter().copied().collect();

    let mut times = Vec::new();
    let mut steps = Vec::new();
    let mut states = Vec::new();
    let mut record = |step: usize, rho: &[Complex64]| -> Result<()> {
        if snapshot_at(step, n_steps, opts.snapshot_stride) {
            let m = Array2::from_shape_vec((n, n), rho.to_vec())
                .expect("row-major density buffer");
            times.push(step as f64 * dt);
            steps.push(step);
            states.push(DensityMatrix::new(m)?);
        }
        Ok(())
    };
    record(0, &rho)?;

    for k in 0..n_steps {
        let u = field.samples()[k];
        let gamma = noise.rate_at(u);
        let h = cache.at(u);
        let n_sub = match opts.substeps {
            Some(s) => s.max(1),
            None => {
                let (lo, hi) = h.spectral_bounds();
                let scale = (hi - lo) + gamma * x_spread * x_spread;
                ((scale * dt / opts.z_target).ceil() as usize).max(1)
            }
        };
        let hsub = dt / n_sub as f64;
        for _ in 0..n_sub {
            engine.rk4_step(h, &x_diag, gamma, hsub, &mut rho);
        }
        // Symmetrize and check the trace diagnostic once per grid step.
        engine.hermitize(&mut rho);
        let trace: Complex64 = (0..n).map(|i| rho[i * n + i]).sum();
        let drift = (trace.re - 1.0).abs().max(trace.im.abs());
        if !drift.is_finite() || drift > 1e-6 {
            return Err(Error::Numerical(format!(
                "master-equation trace drift {drift:.3e} at step {} (dt too large for the \
                 spectral scale); refine the grid or the substep count",
                k + 1
            )));
        }
        record(k + 1, &rho)?;
    }
    Ok(DensityTrajectory { times, steps, states })
}

/// Scratch buffers and the RK4 kernel for the master equation.
struct LindbladEngine {
    n: usize,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl LindbladEngine {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::default(); n * n];
        Self { n, k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// `out = -i (H rho - rho H) - gamma * W ∘ rho`, with
    /// `W_ij = (x_i - x_j)²` for the diagonal control operator.
    fn rhs(
        &self,
        h: &SymTridiag,
        x: &[f64],
        gamma: f64,
        rho: &[Complex64],
        out: &mut [Complex64],
    ) {
        let n = self.n;
        let d = &h.diag;
        let e = &h.off;
        for i in 0..n {
            let row = i * n;
            for j in 0..n {
                // (H rho)_ij over the tridiagonal band of H.
                let mut hr = rho[row + j] * d[i];
                if i > 0 {
                    hr += rho[row - n + j] * e[i - 1];
                }
                if i + 1 < n {
                    hr += rho[row + n + j] * e[i];
                }
                // (rho H)_ij = sum_k rho_ik H_kj.
                let mut rh = rho[row + j] * d[j];
                if j > 0 {
                    rh += rho[row + j - 1] * e[j - 1];
                }
                if j + 1 < n {
                    rh += rho[row + j + 1] * e[j];
                }
                let comm = hr - rh;
                let w = x[i] - x[j];
                out[row + j] = Complex64::new(comm.im, -comm.re) - rho[row + j] * (gamma * w * w);
            }
        }
    }

    fn rk4_step(&mut self, h: &SymTridiag, x: &[f64], gamma: f64, dt: f64, rho: &mut [Complex64]) {
        let n2 = self.n * self.n;
        let mut k1 = std::mem::take(&mut self.k1);
        let mut k2 = std::mem::take(&mut self.k2);
        let mut k3 = std::mem::take(&mut self.k3);
        let mut k4 = std::mem::take(&mut self.k4);
        let mut tmp = std::mem::take(&mut self.tmp);

        self.rhs(h, x, gamma, rho, &mut k1);
        for i in 0..n2 {
            tmp[i] = rho[i] + k1[i] * (0.5 * dt);
        }
        self.rhs(h, x, gamma, &tmp, &mut k2);
        for i in 0..n2 {
            tmp[i] = rho[i] + k2[i] * (0.5 * dt);
        }
        self.rhs(h, x, gamma, &tmp, &mut k3);
        for i in 0..n2 {
            tmp[i] = rho[i] + k3[i] * dt;
        }
        self.rhs(h, x, gamma, &tmp, &mut k4);
        let w = dt / 6.0;
        for i in 0..n2 {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }

        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.k4 = k4;
        self.tmp = tmp;
    }

    fn hermitize(&self, rho: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            rho[i * n + i] = Complex64::new(rho[i * n + i].re, 0.0);
            for j in 0..i {
                let a = rho[i * n + j];
                let b = rho[j * n + i];
                let avg = (a + b.conj()) * 0.5;
                rho[i * n + j] = avg;
                rho[j * n + i] = avg.conj();
            }
        }
    }
}

/// Snapshot-wise average of the pure-state projectors, accumulated in input
/// order.
pub fn ensemble_average(trajectories: &[StateTrajectory]) -> Result<DensityTrajectory> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InvalidArgument("ensemble average of zero trajectories".into()))?;
    let n_snap = first.steps.len();
    let dim = first.states.first().map(|s| s.dim()).unwrap_or(0);
    for t in trajectories {
        if t.steps != first.steps {
            return Err(Error::DimensionMismatch("trajectories on different grids".into()));
        }
        if t.states.iter().any(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch("trajectories of different dimension".into()));
        }
    }
    let weight = 1.0 / trajectories.len() as f64;
    let mut states = Vec::with_capacity(n_snap);
    for snap in 0..n_snap {
        let mut acc = Array2::<Complex64>::zeros((dim, dim));
        for t in trajectories {
            let a = t.states[snap].amplitudes();
            for i in 0..dim {
                let ai = a[i];
                for j in 0..dim {
                    acc[[i, j]] += ai * a[j].conj();
                }
            }
        }
        acc.mapv_inplace(|v| v * weight);
        states.push(DensityMatrix::new(acc)?);
    }
    Ok(DensityTrajectory { times: first.times.clone(), steps: first.steps.clone(), states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_drift, scs_state};
    use crate::linalg::{max_abs_diff, trace_distance};
    use crate::metrics;

    fn spin_rep(two_j: i64) -> (SpinRep, ModelParams) {
        let rep = SpinRep::new(two_j).unwrap();
        let params = ModelParams::size_scaled(15.0, two_j).unwrap();
        (rep, params)
    }

    #[test]
    fn hamiltonian_at_zero_control_is_drift() {
        let (rep, params) = spin_rep(8);
        let h0 = build_drift(&params, &rep).unwrap();
        let h = hamiltonian_at(&rep, &params, 0.0).unwrap();
        assert_eq!(max_abs_diff(&h, &h0), 0.0);
    }

    #[test]
    fn hamiltonian_at_pure_control_is_diagonal() {
        let rep = SpinRep::new(6).unwrap();
        let params = ModelParams::new(0.0, 0.0, 6).unwrap();
        let h = hamiltonian_at(&rep, &params, 1.0).unwrap();
        for i in 0..rep.dim() {
            let m = rep.j() - i as f64;
            assert!((h[[i, i]].re - 2.0 * m).abs() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_at_spin_half_example() {
        let rep = SpinRep::new(1).unwrap();
        let params = ModelParams::new(15.0, 0.0, 1).unwrap();
        let h = hamiltonian_at(&rep, &params, 5.0).unwrap();
        assert!((h[[0, 0]].re - 5.0).abs() < 1e-14);
        assert!((h[[1, 1]].re + 5.0).abs() < 1e-14);
        assert!((h[[0, 1]].re + 15.0).abs() < 1e-14);
        assert!((h[[1, 0]].re + 15.0).abs() < 1e-14);
    }

    #[test]
    fn stationary_state_acquires_only_a_phase() {
        let (rep, params) = spin_rep(6);
        let tri = crate::algebra::drift_tridiag(&params, &rep);
        let (vals, vecs) = tri.eig().unwrap();
        let mode = 2;
        let psi0 = QuantumState::new(
            (0..rep.dim()).map(|k| Complex64::new(vecs[[k, mode]], 0.0)).collect(),
        )
        .unwrap();
        let t_final = 1.0;
        let field = ControlField::zero(t_final, 1000).unwrap();
        let traj = propagate_deterministic(&psi0, &field, &rep, &params, &PropagateOptions::default())
            .unwrap();
        let last = traj.states.last().unwrap();
        let ov = psi0.overlap(last);
        assert!((ov.norm() - 1.0).abs() < 1e-10);
        let expect = Complex64::from_polar(1.0, -vals[mode] * t_final);
        assert!((ov - expect).norm() < 1e-9);
    }

    #[test]
    fn spin_half_rabi_oscillation() {
        // H = 2 u0 Jz; |<psi(t)|psi(0)>|² = cos²(u0 t) for psi0 = (1,1)/√2.
        let rep = SpinRep::new(1).unwrap();
        let params = ModelParams::new(0.0, 0.0, 1).unwrap();
        let u0 = 0.9;
        let field = ControlField::constant(2.0, 2000, u0).unwrap();
        let psi0 = QuantumState::from_unnormalized(
            Array1::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]),
        )
        .unwrap();
        let opts = PropagateOptions { kernel: StepKernel::Eigen, snapshot_stride: 200 };
        let traj = propagate_deterministic(&psi0, &field, &rep, &params, &opts).unwrap();
        for (t, s) in traj.times.iter().zip(traj.states.iter()) {
            let expect = (u0 * t).cos().powi(2);
            assert!((psi0.overlap_sqr(s) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_increments_statistics() {
        let field = ControlField::zero(10.0, 10_000).unwrap();
        let noise = NoiseSpec::new(0.01, 0.0).unwrap();
        // Concatenate 10 sampled realizations for 1e5 draws.
        let mut xs = Vec::new();
        for seed in 0..10u64 {
            xs.extend(sample_noise_increments(&field, &noise, seed));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        // Var = 2Γ/dt = 20; 3σ bounds for mean and variance of 1e5 draws.
        let sigma_mean = (20.0f64 / n).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
        let sigma_var = 20.0 * (2.0 / (n - 1.0)).sqrt();
        assert!((var - 20.0).abs() < 3.0 * sigma_var, "variance {var}");
    }

    #[test]
    fn zero_noise_vector_is_exactly_zero() {
        let field = ControlField::constant(1.0, 100, 2.0).unwrap();
        let xi = sample_noise_increments(&field, &NoiseSpec::none(), 3);
        assert!(xi.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn realization_reduces_to_deterministic_without_noise() {
        let (rep, params) = spin_rep(10);
        let psi0 = scs_state(&rep, 0.0, 0.0);
        let field = ControlField::from_fn(2.0, 500, |t| (3.0 * t).sin()).unwrap();
        let opts = PropagateOptions::with_stride(50);
        let det = propagate_deterministic(&psi0, &field, &rep, &params, &opts).unwrap();
        let real =
            propagate_realization(&psi0, &field, &NoiseSpec::none(), &rep, &params, 9, &opts)
                .unwrap();
        for (a, b) in det.states.iter().zip(real.states.iter()) {
            assert_eq!(a.amplitudes(), b.amplitudes());
        }
    }

    #[test]
    fn relative_noise_on_zero_field_is_inert() {
        // Γ(t) = c u² vanishes on a zero field, so the trajectory matches the
        // deterministic one bitwise.
        let (rep, params) = spin_rep(40);
        let psi0 = scs_state(&rep, 0.4, 0.2);
        let field = ControlField::zero(1.0, 300).unwrap();
        let noise = NoiseSpec::new(0.0, 0.5).unwrap();
        let opts = PropagateOptions::with_stride(30);
        let det = propagate_deterministic(&psi0, &field, &rep, &params, &opts).unwrap();
        let real = propagate_realization(&psi0, &field, &noise, &rep, &params, 4, &opts).unwrap();
        for (a, b) in det.states.iter().zip(real.states.iter()) {
            assert_eq!(a.amplitudes(), b.amplitudes());
        }
    }

    #[test]
    fn same_seed_reproduces_trajectory() {
        let (rep, params) = spin_rep(12);
        let psi0 = scs_state(&rep, 0.0, 0.0);
        let field = ControlField::from_fn(1.0, 400, |t| 2.0 * (5.0 * t).cos()).unwrap();
        let noise = NoiseSpec::new(1e-3, 1e-3).unwrap();
        let opts = PropagateOptions::with_stride(40);
        let a = propagate_realization(&psi0, &field, &noise, &rep, &params, 77, &opts).unwrap();
        let b = propagate_realization(&psi0, &field, &noise, &rep, &params, 77, &opts).unwrap();
        for (x, y) in a.states.iter().zip(b.states.iter()) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
        let c = propagate_realization(&psi0, &field, &noise, &rep, &params, 78, &opts).unwrap();
        assert!(a.states.last().unwrap().overlap_sqr(c.states.last().unwrap()) < 1.0);
    }

    #[test]
    fn norm_preserved_over_long_noisy_run() {
        let (rep, params) = spin_rep(20);
        let psi0 = scs_state(&rep, 0.0, 0.0);
        let field = ControlField::from_fn(10.0, 10_000, |t| (1.3 * t).sin() * 3.0).unwrap();
        let noise = NoiseSpec::new(0.0, 1e-4).unwrap();
        let opts = PropagateOptions::with_stride(1000);
        let traj =
            propagate_realization(&psi0, &field, &noise, &rep, &params, 123, &opts).unwrap();
        for s in &traj.states {
            assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lindblad_closed_system_matches_unitary_evolution() {
        let (rep, params) = spin_rep(4);
        let psi0 = scs_state(&rep, 0.7, 0.1);
        let field = ControlField::from_fn(0.5, 500, |t| 4.0 * (7.0 * t).sin()).unwrap();
        let popts = PropagateOptions { kernel: StepKernel::Eigen, snapshot_stride: 100 };
        let det = propagate_deterministic(&psi0, &field, &rep, &params, &popts).unwrap();
        let lopts = LindbladOptions { z_target: 0.005, snapshot_stride: 100, substeps: None };
        let lind = propagate_lindblad(
            &DensityMatrix::pure(&psi0),
            &field,
            &NoiseSpec::none(),
            &rep,
            &params,
            &lopts,
        )
        .unwrap();
        for (s, r) in det.states.iter().zip(lind.states.iter()) {
            let proj = DensityMatrix::pure(s);
            let d = trace_distance(proj.matrix(), r.matrix()).unwrap();
            assert!(d < 1e-8, "trace distance {d}");
        }
    }

    #[test]
    fn lindblad_keeps_jz_diagonal_states_fixed() {
        // With Δ = 0, U = 0, u = 0 a Jz-diagonal mixture commutes with both
        // terms of the master equation.
        let rep = SpinRep::new(4).unwrap();
        let params = ModelParams::new(0.0, 0.0, 4).unwrap();
        let n = rep.dim();
        let mut m = Array2::<Complex64>::zeros((n, n));
        let weights = [0.4, 0.3, 0.15, 0.1, 0.05];
        for (i, w) in weights.iter().enumerate() {
            m[[i, i]] = Complex64::new(*w, 0.0);
        }
        let rho0 = DensityMatrix::new(m.clone()).unwrap();
        let field = ControlField::zero(1.0, 200).unwrap();
        let noise = NoiseSpec::new(0.5, 0.0).unwrap();
        let traj = propagate_lindblad(&rho0, &field, &noise, &rep, &params,
            &LindbladOptions::default())
            .unwrap();
        let last = traj.states.last().unwrap();
        assert!(max_abs_diff(last.matrix(), &m) < 1e-12);
    }

    #[test]
    fn lindblad_purity_never_increases() {
        let (rep, params) = spin_rep(6);
        let psi0 = scs_state(&rep, 1.1, -0.4);
        let field = ControlField::from_fn(1.0, 1000, |t| 2.0 * (3.0 * t).cos()).unwrap();
        let noise = NoiseSpec::new(0.02, 0.01).unwrap();
        let traj = propagate_lindblad(
            &DensityMatrix::pure(&psi0),
            &field,
            &noise,
            &rep,
            &params,
            &LindbladOptions { snapshot_stride: 50, ..LindbladOptions::default() },
        )
        .unwrap();
        let purities: Vec<f64> = traj.states.iter().map(metrics::purity).collect();
        for w in purities.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "purity increased: {} -> {}", w[0], w[1]);
        }
        assert!(*purities.last().unwrap() < 0.999);
    }

    #[test]
    fn lindblad_aborts_on_unresolved_scale() {
        // One RK4 step per grid point with a deliberately coarse grid leaves
        // the fast scale unresolved; the integrator must abort, not return
        // garbage.
        let (rep, params) = spin_rep(10);
        let psi0 = scs_state(&rep, 0.0, 0.0);
        let field = ControlField::zero(10.0, 40).unwrap();
        let noise = NoiseSpec::new(0.01, 0.0).unwrap();
        let res = propagate_lindblad(
            &DensityMatrix::pure(&psi0),
            &field,
            &noise,
            &rep,
            &params,
            &LindbladOptions::same_grid(),
        );
        assert!(matches!(res, Err(Error::Numerical(_))));
    }

    #[test]
    fn ensemble_average_of_single_trajectory_is_pure() {
        let (rep, params) = spin_rep(6);
        let psi0 = scs_state(&rep, 0.3, 0.9);
        let field = ControlField::from_fn(0.5, 100, |t| t).unwrap();
        let opts = PropagateOptions::with_stride(25);
        let t = propagate_deterministic(&psi0, &field, &rep, &params, &opts).unwrap();
        let avg = ensemble_average(std::slice::from_ref(&t)).unwrap();
        for m in &avg.states {
            assert!((metrics::purity(m) - 1.0).abs() < 1e-12);
        }
        // Identical copies average to the same thing.
        let avg3 = ensemble_average(&[t.clone(), t.clone(), t]).unwrap();
        for (a, b) in avg.states.iter().zip(avg3.states.iter()) {
            assert!(max_abs_diff(a.matrix(), b.matrix()) < 1e-14);
        }
    }

    #[test]
    fn ensemble_average_rejects_mismatched_grids() {
        let (rep, params) = spin_rep(4);
        let psi0 = scs_state(&rep, 0.0, 0.0);
        let f1 = ControlField::zero(1.0, 100).unwrap();
        let f2 = ControlField::zero(1.0, 50).unwrap();
        let opts = PropagateOptions::with_stride(10);
        let t1 = propagate_deterministic(&psi0, &f1, &rep, &params, &opts).unwrap();
        let t2 = propagate_deterministic(&psi0, &f2, &rep, &params, &opts).unwrap();
        assert!(ensemble_average(&[t1, t2]).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = Array2::<Complex64>::zeros((2, 2));
        m[[0, 0]] = Complex64::new(0.6, 0.0);
        m[[1, 1]] = Complex64::new(0.4, 0.0);
        m[[0, 1]] = Complex64::new(0.1, 0.2);
        m[[1, 0]] = Complex64::new(0.1, -0.2);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[[1, 0]] = Complex64::new(0.3, -0.2);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[[1, 0]] = Complex64::new(0.1, -0.2);
        m[[1, 1]] = Complex64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn realization_seeds_are_index_local() {
        let s: Vec<u64> = (0..5).map(|i| realization_seed(42, i)).collect();
        let t: Vec<u64> = (0..3).map(|i| realization_seed(42, i)).collect();
        assert_eq!(&s[..3], &t[..]);
        assert_ne!(s[0], s[1]);
    }
}
