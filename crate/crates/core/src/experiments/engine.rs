//! Ensemble engine: seeded stochastic realizations, deterministic-order
//! reduction, and jackknife error bars for the derived diagnostics.

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{ModelParams, QuantumState, SpinRep};
use crate::bounds::{audit, AuditInputs, BoundReport};
use crate::dynamics::{
    propagate_observed, realization_seed, sample_noise_increments, ControlField, NoiseSpec,
    PropagateOptions,
};
use crate::linalg::StepKernel;
use crate::metrics::quasi_distance;
use crate::Result;

/// Per-snapshot ensemble diagnostics of a single (size, noise) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub two_j: i64,
    pub noise: NoiseSpec,
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    /// Purity of the realization-averaged density matrix.
    pub purity: Vec<f64>,
    pub se_purity: Vec<f64>,
    /// Fidelity against the noiseless reference state at the same time.
    pub fidelity: Vec<f64>,
    pub se_fidelity: Vec<f64>,
    /// Variance of the control operator X = 2Jz in the averaged state.
    pub var_x: Vec<f64>,
    /// Generalized purity of the averaged state.
    pub gp_su2: Vec<f64>,
    /// Total uncertainty of the averaged state.
    pub delta_total: Vec<f64>,
    /// Purity loss 1 - P(t).
    pub delta_p: Vec<f64>,
    /// Fidelity-purity discrepancy 2(1-F) - ΔP, with jackknife errors.
    pub d_stat: Vec<f64>,
    pub se_d: Vec<f64>,
    /// Cumulative ∫ 4 Γ(t) Δ_X[ψ_noiseless(t)] dt at the snapshot times
    /// (trapezoid on the full step grid).
    pub rate_integral: Vec<f64>,
    /// Generalized purity along the noiseless reference.
    pub reference_gp: Vec<f64>,
    pub final_infidelity: f64,
    pub se_final_infidelity: f64,
    pub delta_p_final: f64,
    pub se_delta_p_final: f64,
    pub bounds: BoundReport,
    pub u_bar: f64,
    pub gamma_bar: f64,
    pub min_var_x: f64,
    pub max_var_x: f64,
    pub seeds: Vec<u64>,
}

/// One realization's contribution to the snapshot statistics.
struct RealizationTrace {
    states: Vec<Array1<Complex64>>,
    /// |<ref(t)|psi(t)>|² per snapshot.
    overlap_ref: Vec<f64>,
    /// <X>, <X²> per snapshot (X = 2Jz).
    x_mean: Vec<f64>,
    x_second: Vec<f64>,
    /// <J_k>, <J_k²> per snapshot.
    j_mean: Vec<[f64; 3]>,
    j_second: Vec<[f64; 3]>,
}

pub(crate) struct CellSpec<'a> {
    pub rep: &'a SpinRep,
    pub params: &'a ModelParams,
    pub psi0: &'a QuantumState,
    pub field: &'a ControlField,
    pub noise: NoiseSpec,
    pub realizations: usize,
    pub master_seed: u64,
    pub snapshot_stride: usize,
    pub kernel: StepKernel,
    pub c_order: f64,
}

pub(crate) fn run_cell(spec: &CellSpec<'_>) -> Result<CellResult> {
    let rep = spec.rep;
    let field = spec.field;
    let n_steps = field.n_steps();
    let dt = field.dt();
    let opts = PropagateOptions { kernel: spec.kernel, snapshot_stride: spec.snapshot_stride };

    // Noiseless reference with the instantaneous X-variance recorded on the
    // full grid for the rate integral.
    let mut var_x_grid = vec![0.0_f64; n_steps + 1];
    let reference = {
        let amps = &field.samples()[..n_steps];
        propagate_observed(spec.psi0, field, rep, spec.params, amps, &opts, |step, _t, psi| {
            var_x_grid[step] = x_variance(rep, psi);
        })?
    };
    let target = reference.states.last().expect("reference has final snapshot").clone();

    let min_var_x = var_x_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_var_x = var_x_grid.iter().cloned().fold(0.0_f64, f64::max);

    // Cumulative trapezoid of 4 Γ(t) Δ_X(t) on the step grid.
    let mut cum = vec![0.0_f64; n_steps + 1];
    for k in 0..n_steps {
        let f0 = 4.0 * spec.noise.rate_at(field.samples()[k]) * var_x_grid[k];
        let f1 = 4.0 * spec.noise.rate_at(field.samples()[k + 1]) * var_x_grid[k + 1];
        cum[k + 1] = cum[k] + 0.5 * dt * (f0 + f1);
    }
    let rate_integral: Vec<f64> = reference.steps.iter().map(|&s| cum[s]).collect();
    let reference_gp: Vec<f64> = reference
        .states
        .iter()
        .map(|s| crate::metrics::generalized_purity(s, rep).unwrap_or(f64::NAN))
        .collect();

    // Stochastic realizations, reduced in index order.
    let seeds: Vec<u64> =
        (0..spec.realizations).map(|l| realization_seed(spec.master_seed, l as u64)).collect();
    let traces: Vec<RealizationTrace> = seeds
        .par_iter()
        .map(|&seed| -> Result<RealizationTrace> {
            let xi = sample_noise_increments(field, &spec.noise, seed);
            let amps: Vec<f64> = field.samples()[..n_steps]
                .iter()
                .zip(xi.iter())
                .map(|(u, x)| u + x)
                .collect();
            let traj =
                propagate_observed(spec.psi0, field, rep, spec.params, &amps, &opts, |_, _, _| {})?;
            let n_snap = traj.states.len();
            let mut tr = RealizationTrace {
                states: Vec::with_capacity(n_snap),
                overlap_ref: Vec::with_capacity(n_snap),
                x_mean: Vec::with_capacity(n_snap),
                x_second: Vec::with_capacity(n_snap),
                j_mean: Vec::with_capacity(n_snap),
                j_second: Vec::with_capacity(n_snap),
            };
            for (snap, state) in traj.states.iter().enumerate() {
                tr.overlap_ref.push(reference.states[snap].overlap_sqr(state));
                let m = rep.j_moments(state);
                // X = 2 Jz.
                tr.x_mean.push(2.0 * m.mean[2]);
                tr.x_second.push(4.0 * m.second[2]);
                tr.j_mean.push(m.mean);
                tr.j_second.push(m.second);
                tr.states.push(state.amplitudes().clone());
            }
            Ok(tr)
        })
        .collect::<Result<Vec<_>>>()?;

    let l = traces.len();
    let lf = l as f64;
    let n_snap = reference.states.len();
    let j = rep.j();

    let mut purity = Vec::with_capacity(n_snap);
    let mut se_purity = Vec::with_capacity(n_snap);
    let mut fidelity = Vec::with_capacity(n_snap);
    let mut se_fidelity = Vec::with_capacity(n_snap);
    let mut var_x = Vec::with_capacity(n_snap);
    let mut gp_su2 = Vec::with_capacity(n_snap);
    let mut delta_total = Vec::with_capacity(n_snap);
    let mut delta_p = Vec::with_capacity(n_snap);
    let mut d_stat = Vec::with_capacity(n_snap);
    let mut se_d = Vec::with_capacity(n_snap);

    for snap in 0..n_snap {
        // Gram matrix row sums for the averaged-state purity.
        let states: Vec<&Array1<Complex64>> = traces.iter().map(|t| &t.states[snap]).collect();
        let mut gram_rows = vec![0.0_f64; l];
        let mut gram_total = 0.0_f64;
        let mut gram_diag = vec![0.0_f64; l];
        for a in 0..l {
            let ga = overlap_sqr_raw(states[a], states[a]);
            gram_diag[a] = ga;
            gram_rows[a] += ga;
            gram_total += ga;
            for b in (a + 1)..l {
                let g = overlap_sqr_raw(states[a], states[b]);
                gram_rows[a] += g;
                gram_rows[b] += g;
                gram_total += 2.0 * g;
            }
        }
        let p = gram_total / (lf * lf);
        let f_vals: Vec<f64> = traces.iter().map(|t| t.overlap_ref[snap]).collect();
        let f_mean = f_vals.iter().sum::<f64>() / lf;

        // Jackknife over realizations for P, and for D = 2(1-F) - (1-P).
        let (se_p, se_dd, d_mean) = if l > 1 {
            let lm = lf - 1.0;
            let mut p_loo = Vec::with_capacity(l);
            let mut d_loo = Vec::with_capacity(l);
            let f_sum: f64 = f_vals.iter().sum();
            for i in 0..l {
                let pi = (gram_total - 2.0 * gram_rows[i] + gram_diag[i]) / (lm * lm);
                let fi = (f_sum - f_vals[i]) / lm;
                p_loo.push(pi);
                d_loo.push(2.0 * (1.0 - fi) - (1.0 - pi));
            }
            let d_full = 2.0 * (1.0 - f_mean) - (1.0 - p);
            (jackknife_se(&p_loo), jackknife_se(&d_loo), d_full)
        } else {
            (0.0, 0.0, 2.0 * (1.0 - f_mean) - (1.0 - p))
        };
        let f_se = if l > 1 {
            let var =
                f_vals.iter().map(|f| (f - f_mean) * (f - f_mean)).sum::<f64>() / (lf - 1.0);
            (var / lf).sqrt()
        } else {
            0.0
        };

        // Linear-in-rho diagnostics from per-realization expectations.
        let x_mean = traces.iter().map(|t| t.x_mean[snap]).sum::<f64>() / lf;
        let x_second = traces.iter().map(|t| t.x_second[snap]).sum::<f64>() / lf;
        let mut jm = [0.0_f64; 3];
        let mut js = [0.0_f64; 3];
        for t in &traces {
            for k in 0..3 {
                jm[k] += t.j_mean[snap][k];
                js[k] += t.j_second[snap][k];
            }
        }
        for k in 0..3 {
            jm[k] /= lf;
            js[k] /= lf;
        }

        purity.push(p);
        se_purity.push(se_p);
        fidelity.push(f_mean);
        se_fidelity.push(f_se);
        var_x.push(x_second - x_mean * x_mean);
        gp_su2.push(jm.iter().map(|v| v * v).sum::<f64>() / (j * j));
        delta_total.push((0..3).map(|k| js[k] - jm[k] * jm[k]).sum());
        delta_p.push(1.0 - p);
        d_stat.push(d_mean);
        se_d.push(se_dd);
    }

    let u_bar = crate::bounds::average_amplitude(field);
    let gamma_bar = crate::bounds::average_dephasing(field, &spec.noise);
    let h0 = crate::algebra::build_drift(spec.params, rep)?;
    let qd = quasi_distance(spec.psi0, &target, &h0)?;
    let dp_final = *delta_p.last().expect("at least one snapshot");
    let bounds = audit(&AuditInputs {
        qd: &qd,
        field,
        noise: &spec.noise,
        lambda: rep.two_j() as f64,
        n_size: rep.two_j() as f64,
        min_variance: min_var_x,
        max_variance: max_var_x,
        delta_p: dp_final,
        c_order: spec.c_order,
    });

    Ok(CellResult {
        two_j: rep.two_j(),
        noise: spec.noise,
        times: reference.times.clone(),
        steps: reference.steps.clone(),
        final_infidelity: 1.0 - *fidelity.last().expect("snapshots"),
        se_final_infidelity: *se_fidelity.last().expect("snapshots"),
        delta_p_final: dp_final,
        se_delta_p_final: *se_purity.last().expect("snapshots"),
        purity,
        se_purity,
        fidelity,
        se_fidelity,
        var_x,
        gp_su2,
        delta_total,
        delta_p,
        d_stat,
        se_d,
        rate_integral,
        reference_gp,
        bounds,
        u_bar,
        gamma_bar,
        min_var_x,
        max_var_x,
        seeds,
    })
}

fn x_variance(rep: &SpinRep, psi: &[Complex64]) -> f64 {
    // X = 2 Jz is diagonal.
    let mut mean = 0.0;
    let mut second = 0.0;
    for (i, a) in psi.iter().enumerate() {
        let x = 2.0 * rep.jz_diag[i];
        let p = a.norm_sqr();
        mean += x * p;
        second += x * x * p;
    }
    second - mean * mean
}

fn overlap_sqr_raw(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    let mut acc = Complex64::default();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc.norm_sqr()
}

/// Standard jackknife standard error from leave-one-out statistics.
fn jackknife_se(loo: &[f64]) -> f64 {
    let l = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / l;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    ((l - 1.0) / l * ss).sqrt()
}
