//! State diagnostics: purity, fidelity, operator variances, purity-loss
//! rate, total uncertainty, generalized purity, and the quasi-distance with
//! its associated sign operator.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::algebra::{QuantumState, SpinRep};
use crate::dynamics::DensityMatrix;
use crate::linalg::eigh_hermitian;
use crate::{Error, Result};

/// Purity `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // For Hermitian ρ this is the squared Frobenius norm.
    rho.matrix().iter().map(|v| v.norm_sqr()).sum()
}

/// Fidelity `<ψ_ref| ρ |ψ_ref>` of a mixed state against a pure reference.
pub fn fidelity(rho: &DensityMatrix, psi_ref: &QuantumState) -> Result<f64> {
    let n = rho.dim();
    if psi_ref.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "density matrix dimension {n} vs reference dimension {}",
            psi_ref.dim()
        )));
    }
    let a = psi_ref.amplitudes();
    let mut acc = Complex64::default();
    for i in 0..n {
        let mut row = Complex64::default();
        for j in 0..n {
            row += rho.matrix()[[i, j]] * a[j];
        }
        acc += a[i].conj() * row;
    }
    Ok(acc.re)
}

/// Variance `<X²> - <X>²` of a Hermitian operator in a pure state.
pub fn variance(psi: &QuantumState, x: &Array2<Complex64>) -> f64 {
    let n = psi.dim();
    assert_eq!(x.nrows(), n, "operator dimension mismatch");
    let a = psi.amplitudes();
    let mut xa = Array1::<Complex64>::zeros(n);
    for i in 0..n {
        let mut acc = Complex64::default();
        for j in 0..n {
            acc += x[[i, j]] * a[j];
        }
        xa[i] = acc;
    }
    let mean: f64 = a.iter().zip(xa.iter()).map(|(ai, xi)| (ai.conj() * xi).re).sum();
    let second: f64 = xa.iter().map(|v| v.norm_sqr()).sum();
    second - mean * mean
}

/// Instantaneous purity-loss rate `4 Σ_k Γ_k Δ_{X_k}[ψ]` of a pure state
/// under dephasing channels `(Γ_k, X_k)`.
pub fn purity_loss_rate(psi: &QuantumState, channels: &[(f64, &Array2<Complex64>)]) -> f64 {
    channels.iter().map(|(gamma, x)| 4.0 * gamma * variance(psi, x)).sum()
}

/// Total uncertainty `Σ_k Δ_{J_k}[ψ]` over the three spin projections.
///
/// Ranges from j (spin-coherent states) to j(j+1) (via the Casimir identity
/// `Σ_k <J_k>² + Δ(ψ) = j(j+1)`).
pub fn total_uncertainty(psi: &QuantumState, rep: &SpinRep) -> f64 {
    let m = rep.j_moments(psi);
    (0..3).map(|k| m.second[k] - m.mean[k] * m.mean[k]).sum()
}

/// Generalized purity `(1/j²) Σ_k <J_k>²`; 1 exactly on spin-coherent
/// states, small on generic states.
pub fn generalized_purity(psi: &QuantumState, rep: &SpinRep) -> Result<f64> {
    let j = rep.j();
    if j == 0.0 {
        return Err(Error::InvalidArgument("generalized purity undefined at j = 0".into()));
    }
    let m = rep.j_moments(psi);
    Ok(m.mean.iter().map(|v| v * v).sum::<f64>() / (j * j))
}

/// Amplitude-modulus comparison of two states in the drift eigenbasis.
///
/// `delta_r = r_f - r_i` where `r` are the moduli of the state amplitudes in
/// the (deterministically ordered) eigenbasis of `H0`; `norm` is ‖Δr‖. The
/// quasi-distance vanishes on pairs connected by free propagation.
#[derive(Debug, Clone)]
pub struct QuasiDistanceResult {
    pub r_i: Vec<f64>,
    pub r_f: Vec<f64>,
    pub delta_r: Vec<f64>,
    pub norm: f64,
    basis: Array2<Complex64>,
    values: Vec<f64>,
}

impl QuasiDistanceResult {
    /// Eigenbasis columns of H0 in the pinned deterministic convention.
    pub fn eigenbasis(&self) -> &Array2<Complex64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }
}

/// Deterministic eigenbasis convention: ascending eigenvalues; degenerate
/// clusters ordered by the index of each vector's largest-modulus component;
/// every vector's largest-modulus component rotated to be real positive.
fn canonical_eigenbasis(h0: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let (vals, mut vecs) = eigh_hermitian(h0)?;
    let n = vals.len();
    if n == 0 {
        return Ok((vals, vecs));
    }
    let spread = (vals[n - 1] - vals[0]).abs().max(vals[0].abs()).max(1.0);
    let tol = 1e-8 * spread;
    let argmax = |col: usize, vecs: &Array2<Complex64>| -> usize {
        let mut best = 0;
        let mut best_v = -1.0;
        for k in 0..n {
            let m = vecs[[k, col]].norm();
            if m > best_v {
                best_v = m;
                best = k;
            }
        }
        best
    };
    // Reorder inside degenerate clusters.
    let mut order: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[start]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by_key(|&c| argmax(c, &vecs));
        }
        start = end;
    }
    let sorted_vals: Vec<f64> = order.iter().map(|&c| vals[c]).collect();
    let mut sorted = Array2::<Complex64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        sorted.column_mut(new).assign(&vecs.column(old));
    }
    vecs = sorted;
    // Phase convention.
    for c in 0..n {
        let k = argmax(c, &vecs);
        let v = vecs[[k, c]];
        if v.norm() > 0.0 {
            let phase = v.conj() / v.norm();
            for k in 0..n {
                vecs[[k, c]] *= phase;
            }
        }
    }
    Ok((sorted_vals, vecs))
}

/// Quasi-distance between two states modulo free evolution under `h0`.
pub fn quasi_distance(
    psi_i: &QuantumState,
    psi_f: &QuantumState,
    h0: &Array2<Complex64>,
) -> Result<QuasiDistanceResult> {
    let n = h0.nrows();
    if psi_i.dim() != n || psi_f.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {}/{} vs Hamiltonian dimension {n}",
            psi_i.dim(),
            psi_f.dim()
        )));
    }
    let (values, basis) = canonical_eigenbasis(h0)?;
    let moduli = |psi: &QuantumState| -> Vec<f64> {
        (0..n)
            .map(|m| {
                let mut acc = Complex64::default();
                for k in 0..n {
                    acc += basis[[k, m]].conj() * psi.amplitudes()[k];
                }
                acc.norm()
            })
            .collect()
    };
    let r_i = moduli(psi_i);
    let r_f = moduli(psi_f);
    let delta_r: Vec<f64> = r_f.iter().zip(r_i.iter()).map(|(f, i)| f - i).collect();
    let norm = delta_r.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(QuasiDistanceResult { r_i, r_f, delta_r, norm, basis, values })
}

/// Sign operator `A = Σ_n sign(Δr_n) |n><n|` in the H0 eigenbasis
/// (`sign(0) := +1`), so A commutes with H0 and has eigenvalues ±1.
pub fn build_a_operator(
    qd: &QuasiDistanceResult,
    h0: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    let n = qd.delta_r.len();
    if h0.nrows() != n || h0.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "quasi-distance of dimension {n} vs Hamiltonian {}x{}",
            h0.nrows(),
            h0.ncols()
        )));
    }
    let mut a = Array2::<Complex64>::zeros((n, n));
    for m in 0..n {
        let s = if qd.delta_r[m] >= 0.0 { 1.0 } else { -1.0 };
        for i in 0..n {
            let vi = qd.basis[[i, m]];
            for k in 0..n {
                a[[i, k]] += vi * qd.basis[[k, m]].conj() * s;
            }
        }
    }
    Ok(a)
}

/// `<ψ|A|ψ>` for Hermitian A (real part of the quadratic form).
pub fn expectation(psi: &QuantumState, a: &Array2<Complex64>) -> f64 {
    let n = psi.dim();
    let amp = psi.amplitudes();
    let mut acc = Complex64::default();
    for i in 0..n {
        let mut row = Complex64::default();
        for j in 0..n {
            row += a[[i, j]] * amp[j];
        }
        acc += amp[i].conj() * row;
    }
    acc.re
}
