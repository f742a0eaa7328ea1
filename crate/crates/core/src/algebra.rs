//! Spin-j operator representations, drift and Bose-Hubbard Hamiltonians, and
//! spin-coherent states.
//!
//! Basis convention used everywhere in this crate: the Jz eigenbasis in
//! descending order, `e_i = |j, m = j - i>`, so the highest-weight state is
//! the first basis vector. In this basis Jx is real symmetric tridiagonal,
//! Jz is diagonal and Jy is purely imaginary tridiagonal, so every
//! Hamiltonian built here is real symmetric tridiagonal.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::linalg::SymTridiag;
use crate::{Error, Result, MAX_DIM};

/// Norm tolerance enforced on state vectors.
pub const STATE_NORM_TOL: f64 = 1e-10;

/// An su(2) irreducible representation of spin j, with dense Jx, Jy, Jz.
///
/// `two_j` is 2j, so half-integer spins are supported.
#[derive(Debug, Clone)]
pub struct SpinRep {
    two_j: i64,
    dim: usize,
    jx: Array2<Complex64>,
    jy: Array2<Complex64>,
    jz: Array2<Complex64>,
    /// Off-diagonal of Jx: `jx_off[i] = sqrt((2j - i)(i + 1)) / 2`.
    pub(crate) jx_off: Vec<f64>,
    /// Diagonal of Jz: `jz_diag[i] = j - i`.
    pub(crate) jz_diag: Vec<f64>,
}

impl SpinRep {
    /// Builds the spin representation with 2j = `two_j` (dimension 2j + 1).
    pub fn new(two_j: i64) -> Result<Self> {
        if two_j < 0 {
            return Err(Error::InvalidArgument(format!(
                "two_j must be nonnegative, got {two_j}"
            )));
        }
        let dim = two_j as usize + 1;
        if dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} exceeds supported maximum {MAX_DIM}"
            )));
        }
        let j = two_j as f64 / 2.0;
        let jz_diag: Vec<f64> = (0..dim).map(|i| j - i as f64).collect();
        // <m-1|J-|m> = sqrt(j(j+1) - m(m-1)) = sqrt((j+m)(j-m+1)); with
        // m = j - i this is the exact integer product (2j - i)(i + 1).
        let jx_off: Vec<f64> = (0..dim.saturating_sub(1))
            .map(|i| 0.5 * ((two_j - i as i64) as f64 * (i as f64 + 1.0)).sqrt())
            .collect();

        let mut jx = Array2::<Complex64>::zeros((dim, dim));
        let mut jy = Array2::<Complex64>::zeros((dim, dim));
        let mut jz = Array2::<Complex64>::zeros((dim, dim));
        for i in 0..dim {
            jz[[i, i]] = Complex64::new(jz_diag[i], 0.0);
        }
        for i in 0..dim.saturating_sub(1) {
            let c = jx_off[i];
            jx[[i, i + 1]] = Complex64::new(c, 0.0);
            jx[[i + 1, i]] = Complex64::new(c, 0.0);
            jy[[i, i + 1]] = Complex64::new(0.0, -c);
            jy[[i + 1, i]] = Complex64::new(0.0, c);
        }
        Ok(Self { two_j, dim, jx, jy, jz, jx_off, jz_diag })
    }

    pub fn two_j(&self) -> i64 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalue j(j+1) of the Casimir operator Jx² + Jy² + Jz².
    pub fn casimir(&self) -> f64 {
        let j = self.j();
        j * (j + 1.0)
    }

    pub fn jx(&self) -> &Array2<Complex64> {
        &self.jx
    }

    pub fn jy(&self) -> &Array2<Complex64> {
        &self.jy
    }

    pub fn jz(&self) -> &Array2<Complex64> {
        &self.jz
    }

    /// First and second moments of (Jx, Jy, Jz) in a pure state.
    pub fn j_moments(&self, psi: &QuantumState) -> JMoments {
        let a = psi.amplitudes();
        assert_eq!(a.len(), self.dim, "state dimension mismatch");
        let n = self.dim;
        // Jz is diagonal.
        let mut mz = 0.0;
        let mut mz2 = 0.0;
        for i in 0..n {
            let p = a[i].norm_sqr();
            mz += self.jz_diag[i] * p;
            mz2 += self.jz_diag[i] * self.jz_diag[i] * p;
        }
        // Jx psi and Jy psi in one pass over the tridiagonal band.
        let mut mx = 0.0;
        let mut my = 0.0;
        let mut mx2 = 0.0;
        let mut my2 = 0.0;
        for i in 0..n {
            let mut jxv = Complex64::default();
            let mut jyv = Complex64::default();
            if i > 0 {
                let c = self.jx_off[i - 1];
                jxv += a[i - 1] * c;
                jyv += a[i - 1] * Complex64::new(0.0, c);
            }
            if i + 1 < n {
                let c = self.jx_off[i];
                jxv += a[i + 1] * c;
                jyv += a[i + 1] * Complex64::new(0.0, -c);
            }
            let ai = a[i].conj();
            mx += (ai * jxv).re;
            my += (ai * jyv).re;
            mx2 += jxv.norm_sqr();
            my2 += jyv.norm_sqr();
        }
        JMoments { mean: [mx, my, mz], second: [mx2, my2, mz2] }
    }
}

/// First and second moments of the angular-momentum projections.
#[derive(Debug, Clone, Copy)]
pub struct JMoments {
    pub mean: [f64; 3],
    pub second: [f64; 3],
}

/// Model parameters of the driven dimer: hopping Δ, on-site interaction U,
/// spin j (through 2j).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub u_int: f64,
    pub two_j: i64,
}

impl ModelParams {
    pub fn new(delta: f64, u_int: f64, two_j: i64) -> Result<Self> {
        if !delta.is_finite() || !u_int.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "model parameters must be finite: delta={delta}, u_int={u_int}"
            )));
        }
        Ok(Self { delta, u_int, two_j })
    }

    /// The size-scaled interaction choice U = 2Δ/j.
    pub fn size_scaled(delta: f64, two_j: i64) -> Result<Self> {
        if two_j <= 0 {
            return Err(Error::InvalidArgument(format!(
                "size-scaled interaction requires two_j > 0, got {two_j}"
            )));
        }
        let j = two_j as f64 / 2.0;
        Self::new(delta, 2.0 * delta / j, two_j)
    }
}

/// Normalized complex state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Array1<Complex64>,
}

impl QuantumState {
    /// Wraps an amplitude vector, requiring unit norm within [`STATE_NORM_TOL`].
    pub fn new(amplitudes: Array1<Complex64>) -> Result<Self> {
        let norm = state_norm(&amplitudes);
        if !norm.is_finite() || (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidState(format!(
                "state norm {norm} deviates from 1 by more than {STATE_NORM_TOL}"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes the vector; errors on zero or non-finite input.
    pub fn from_unnormalized(mut amplitudes: Array1<Complex64>) -> Result<Self> {
        let norm = state_norm(&amplitudes);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState(format!("cannot normalize vector with norm {norm}")));
        }
        amplitudes.mapv_inplace(|x| x / norm);
        Ok(Self { amplitudes })
    }

    /// The k-th computational basis state of the given dimension.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut a = Array1::<Complex64>::zeros(dim);
        a[k] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: a })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        state_norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &QuantumState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|²`.
    pub fn overlap_sqr(&self, other: &QuantumState) -> f64 {
        self.overlap(other).norm_sqr()
    }
}

fn state_norm(a: &Array1<Complex64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Spin representation of the dimension matching `two_j` (convenience form of
/// [`SpinRep::new`]).
pub fn build_spin_rep(two_j: i64) -> Result<SpinRep> {
    SpinRep::new(two_j)
}

pub(crate) fn drift_tridiag(params: &ModelParams, rep: &SpinRep) -> SymTridiag {
    let n = rep.dim();
    let diag: Vec<f64> =
        (0..n).map(|i| params.u_int * rep.jz_diag[i] * rep.jz_diag[i]).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| -2.0 * params.delta * rep.jx_off[i]).collect();
    SymTridiag::new(diag, off)
}

/// Drift Hamiltonian `H0 = -2Δ Jx + U Jz²`.
pub fn build_drift(params: &ModelParams, rep: &SpinRep) -> Result<Array2<Complex64>> {
    if params.two_j != rep.two_j() {
        return Err(Error::DimensionMismatch(format!(
            "params built for two_j={}, representation has two_j={}",
            params.two_j,
            rep.two_j()
        )));
    }
    Ok(drift_tridiag(params, rep).to_dense_complex())
}

/// Two-mode Bose-Hubbard Hamiltonian in the fixed-N sector,
/// `-Δ(a1†a2 + a2†a1) + (U/2)[(a1†a1)² + (a2†a2)²]`, dimension N+1.
///
/// Basis order matches the spin convention: index i holds `n1 = N - i`
/// occupation of the first well, so its spectrum equals the spin-(N/2) drift
/// spectrum shifted by the constant U·N²/4.
pub fn build_bose_hubbard(n_particles: i64, delta: f64, u_int: f64) -> Result<Array2<Complex64>> {
    if n_particles < 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least one particle, got {n_particles}"
        )));
    }
    let dim = n_particles as usize + 1;
    if dim > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} exceeds supported maximum {MAX_DIM}"
        )));
    }
    let n = n_particles as f64;
    let diag: Vec<f64> = (0..dim)
        .map(|i| {
            let n1 = n - i as f64;
            let n2 = i as f64;
            0.5 * u_int * (n1 * n1 + n2 * n2)
        })
        .collect();
    let off: Vec<f64> = (0..dim - 1)
        .map(|i| -delta * ((n_particles - i as i64) as f64 * (i as f64 + 1.0)).sqrt())
        .collect();
    Ok(SymTridiag::new(diag, off).to_dense_complex())
}

/// Spin-coherent state: rotation of the highest-weight state |j, m=j> by
/// `exp(-iθ (Jx sinφ - Jy cosφ))`. `θ = 0` returns exactly |j, m=j>.
pub fn scs_state(rep: &SpinRep, theta: f64, phi: f64) -> QuantumState {
    let n = rep.dim();
    if theta == 0.0 || n == 1 {
        return QuantumState::basis_state(n, 0).expect("dim >= 1");
    }
    // The generator A = Jx sinφ - Jy cosφ is Hermitian tridiagonal with
    // off-diagonal c_i (sinφ + i cosφ); a diagonal phase gauge D makes
    // D A D† real symmetric tridiagonal, so exp(-iθA) = D† exp(-iθ T) D.
    let unit = Complex64::new(phi.sin(), phi.cos());
    let mut phases = vec![Complex64::new(1.0, 0.0); n];
    for i in 1..n {
        phases[i] = phases[i - 1] * unit;
    }
    let t = SymTridiag::new(vec![0.0; n], rep.jx_off.clone());
    let (vals, vecs) = t.eig().expect("spin generator eigendecomposition");
    // v = exp(-iθT) e0; then amplitudes = conj(phases) ∘ v (D e0 = e0).
    let mut out = Array1::<Complex64>::zeros(n);
    for m in 0..n {
        let w = Complex64::from_polar(1.0, -theta * vals[m]) * vecs[[0, m]];
        for k in 0..n {
            out[k] += w * vecs[[k, m]];
        }
    }
    for k in 0..n {
        out[k] *= phases[k].conj();
    }
    QuantumState::from_unnormalized(out).expect("unitary rotation preserves norm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::metrics;
    use ndarray::Array2;

    fn commutator(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
        a.dot(b) - b.dot(a)
    }

    fn check_su2_invariants(rep: &SpinRep, tol_comm: f64, tol_casimir: f64) {
        let i = Complex64::new(0.0, 1.0);
        let cxy = commutator(rep.jx(), rep.jy()) - rep.jz().mapv(|v| v * i);
        let cyz = commutator(rep.jy(), rep.jz()) - rep.jx().mapv(|v| v * i);
        let czx = commutator(rep.jz(), rep.jx()) - rep.jy().mapv(|v| v * i);
        let zero = Array2::<Complex64>::zeros(cxy.dim());
        assert!(max_abs_diff(&cxy, &zero) < tol_comm);
        assert!(max_abs_diff(&cyz, &zero) < tol_comm);
        assert!(max_abs_diff(&czx, &zero) < tol_comm);

        let casimir = rep.jx().dot(rep.jx()) + rep.jy().dot(rep.jy()) + rep.jz().dot(rep.jz());
        let expected = Array2::<Complex64>::eye(rep.dim()).mapv(|v| v * rep.casimir());
        assert!(max_abs_diff(&casimir, &expected) < tol_casimir);

        for m in [rep.jx(), rep.jy(), rep.jz()] {
            let mt = m.t().mapv(|v| v.conj());
            assert!(max_abs_diff(m, &mt) < 1e-14);
        }
    }

    #[test]
    fn spin_half_matrices() {
        let rep = SpinRep::new(1).unwrap();
        assert_eq!(rep.dim(), 2);
        assert!((rep.jz()[[0, 0]].re - 0.5).abs() < 1e-15);
        assert!((rep.jz()[[1, 1]].re + 0.5).abs() < 1e-15);
        assert!((rep.jx()[[0, 1]].re - 0.5).abs() < 1e-15);
        assert!((rep.jy()[[0, 1]] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn spin_one_jx_entries() {
        // Ladder formula gives all Jx off-diagonal entries 1/sqrt(2) at j=1.
        let rep = SpinRep::new(2).unwrap();
        let expect = 1.0 / 2.0_f64.sqrt();
        assert!((rep.jx()[[0, 1]].re - expect).abs() < 1e-15);
        assert!((rep.jx()[[1, 2]].re - expect).abs() < 1e-15);
        assert!(rep.jx()[[0, 2]].norm() < 1e-15);
        // Casimir j(j+1) = 2.
        let c = rep.jx().dot(rep.jx()) + rep.jy().dot(rep.jy()) + rep.jz().dot(rep.jz());
        let expected = Array2::<Complex64>::eye(3).mapv(|v| v * 2.0);
        assert!(max_abs_diff(&c, &expected) < 1e-12);
    }

    #[test]
    fn su2_invariants_small_reps() {
        for two_j in [1, 2, 3, 10] {
            let rep = SpinRep::new(two_j).unwrap();
            check_su2_invariants(&rep, 1e-12, 1e-10);
        }
    }

    #[test]
    fn rejects_negative_two_j() {
        assert!(matches!(SpinRep::new(-1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn drift_spin_half_spectrum() {
        // H0 = -30 Jx at j=1/2 has eigenvalues ∓15.
        let rep = SpinRep::new(1).unwrap();
        let params = ModelParams::new(15.0, 0.0, 1).unwrap();
        let tri = drift_tridiag(&params, &rep);
        let vals = tri.eigvals().unwrap();
        assert!((vals[0] + 15.0).abs() < 1e-12);
        assert!((vals[1] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn drift_zero_hopping_is_diagonal() {
        let rep = SpinRep::new(4).unwrap();
        let params = ModelParams::new(0.0, 1.7, 4).unwrap();
        let h = build_drift(&params, &rep).unwrap();
        for i in 0..rep.dim() {
            let m = rep.j() - i as f64;
            assert!((h[[i, i]].re - 1.7 * m * m).abs() < 1e-13);
            for jcol in 0..rep.dim() {
                if jcol != i {
                    assert!(h[[i, jcol]].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn drift_paper_scale_dimensions() {
        let rep = SpinRep::new(40).unwrap();
        let params = ModelParams::size_scaled(15.0, 40).unwrap();
        assert!((params.u_int - 1.5).abs() < 1e-15);
        let h = build_drift(&params, &rep).unwrap();
        assert_eq!(h.dim(), (41, 41));
        let ht = h.t().mapv(|v| v.conj());
        assert!(max_abs_diff(&h, &ht) < 1e-14);
    }

    #[test]
    fn drift_rejects_mismatched_rep() {
        let rep = SpinRep::new(4).unwrap();
        let params = ModelParams::new(1.0, 1.0, 6).unwrap();
        assert!(matches!(build_drift(&params, &rep), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn bose_hubbard_single_particle() {
        let h = build_bose_hubbard(1, 2.5, 0.8).unwrap();
        assert_eq!(h.dim(), (2, 2));
        assert!((h[[0, 0]].re - 0.4).abs() < 1e-15);
        assert!((h[[1, 1]].re - 0.4).abs() < 1e-15);
        assert!((h[[0, 1]].re + 2.5).abs() < 1e-15);
    }

    #[test]
    fn bose_hubbard_zero_hopping_diagonal() {
        let h = build_bose_hubbard(2, 0.0, 1.0).unwrap();
        // Occupations (2,0), (1,1), (0,2) give (U/2)(n1²+n2²) = 2U, U, 2U.
        assert!((h[[0, 0]].re - 2.0).abs() < 1e-15);
        assert!((h[[1, 1]].re - 1.0).abs() < 1e-15);
        assert!((h[[2, 2]].re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bose_hubbard_rejects_empty_system() {
        assert!(build_bose_hubbard(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bose_hubbard_matches_spin_spectrum() {
        // Spectra agree after subtracting the constant U N²/4.
        for n in 1..=20i64 {
            let delta = 1.3;
            let u = 0.7;
            let bh = build_bose_hubbard(n, delta, u).unwrap();
            let rep = SpinRep::new(n).unwrap();
            let params = ModelParams::new(delta, u, n).unwrap();
            let tri = drift_tridiag(&params, &rep);
            let spin_vals = tri.eigvals().unwrap();
            let shift = 0.25 * u * (n * n) as f64;
            let bh_real = bh.mapv(|v| v.re);
            let (bh_vals, _) = crate::linalg::eigh_real_symmetric(&bh_real).unwrap();
            for (a, b) in bh_vals.iter().zip(spin_vals.iter()) {
                assert!((a - (b + shift)).abs() < 1e-10, "N={n}: {a} vs {}", b + shift);
            }
        }
    }

    #[test]
    fn scs_theta_zero_is_highest_weight() {
        let rep = SpinRep::new(7).unwrap();
        let s = scs_state(&rep, 0.0, 1.3);
        assert!((s.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for k in 1..rep.dim() {
            assert!(s.amplitudes()[k].norm() < 1e-15);
        }
    }

    #[test]
    fn scs_moments_follow_rotation() {
        // The generator rotates the mean spin to
        // j (-sinθ cosφ, -sinθ sinφ, cosθ); total uncertainty stays j.
        let rep = SpinRep::new(14).unwrap();
        let j = rep.j();
        for (theta, phi) in [(0.7, 0.3), (1.9, -2.0), (2.9, 4.4)] {
            let s = scs_state(&rep, theta, phi);
            let m = rep.j_moments(&s);
            assert!((m.mean[0] + j * theta.sin() * phi.cos()).abs() < 1e-9);
            assert!((m.mean[1] + j * theta.sin() * phi.sin()).abs() < 1e-9);
            assert!((m.mean[2] - j * theta.cos()).abs() < 1e-9);
            let gp = metrics::generalized_purity(&s, &rep).unwrap();
            assert!((gp - 1.0).abs() < 1e-10);
            let tu = metrics::total_uncertainty(&s, &rep);
            assert!((tu - j).abs() < 1e-9);
        }
    }

    #[test]
    fn scs_mean_spin_length_proptest_style() {
        // Σ_k <J_k>² = j² across a deterministic sample of angles.
        let rep = SpinRep::new(9).unwrap();
        let j = rep.j();
        for a in 0..10 {
            for b in 0..10 {
                let theta = 0.31 * a as f64;
                let phi = -3.0 + 0.63 * b as f64;
                let s = scs_state(&rep, theta, phi);
                let m = rep.j_moments(&s);
                let len: f64 = m.mean.iter().map(|v| v * v).sum();
                assert!((len - j * j).abs() < 1e-9 * j * j);
            }
        }
    }
}
