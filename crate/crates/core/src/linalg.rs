//! Dense linear-algebra kernels: symmetric/Hermitian eigendecompositions and
//! polynomial propagator steps.
//!
//! Every Hamiltonian in this crate is real symmetric tridiagonal in the Jz
//! basis, so the eigensolvers are built around Householder reduction (dense
//! input) and implicit-shift QL iteration (tridiagonal input). Complex
//! Hermitian matrices are handled through the standard real embedding
//! `[[A, -B], [B, A]]` of `H = A + iB`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

const QL_MAX_ITER: usize = 50;

/// Real symmetric tridiagonal matrix; `off[i]` couples indices `i` and `i+1`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length must be dim - 1");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin bounds (lo, hi) on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `y = T x` for complex `x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = x[i] * self.diag[i];
            if i > 0 {
                acc += x[i - 1] * self.off[i - 1];
            }
            if i + 1 < n {
                acc += x[i + 1] * self.off[i];
            }
            y[i] = acc;
        }
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
    pub fn eig(&self) -> Result<(Vec<f64>, Array2<f64>)> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n - 1].copy_from_slice(&self.off);
        let mut z = Array2::<f64>::eye(n);
        tql2(&mut d, &mut e, Some(&mut z))?;
        sort_eig(&mut d, &mut z);
        Ok((d, z))
    }

    /// Eigenvalues only, ascending.
    pub fn eigvals(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n - 1].copy_from_slice(&self.off);
        tql2(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    pub fn to_dense_complex(&self) -> Array2<Complex64> {
        let n = self.dim();
        let mut m = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            m[[i, i]] = Complex64::new(self.diag[i], 0.0);
            if i + 1 < n {
                m[[i, i + 1]] = Complex64::new(self.off[i], 0.0);
                m[[i + 1, i]] = Complex64::new(self.off[i], 0.0);
            }
        }
        m
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e[i]` the coupling between `i` and `i+1`
/// (`e[n-1]` is workspace). If `z` is given it must hold the transformation
/// accumulated so far (identity for a raw tridiagonal matrix); on exit its
/// columns are the eigenvectors matching `d`. Eigenvalues are not sorted.
fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Array2<f64>>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::Numerical(format!(
                    "tridiagonal QL failed to converge at row {l} after {QL_MAX_ITER} iterations"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut interrupted = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    interrupted = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        f = z[[k, i + 1]];
                        z[[k, i + 1]] = s * z[[k, i]] + c * f;
                        z[[k, i]] = c * z[[k, i]] - s * f;
                    }
                }
            }
            if interrupted {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Sort eigenvalues ascending, permuting eigenvector columns to match.
fn sort_eig(d: &mut Vec<f64>, z: &mut Array2<f64>) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let sorted_d: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut sorted_z = Array2::<f64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        sorted_z.column_mut(new).assign(&z.column(old));
    }
    *d = sorted_d;
    *z = sorted_z;
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
///
/// On entry `z` holds the symmetric matrix; on exit it holds the orthogonal
/// transformation. `d` receives the diagonal and `e[i]` the coupling between
/// `i` and `i+1`.
fn tred2(z: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    // EISPACK-style convention inside this routine: eh[i] couples (i-1, i).
    let mut eh = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += z[[i, k]].abs();
            }
            if scale == 0.0 {
                eh[i] = z[[i, l]];
            } else {
                for k in 0..=l {
                    z[[i, k]] /= scale;
                    h += z[[i, k]] * z[[i, k]];
                }
                let mut f = z[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                eh[i] = scale * g;
                h -= f * g;
                z[[i, l]] = f - g;
                f = 0.0;
                for j in 0..=l {
                    z[[j, i]] = z[[i, j]] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[[j, k]] * z[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g += z[[k, j]] * z[[i, k]];
                    }
                    eh[j] = g / h;
                    f += eh[j] * z[[i, j]];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = z[[i, j]];
                    let g = eh[j] - hh * f;
                    eh[j] = g;
                    for k in 0..=j {
                        let delta = f * eh[k] + g * z[[i, k]];
                        z[[j, k]] -= delta;
                    }
                }
            }
        } else {
            eh[i] = z[[i, l]];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    eh[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[[i, k]] * z[[k, j]];
                }
                for k in 0..i {
                    let delta = g * z[[k, i]];
                    z[[k, j]] -= delta;
                }
            }
        }
        d[i] = z[[i, i]];
        z[[i, i]] = 1.0;
        for j in 0..i {
            z[[j, i]] = 0.0;
            z[[i, j]] = 0.0;
        }
    }
    for i in 0..n - 1 {
        e[i] = eh[i + 1];
    }
    e[n - 1] = 0.0;
}

/// Eigendecomposition of a dense real symmetric matrix.
///
/// The input is symmetrized as `(A + Aᵀ)/2`. Returns ascending eigenvalues
/// and orthonormal eigenvectors as columns.
pub fn eigh_real_symmetric(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    let mut z = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            z[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, Some(&mut z))?;
    sort_eig(&mut d, &mut z);
    Ok((d, z))
}

fn embed_hermitian(h: &Array2<Complex64>) -> Result<(Array2<f64>, usize)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    // Hermitize: A symmetric, B antisymmetric parts of (H + H†)/2.
    let mut m = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let a = 0.5 * (h[[i, j]].re + h[[j, i]].re);
            let b = 0.5 * (h[[i, j]].im - h[[j, i]].im);
            m[[i, j]] = a;
            m[[n + i, n + j]] = a;
            m[[i, n + j]] = -b;
            m[[n + i, j]] = b;
        }
    }
    Ok((m, n))
}

fn max_abs_imag_asym(h: &Array2<Complex64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((0.5 * (h[[i, j]].im - h[[j, i]].im)).abs());
        }
    }
    worst
}

/// Eigendecomposition of a dense complex Hermitian matrix.
///
/// Returns ascending eigenvalues and orthonormal eigenvectors as columns.
/// Real-symmetric inputs are detected and solved in dimension n; general
/// Hermitian inputs go through the 2n real embedding.
pub fn eigh_hermitian(h: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    let scale = h.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    if max_abs_imag_asym(h) <= 1e-14 * scale.max(1.0) {
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = 0.5 * (h[[i, j]].re + h[[j, i]].re);
            }
        }
        let (vals, vecs) = eigh_real_symmetric(&a)?;
        let cvecs = vecs.mapv(|x| Complex64::new(x, 0.0));
        return Ok((vals, cvecs));
    }

    let (m, n) = embed_hermitian(h)?;
    let (vals2, w) = eigh_real_symmetric(&m)?;
    // Each complex eigenpair appears twice in the embedding; recover one
    // complex eigenvector per pair by Gram-Schmidt against those accepted.
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Array2::<Complex64>::zeros((n, n));
    let mut accepted = 0;
    for col in 0..2 * n {
        if accepted == n {
            break;
        }
        let mut v: Array1<Complex64> = (0..n)
            .map(|k| Complex64::new(w[[k, col]], w[[n + k, col]]))
            .collect();
        for prev in 0..accepted {
            let overlap: Complex64 = vecs
                .column(prev)
                .iter()
                .zip(v.iter())
                .map(|(p, x)| p.conj() * x)
                .sum();
            for (k, x) in v.iter_mut().enumerate() {
                *x -= overlap * vecs[[k, prev]];
            }
        }
        let norm_sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if norm_sq > 0.25 {
            let inv = 1.0 / norm_sq.sqrt();
            for (k, x) in v.iter().enumerate() {
                vecs[[k, accepted]] = x * inv;
            }
            vals.push(vals2[col]);
            accepted += 1;
        }
    }
    if accepted < n {
        return Err(Error::Numerical(
            "failed to extract complex eigenvectors from real embedding".into(),
        ));
    }
    Ok((vals, vecs))
}

/// Eigenvalues of a complex Hermitian matrix, ascending (each exactly once).
pub fn hermitian_eigenvalues(h: &Array2<Complex64>) -> Result<Vec<f64>> {
    let (m, n) = embed_hermitian(h)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut d: Vec<f64> = (0..2 * n).map(|i| m[[i, i]]).collect();
    let mut z = m;
    let mut e = vec![0.0; 2 * n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    // Doubled spectrum: take every other value.
    Ok(d.into_iter().step_by(2).collect())
}

/// Smallest eigenvalue of a complex Hermitian matrix.
pub fn hermitian_min_eigenvalue(h: &Array2<Complex64>) -> Result<f64> {
    let vals = hermitian_eigenvalues(h)?;
    vals.first()
        .copied()
        .ok_or_else(|| Error::DimensionMismatch("empty matrix".into()))
}

/// Trace distance `½‖a − b‖₁` between two Hermitian matrices.
pub fn trace_distance(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = a - b;
    let vals = hermitian_eigenvalues(&diff)?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// Largest absolute entry difference between two complex matrices.
pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()))
}

// ---------------------------------------------------------------------------
// Exact unitary steps exp(-i H tau) for symmetric tridiagonal H.
// ---------------------------------------------------------------------------

/// Kernel used for the per-step unitary `exp(-i H dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKernel {
    /// Eigendecomposition below [`AUTO_EIGEN_MAX_DIM`], Chebyshev above.
    #[default]
    Auto,
    /// Full eigendecomposition of the step Hamiltonian.
    Eigen,
    /// Chebyshev expansion of the step propagator (machine-precision
    /// truncation, certified by the Bessel coefficient tail).
    Chebyshev,
}

/// Dimension at or below which `StepKernel::Auto` uses the eigendecomposition.
pub const AUTO_EIGEN_MAX_DIM: usize = 12;

/// Truncation target for the Chebyshev coefficient tail.
const CHEB_COEFF_CUTOFF: f64 = 1e-17;

pub(crate) struct UnitaryStepper {
    use_eigen: bool,
    // Chebyshev buffers
    phi_prev: Vec<Complex64>,
    phi: Vec<Complex64>,
    phi_next: Vec<Complex64>,
    acc: Vec<Complex64>,
    scaled_diag: Vec<f64>,
    scaled_off: Vec<f64>,
    // Eigen buffers
    ed: Vec<f64>,
    ee: Vec<f64>,
    ez: Array2<f64>,
    ec: Vec<Complex64>,
}

impl UnitaryStepper {
    pub fn new(kind: StepKernel, dim: usize) -> Self {
        let use_eigen = match kind {
            StepKernel::Eigen => true,
            StepKernel::Chebyshev => false,
            StepKernel::Auto => dim <= AUTO_EIGEN_MAX_DIM,
        };
        Self {
            use_eigen,
            phi_prev: vec![Complex64::default(); dim],
            phi: vec![Complex64::default(); dim],
            phi_next: vec![Complex64::default(); dim],
            acc: vec![Complex64::default(); dim],
            scaled_diag: vec![0.0; dim],
            scaled_off: vec![0.0; dim.saturating_sub(1)],
            ed: vec![0.0; dim],
            ee: vec![0.0; dim],
            ez: Array2::eye(dim),
            ec: vec![Complex64::default(); dim],
        }
    }

    pub fn uses_eigen(&self) -> bool {
        self.use_eigen
    }

    /// In-place `psi <- exp(-i H tau) psi`.
    pub fn apply(&mut self, h: &SymTridiag, tau: f64, psi: &mut [Complex64]) -> Result<()> {
        if self.use_eigen {
            self.apply_eigen(h, tau, psi)
        } else {
            self.apply_chebyshev(h, tau, psi);
            Ok(())
        }
    }

    fn apply_eigen(&mut self, h: &SymTridiag, tau: f64, psi: &mut [Complex64]) -> Result<()> {
        let n = h.dim();
        self.ed.copy_from_slice(&h.diag);
        self.ee[..n - 1].copy_from_slice(&h.off);
        self.ee[n - 1] = 0.0;
        self.ez.fill(0.0);
        for i in 0..n {
            self.ez[[i, i]] = 1.0;
        }
        tql2(&mut self.ed, &mut self.ee, Some(&mut self.ez))?;
        // c = Vᵀ psi, then psi = V (e^{-i λ τ} ∘ c).
        for m in 0..n {
            let mut acc = Complex64::default();
            for k in 0..n {
                acc += psi[k] * self.ez[[k, m]];
            }
            let phase = Complex64::from_polar(1.0, -self.ed[m] * tau);
            self.ec[m] = acc * phase;
        }
        for (k, out) in psi.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for m in 0..n {
                acc += self.ec[m] * self.ez[[k, m]];
            }
            *out = acc;
        }
        Ok(())
    }

    fn apply_chebyshev(&mut self, h: &SymTridiag, tau: f64, psi: &mut [Complex64]) {
        let n = h.dim();
        let (lo, hi) = h.spectral_bounds();
        let center = 0.5 * (hi + lo);
        let half_width = 0.5 * (hi - lo);
        let z = half_width * tau;
        let global_phase = Complex64::from_polar(1.0, -center * tau);
        if z < 1e-12 {
            for x in psi.iter_mut() {
                *x *= global_phase;
            }
            return;
        }
        let inv_a = 1.0 / half_width;
        for i in 0..n {
            self.scaled_diag[i] = (h.diag[i] - center) * inv_a;
            if i + 1 < n {
                self.scaled_off[i] = h.off[i] * inv_a;
            }
        }
        let kmax = z.ceil() as usize + 20 + (12.0 * (z + 1.0).cbrt()).ceil() as usize;
        let bessel = bessel_j_sequence(z, kmax);
        let mut order = kmax;
        for (k, jk) in bessel.iter().enumerate().skip((z.ceil() as usize).max(2)) {
            if jk.abs() < CHEB_COEFF_CUTOFF {
                order = (k + 1).min(kmax);
                break;
            }
        }

        // acc = sum_k c_k T_k(H̃) psi  with c_k = (2 - δ_k0) (-i)^k J_k(z).
        self.phi_prev.copy_from_slice(psi);
        scaled_matvec(&self.scaled_diag, &self.scaled_off, &self.phi_prev, &mut self.phi);
        for i in 0..n {
            self.acc[i] = self.phi_prev[i] * bessel[0]
                + self.phi[i] * Complex64::new(0.0, -2.0 * bessel[1]);
        }
        for k in 2..=order {
            // phi_next = 2 H̃ phi - phi_prev
            scaled_matvec(&self.scaled_diag, &self.scaled_off, &self.phi, &mut self.phi_next);
            for i in 0..n {
                self.phi_next[i] = self.phi_next[i] * 2.0 - self.phi_prev[i];
            }
            let coeff = 2.0 * bessel[k];
            let c = match k % 4 {
                0 => Complex64::new(coeff, 0.0),
                1 => Complex64::new(0.0, -coeff),
                2 => Complex64::new(-coeff, 0.0),
                _ => Complex64::new(0.0, coeff),
            };
            for i in 0..n {
                self.acc[i] += self.phi_next[i] * c;
            }
            std::mem::swap(&mut self.phi_prev, &mut self.phi);
            std::mem::swap(&mut self.phi, &mut self.phi_next);
        }
        for (out, acc) in psi.iter_mut().zip(self.acc.iter()) {
            *out = acc * global_phase;
        }
    }
}

fn scaled_matvec(diag: &[f64], off: &[f64], x: &[Complex64], y: &mut [Complex64]) {
    let n = diag.len();
    for i in 0..n {
        let mut acc = x[i] * diag[i];
        if i > 0 {
            acc += x[i - 1] * off[i - 1];
        }
        if i + 1 < n {
            acc += x[i + 1] * off[i];
        }
        y[i] = acc;
    }
}

/// Bessel functions J_0(z) .. J_kmax(z) by Miller's downward recurrence.
fn bessel_j_sequence(z: f64, kmax: usize) -> Vec<f64> {
    debug_assert!(z > 0.0);
    let start = kmax + 20 + (2.0 * z.sqrt()) as usize;
    let mut out = vec![0.0; kmax + 1];
    let mut jp = 0.0_f64; // J̃_{k+1}
    let mut jc = 1e-280_f64; // J̃_k at k = start
    let mut sum = 0.0_f64; // 2 Σ_{even k} J̃_k (J̃_0 double-counted)
    for k in (0..=start).rev() {
        if k <= kmax {
            out[k] = jc;
        }
        if k % 2 == 0 {
            sum += 2.0 * jc;
        }
        if k > 0 {
            let jm = (2.0 * k as f64 / z) * jc - jp;
            jp = jc;
            jc = jm;
            if jc.abs() > 1e250 {
                jp *= 1e-250;
                jc *= 1e-250;
                sum *= 1e-250;
                for v in out.iter_mut() {
                    *v *= 1e-250;
                }
            }
        }
    }
    let norm = sum - jc; // J_0 + 2 Σ_{even k ≥ 2} J_k = 1; jc holds J̃_0 here.
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
    out
}
