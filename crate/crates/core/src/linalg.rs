//! Dense complex matrices: Schatten norms, Hermitian exponentials, tensor
//! embedding of local operators, commutators and unitary conjugation.
//!
//! Site 0 is the most significant tensor factor everywhere in the crate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Eigenvalues of `M†M` below zero by at most this much are rounding noise.
pub const SPECTRUM_CLAMP: f64 = 1e-14;
/// Relative Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute unitarity tolerance for [`conjugate`].
pub const UNITARY_TOL: f64 = 1e-10;

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            inner: DMatrix::from_fn(dim, dim, f),
        }
    }

    /// Builds a matrix from rows. Rows must all have the matrix dimension.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return invalid("matrix must have at least one row");
        }
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("rows must form a square matrix");
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.inner[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_dmatrix(inner: DMatrix<C64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() || inner.nrows() == 0 {
            return invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                inner.nrows(),
                inner.ncols()
            ));
        }
        Ok(Self { inner })
    }

    pub(crate) fn wrap(inner: DMatrix<C64>) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub(crate) fn as_dmatrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.inner.adjoint())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::wrap(&self.inner * &other.inner))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::wrap(&self.inner + &other.inner))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::wrap(&self.inner - &other.inner))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::wrap(&self.inner * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::wrap(self.inner.kronecker(&other.inner))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max |M[i][j] − conj(M[j][i])|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                worst = worst.max((self.inner[(i, j)] - self.inner[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Hermitian within [`HERMITIAN_TOL`] relative to the spectral norm.
    pub fn is_hermitian(&self) -> bool {
        let defect = self.hermiticity_defect();
        if defect == 0.0 {
            return true;
        }
        match spectral_norm(self) {
            Ok(norm) => defect <= HERMITIAN_TOL * norm,
            Err(_) => false,
        }
    }

    /// Distance of `U†U` from the identity in spectral norm.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let g = self.inner.ad_mul(&self.inner) - DMatrix::<C64>::identity(n, n);
        let fro = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if fro <= UNITARY_TOL {
            return fro;
        }
        spectral_norm(&Self::wrap(g)).unwrap_or(f64::INFINITY)
    }
}

fn same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", a.dim(), b.dim()));
    }
    Ok(())
}

/// Single-qubit Pauli operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> ComplexMatrix {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let rows = match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        };
        ComplexMatrix::from_fn(2, |r, c| rows[r][c])
    }
}

/// Tensor product of Paulis, first factor most significant.
pub fn pauli_string(ops: &[Pauli]) -> ComplexMatrix {
    ops.iter()
        .fold(ComplexMatrix::identity(1), |acc, p| acc.kron(&p.matrix()))
}

/// Singular values, non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if !m.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    Ok(())
}

/// Singular values as square roots of the eigenvalues of `M†M`.
///
/// Negative eigenvalues are rounding noise and are clamped to zero; values
/// more negative than [`SPECTRUM_CLAMP`] relative to the largest are
/// still clamped but indicate a badly conditioned input.
pub fn singular_spectrum(m: &ComplexMatrix) -> Result<SingularSpectrum> {
    check_finite(m)?;
    let mut values: Vec<f64> = match hermitian_rotation(m) {
        // Singular values of a normal matrix are the moduli of its eigenvalues.
        Some(h) => hermitian_eigenvalues_raw(h).into_iter().map(f64::abs).collect(),
        None => hermitian_eigenvalues_raw(m.inner.ad_mul(&m.inner))
            .into_iter()
            .map(|l| l.max(0.0).sqrt())
            .collect(),
    };
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularSpectrum { values })
}

/// `M` itself when Hermitian, `iM` when anti-Hermitian (both within `1e-13`
/// of the largest entry), symmetrized.
fn hermitian_rotation(m: &ComplexMatrix) -> Option<DMatrix<C64>> {
    let n = m.dim();
    let a = &m.inner;
    let scale = a.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let tol = 1e-13 * scale;
    let (mut herm, mut anti) = (0.0f64, 0.0f64);
    for j in 0..n {
        for i in 0..=j {
            let (x, y) = (a[(i, j)], a[(j, i)].conj());
            herm = herm.max((x - y).norm());
            anti = anti.max((x + y).norm());
        }
        if herm > tol && anti > tol {
            return None;
        }
    }
    let half = C64::new(0.5, 0.0);
    if herm <= tol {
        Some((a + a.adjoint()) * half)
    } else {
        Some((a - a.adjoint()) * C64::new(0.0, 0.5))
    }
}

/// Schatten p-norm `(Σ ν_i^p)^{1/p}`; `p = f64::INFINITY` gives the spectral norm.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid(format!("Schatten order must be >= 1, got {p}"));
    }
    let spec = singular_spectrum(m)?;
    Ok(schatten_from_spectrum(&spec.values, p))
}

/// Schatten norm from precomputed singular values, evaluated with scaling.
pub fn schatten_from_spectrum(values: &[f64], p: f64) -> f64 {
    let top = values.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return top;
    }
    let s: f64 = values.iter().map(|v| (v / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

pub fn spectral_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_spectrum(m)?.max())
}

fn hermitian_eigenvalues_raw(h: DMatrix<C64>) -> Vec<f64> {
    if h.nrows() == 1 {
        return vec![h[(0, 0)].re];
    }
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<HermitianEigen> {
    check_finite(h)?;
    let sym = (&h.inner + h.inner.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL * scale && defect > 0.0 {
        return invalid(format!(
            "matrix is not Hermitian (defect {defect:.3e}, norm {scale:.3e})"
        ));
    }
    Ok(HermitianEigen {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors: eig.eigenvectors,
    })
}

/// Returns `exp(−i·scale·H)` by eigendecomposition.
pub fn hermitian_exponential(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(h)?;
    Ok(exp_from_eigen(&eig, scale))
}

/// `exp(−i·scale·H)` from a precomputed eigendecomposition of `H`.
pub fn exp_from_eigen(eig: &HermitianEigen, scale: f64) -> ComplexMatrix {
    let v = &eig.vectors;
    let mut vd = v.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -scale * lam);
        for z in vd.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    ComplexMatrix::wrap(vd * v.adjoint())
}

/// Index bookkeeping for operators acting on a subset of sites.
///
/// Every full basis index splits into a local index (digits on `support`, in
/// the given order, first site most significant) and a rest index. `bases`
/// lists full indices whose support digits vanish; `offsets[l]` adds local
/// index `l` back.
#[derive(Clone, Debug)]
pub struct LocalLayout {
    pub n_sites: usize,
    pub local_dim: usize,
    pub support: Vec<usize>,
    pub offsets: Vec<usize>,
    pub bases: Vec<usize>,
}

impl LocalLayout {
    pub fn new(support: &[usize], n_sites: usize, local_dim: usize) -> Result<Self> {
        if local_dim < 2 {
            return invalid(format!("local dimension must be >= 2, got {local_dim}"));
        }
        if support.is_empty() {
            return invalid("support must be non-empty");
        }
        let mut seen = vec![false; n_sites];
        for &s in support {
            if s >= n_sites {
                return invalid(format!("site {s} outside [0, {n_sites})"));
            }
            if seen[s] {
                return invalid(format!("site {s} repeated in support"));
            }
            seen[s] = true;
        }
        let full = full_dim(n_sites, local_dim)?;
        let stride = |s: usize| local_dim.pow((n_sites - 1 - s) as u32);
        let k = support.len();
        let local = local_dim.pow(k as u32);
        let offsets = (0..local)
            .map(|l| {
                let mut rem = l;
                let mut off = 0;
                for pos in (0..k).rev() {
                    off += (rem % local_dim) * stride(support[pos]);
                    rem /= local_dim;
                }
                off
            })
            .collect();
        let bases = (0..full)
            .filter(|&i| support.iter().all(|&s| (i / stride(s)) % local_dim == 0))
            .collect();
        Ok(Self {
            n_sites,
            local_dim,
            support: support.to_vec(),
            offsets,
            bases,
        })
    }

    pub fn local_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn full_size(&self) -> usize {
        self.offsets.len() * self.bases.len()
    }
}

pub(crate) fn full_dim(n_sites: usize, local_dim: usize) -> Result<usize> {
    (local_dim as u128)
        .checked_pow(n_sites as u32)
        .filter(|&d| d <= usize::MAX as u128 / 2)
        .map(|d| d as usize)
        .ok_or_else(|| Error::Resource {
            what: format!("{local_dim}^{n_sites} Hilbert space"),
            required: u128::MAX,
            allowed: usize::MAX as u128,
        })
}

/// Embeds `op` acting on `support` into the full `D^N` space as `op ⊗ I`.
pub fn embed_local(op: &ComplexMatrix, support: &[usize], n_sites: usize, local_dim: usize) -> Result<ComplexMatrix> {
    let layout = LocalLayout::new(support, n_sites, local_dim)?;
    embed_with_layout(op, &layout)
}

pub fn embed_with_layout(op: &ComplexMatrix, layout: &LocalLayout) -> Result<ComplexMatrix> {
    if op.dim() != layout.local_size() {
        return invalid(format!(
            "operator dimension {} does not match {}^{}",
            op.dim(),
            layout.local_dim,
            layout.support.len()
        ));
    }
    let n = layout.full_size();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for &base in &layout.bases {
        for (l, &ol) in layout.offsets.iter().enumerate() {
            for (m, &om) in layout.offsets.iter().enumerate() {
                let z = op.inner[(l, m)];
                if z != C64::new(0.0, 0.0) {
                    out[(base + ol, base + om)] = z;
                }
            }
        }
    }
    Ok(ComplexMatrix::wrap(out))
}

/// In place `O ← G O G†` for a local `G` described by `layout`, without
/// forming the embedded operator.
pub fn conjugate_local_in_place(o: &mut ComplexMatrix, g: &ComplexMatrix, layout: &LocalLayout) {
    let n = o.dim();
    let k = layout.local_size();
    debug_assert_eq!(n, layout.full_size());
    debug_assert_eq!(g.dim(), k);
    // Row-major copies of G and conj(G).
    let gf: Vec<C64> = (0..k * k).map(|x| g.inner[(x / k, x % k)]).collect();
    let gc: Vec<C64> = gf.iter().map(|z| z.conj()).collect();
    let offsets = &layout.offsets;
    let data = o.inner.as_mut_slice();
    let mut v = vec![C64::new(0.0, 0.0); k];
    // Left multiplication: act on row indices of every column.
    for col in data.chunks_exact_mut(n) {
        for &base in &layout.bases {
            for (vl, &off) in v.iter_mut().zip(offsets) {
                *vl = col[base + off];
            }
            for (row, &off) in gf.chunks_exact(k).zip(offsets) {
                col[base + off] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            }
        }
    }
    // Right multiplication by G†: column base+off[l] ← Σ_m conj(G[l,m]) column base+off[m].
    let mut tmp = vec![C64::new(0.0, 0.0); k * n];
    for &base in &layout.bases {
        for (m, &off) in offsets.iter().enumerate() {
            let c = base + off;
            tmp[m * n..(m + 1) * n].copy_from_slice(&data[c * n..(c + 1) * n]);
        }
        for (row, &off) in gc.chunks_exact(k).zip(offsets) {
            let c = base + off;
            let col = &mut data[c * n..(c + 1) * n];
            col.fill(C64::new(0.0, 0.0));
            for (&w, src) in row.iter().zip(tmp.chunks_exact(n)) {
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for (z, s) in col.iter_mut().zip(src) {
                    *z += w * s;
                }
            }
        }
    }
}

/// `AB − BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    same_dim(a, b)?;
    let n = a.dim();
    let zero = C64::new(0.0, 0.0);
    let nonzeros: Vec<(usize, usize, C64)> = b
        .inner
        .column_iter()
        .enumerate()
        .flat_map(|(j, col)| {
            col.iter()
                .enumerate()
                .filter(|(_, v)| **v != zero)
                .map(move |(i, v)| (i, j, *v))
                .collect::<Vec<_>>()
        })
        .take(4 * n + 1)
        .collect();
    if nonzeros.len() > 4 * n {
        return Ok(ComplexMatrix::wrap(&a.inner * &b.inner - &b.inner * &a.inner));
    }
    // Sparse `b` (e.g. an embedded local Pauli): O(n² · nnz/n) work.
    let mut out = DMatrix::<C64>::zeros(n, n);
    for &(i, j, v) in &nonzeros {
        // (AB)[:, j] += A[:, i] v
        out.column_mut(j).axpy(v, &a.inner.column(i), C64::new(1.0, 0.0));
        // (BA)[i, :] += v A[j, :]
        for c in 0..n {
            out[(i, c)] -= v * a.inner[(j, c)];
        }
    }
    Ok(ComplexMatrix::wrap(out))
}

/// `U O U†`, rejecting `U` that is not unitary within [`UNITARY_TOL`].
pub fn conjugate(u: &ComplexMatrix, o: &ComplexMatrix) -> Result<ComplexMatrix> {
    same_dim(u, o)?;
    let defect = u.unitarity_defect();
    if defect > UNITARY_TOL {
        return invalid(format!("conjugating matrix is not unitary (defect {defect:.3e})"));
    }
    Ok(conjugate_trusted(u, o))
}

/// `U O U†` without the unitarity check, for unitaries built internally.
pub(crate) fn conjugate_trusted(u: &ComplexMatrix, o: &ComplexMatrix) -> ComplexMatrix {
    let uo = &u.inner * &o.inner;
    ComplexMatrix::wrap(uo * u.inner.adjoint())
}
