//! Dense linear algebra on a bipartite system ⊗ bath Hilbert space.
//!
//! Every operator is a dense `Mat<c64>`. Global basis vectors are ordered with
//! the system index slowest: `i = s * d_b + b`, so tracing out the bath is a
//! strided sum over contiguous blocks.
//!
//! The trace norm is the plain sum of singular values with no factor of one
//! half; trace distances quoted anywhere in this crate range over `[0, 2]`.

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::diag::Diag;
use faer::{c64, Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by every invariant check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max-abs entry of `X - X†`, relative to the max-abs entry of `X`.
    pub hermiticity: f64,
    /// Allowed deviation of a density-matrix trace from one.
    pub trace: f64,
    /// Most negative eigenvalue accepted as numerically positive (as a magnitude).
    pub positivity: f64,
    /// Allowed deviation of a pure-state norm from one.
    pub normalization: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    hermiticity: 1e-12,
    trace: 1e-10,
    positivity: 1e-10,
    normalization: 1e-12,
};

/// Dimensions of the system and bath factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceShape {
    d_s: usize,
    d_b: usize,
}

impl SpaceShape {
    pub fn new(d_s: usize, d_b: usize) -> Result<Self> {
        if d_s < 2 || d_b < 2 {
            return Err(Error::Dimension(format!(
                "system and bath dimensions must both be at least 2 (got {d_s} and {d_b})"
            )));
        }
        Ok(Self { d_s, d_b })
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn total(&self) -> usize {
        self.d_s * self.d_b
    }

    #[inline]
    pub fn index(&self, s: usize, b: usize) -> usize {
        s * self.d_b + b
    }

    #[inline]
    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.d_b, i % self.d_b)
    }
}

/// Which space an operator or state lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    System(usize),
    Bath(usize),
    Global(SpaceShape),
}

impl Space {
    pub fn dim(&self) -> usize {
        match *self {
            Space::System(d) | Space::Bath(d) => d,
            Space::Global(shape) => shape.total(),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator on a declared space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: Space,
    matrix: Mat<c64>,
}

impl DensityMatrix {
    /// Validates every invariant. Positivity costs one Hermitian eigensolve.
    pub fn new(space: Space, matrix: Mat<c64>) -> Result<Self> {
        let rho = Self::from_parts(space, matrix)?;
        rho.check_positive()?;
        Ok(rho)
    }

    /// Validates shape, hermiticity and trace but skips the positivity
    /// eigensolve; for matrices positive by construction (convex combinations
    /// of reduced states, projectors).
    pub(crate) fn from_parts(space: Space, matrix: Mat<c64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for a space of dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_hermitian(matrix.as_ref())?;
        let tr = trace(matrix.as_ref()).re;
        if (tr - 1.0).abs() > TOLERANCES.trace || !tr.is_finite() {
            return Err(Error::InvalidTrace {
                trace: tr,
                tolerance: TOLERANCES.trace,
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            space: psi.space,
            matrix: psi.projector(),
        }
    }

    pub fn maximally_mixed(space: Space) -> Self {
        let d = space.dim();
        let mut matrix = Mat::<c64>::zeros(d, d);
        for i in 0..d {
            matrix[(i, i)] = c64::new(1.0 / d as f64, 0.0);
        }
        Self { space, matrix }
    }

    /// `ρ_S ⊗ ρ_B` on the global space.
    pub fn product(system: &DensityMatrix, bath: &DensityMatrix) -> Result<Self> {
        let (Space::System(d_s), Space::Bath(d_b)) = (system.space, bath.space) else {
            return Err(Error::Dimension(
                "product state needs a system factor and a bath factor".into(),
            ));
        };
        let shape = SpaceShape::new(d_s, d_b)?;
        Ok(Self {
            space: Space::Global(shape),
            matrix: tensor_product(system.matrix(), bath.matrix())?,
        })
    }

    /// Convex mixture `Σ w_i ρ_i` of states on the same space.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::Precondition("empty mixture".into()));
        };
        let d = first.dim();
        let mut matrix = Mat::<c64>::zeros(d, d);
        for (w, rho) in parts {
            if rho.space != first.space {
                return Err(Error::Dimension("mixture of states on different spaces".into()));
            }
            if *w < 0.0 {
                return Err(Error::Precondition("negative mixture weight".into()));
            }
            matrix += Mat::<c64>::from_fn(d, d, |i, j| rho.matrix[(i, j)] * *w);
        }
        Self::from_parts(first.space, matrix)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigvalsh(self.matrix.as_ref())?
            .first()
            .copied()
            .unwrap_or(0.0))
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += self.matrix[(i, j)].norm_sqr();
            }
        }
        acc
    }

    fn check_positive(&self) -> Result<()> {
        let min = self.min_eigenvalue()?;
        if min < -TOLERANCES.positivity {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }
}

/// Unit vector on a declared space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    space: Space,
    amplitudes: Vec<c64>,
}

impl PureState {
    pub fn new(space: Space, amplitudes: Vec<c64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm = vector_norm(&amplitudes);
        if (norm - 1.0).abs() > TOLERANCES.normalization {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { space, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(space: Space, mut amplitudes: Vec<c64>) -> Result<Self> {
        let norm = vector_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::new(space, amplitudes)
    }

    pub fn basis(space: Space, index: usize) -> Result<Self> {
        let d = space.dim();
        if index >= d {
            return Err(Error::IndexOutOfRange { index, len: d });
        }
        let mut amplitudes = vec![c64::new(0.0, 0.0); d];
        amplitudes[index] = c64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    /// `|ψ_S⟩ ⊗ |φ_B⟩`.
    pub fn product(system: &PureState, bath: &PureState) -> Result<Self> {
        let (Space::System(d_s), Space::Bath(d_b)) = (system.space, bath.space) else {
            return Err(Error::Dimension(
                "product state needs a system factor and a bath factor".into(),
            ));
        };
        let shape = SpaceShape::new(d_s, d_b)?;
        let mut amplitudes = Vec::with_capacity(shape.total());
        for s in &system.amplitudes {
            for b in &bath.amplitudes {
                amplitudes.push(s * b);
            }
        }
        Ok(Self {
            space: Space::Global(shape),
            amplitudes,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn projector(&self) -> Mat<c64> {
        let d = self.amplitudes.len();
        Mat::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }
}

/// A global state handed to the equilibration maps: pure states skip the
/// `O(d³)` basis rotation that a dense density matrix needs.
#[derive(Clone, Debug)]
pub enum GlobalState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl GlobalState {
    pub fn space(&self) -> Space {
        match self {
            GlobalState::Pure(psi) => psi.space(),
            GlobalState::Mixed(rho) => rho.space(),
        }
    }
}

impl From<PureState> for GlobalState {
    fn from(psi: PureState) -> Self {
        GlobalState::Pure(psi)
    }
}

impl From<DensityMatrix> for GlobalState {
    fn from(rho: DensityMatrix) -> Self {
        GlobalState::Mixed(rho)
    }
}

/// `Tr_B ρ` for a global density matrix.
pub fn partial_trace_bath(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let Space::Global(shape) = rho.space() else {
        return Err(Error::Dimension(
            "partial trace over the bath needs a global state".into(),
        ));
    };
    let sigma = partial_trace_bath_op(rho.matrix(), shape)?;
    let sigma = DensityMatrix::from_parts(Space::System(shape.d_s()), sigma)?;
    sigma.check_positive()?;
    Ok(sigma)
}

/// `Tr_B X` for an arbitrary global operator: `σ[s,s'] = Σ_b X[s·d_B+b, s'·d_B+b]`.
pub fn partial_trace_bath_op(x: MatRef<'_, c64>, shape: SpaceShape) -> Result<Mat<c64>> {
    let d = shape.total();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension(format!(
            "{}x{} operator for global dimension {} = {} x {}",
            x.nrows(),
            x.ncols(),
            d,
            shape.d_s(),
            shape.d_b()
        )));
    }
    let (d_s, d_b) = (shape.d_s(), shape.d_b());
    Ok(Mat::from_fn(d_s, d_s, |s, t| {
        let mut acc = c64::new(0.0, 0.0);
        for b in 0..d_b {
            acc += x[(s * d_b + b, t * d_b + b)];
        }
        acc
    }))
}

/// `Tr_B |ψ⟩⟨ψ|` computed directly from amplitudes in `O(d_S² d_B)`.
pub fn partial_trace_pure(amplitudes: &[c64], shape: SpaceShape) -> Mat<c64> {
    let (d_s, d_b) = (shape.d_s(), shape.d_b());
    debug_assert_eq!(amplitudes.len(), d_s * d_b);
    let mut sigma = Mat::<c64>::zeros(d_s, d_s);
    for s in 0..d_s {
        let row_s = &amplitudes[s * d_b..(s + 1) * d_b];
        for t in s..d_s {
            let row_t = &amplitudes[t * d_b..(t + 1) * d_b];
            let mut acc = c64::new(0.0, 0.0);
            for (a, b) in row_s.iter().zip(row_t) {
                acc += a * b.conj();
            }
            sigma[(s, t)] = acc;
            sigma[(t, s)] = acc.conj();
        }
        sigma[(s, s)].im = 0.0;
    }
    sigma
}

/// `Tr_B |ψ⟩⟨φ|`, the off-diagonal generalization used for degenerate blocks.
pub fn partial_trace_outer(psi: &[c64], phi: &[c64], shape: SpaceShape) -> Mat<c64> {
    let (d_s, d_b) = (shape.d_s(), shape.d_b());
    Mat::from_fn(d_s, d_s, |s, t| {
        let mut acc = c64::new(0.0, 0.0);
        for b in 0..d_b {
            acc += psi[s * d_b + b] * phi[t * d_b + b].conj();
        }
        acc
    })
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(x: MatRef<'_, c64>) -> Result<f64> {
    check_square(x)?;
    check_hermitian(x)?;
    Ok(trace_norm_unchecked(x))
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn operator_norm(x: MatRef<'_, c64>) -> Result<f64> {
    check_square(x)?;
    check_hermitian(x)?;
    match x.nrows() {
        0 => Ok(0.0),
        1 => Ok(x[(0, 0)].re.abs()),
        2 => {
            let (lo, hi) = eig2(x);
            Ok(lo.abs().max(hi.abs()))
        }
        _ => {
            let values = eigvalsh(x)?;
            Ok(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        }
    }
}

/// `‖a − b‖₁` for Hermitian `a`, `b`.
pub fn trace_distance(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    trace_norm(diff.as_ref())
}

pub(crate) fn trace_norm_unchecked(x: MatRef<'_, c64>) -> f64 {
    match x.nrows() {
        0 => 0.0,
        1 => x[(0, 0)].re.abs(),
        2 => {
            let (lo, hi) = eig2(x);
            lo.abs() + hi.abs()
        }
        _ => match eigvalsh(x) {
            Ok(values) => values.iter().map(|v| v.abs()).sum(),
            Err(_) => f64::NAN,
        },
    }
}

/// Trace distance between two Hermitian matrices without input validation.
pub(crate) fn trace_distance_unchecked(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    trace_norm_unchecked(diff.as_ref())
}

/// Closed-form eigenvalues of a 2x2 Hermitian matrix, ascending.
fn eig2(x: MatRef<'_, c64>) -> (f64, f64) {
    let a = x[(0, 0)].re;
    let d = x[(1, 1)].re;
    let off = 0.5 * (x[(0, 1)] + x[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt();
    (mean - radius, mean + radius)
}

/// Kronecker product `A ⊗ B` with `(A⊗B)[i·d_B+k, j·d_B+l] = A[i,j]·B[k,l]`.
pub fn tensor_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
    check_square(a)?;
    check_square(b)?;
    let (da, db) = (a.nrows(), b.nrows());
    Ok(Mat::from_fn(da * db, da * db, |i, j| {
        a[(i / db, j / db)] * b[(i % db, j % db)]
    }))
}

/// Max-abs entry of `X − X†`.
pub fn hermiticity_residual(x: MatRef<'_, c64>) -> f64 {
    let n = x.nrows().min(x.ncols());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((x[(i, j)] - x[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs(x: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            worst = worst.max(x[(i, j)].norm());
        }
    }
    worst
}

pub(crate) fn check_hermitian(x: MatRef<'_, c64>) -> Result<()> {
    let residual = hermiticity_residual(x);
    let tolerance = TOLERANCES.hermiticity * max_abs(x);
    if residual > tolerance || !residual.is_finite() {
        return Err(Error::NotHermitian {
            residual,
            tolerance,
        });
    }
    Ok(())
}

fn check_square(x: MatRef<'_, c64>) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

pub fn trace(x: MatRef<'_, c64>) -> c64 {
    (0..x.nrows().min(x.ncols())).map(|i| x[(i, i)]).sum()
}

/// `(X + X†)/2`, used after products that only preserve hermiticity up to rounding.
pub fn hermitian_part(x: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| {
        0.5 * (x[(i, j)] + x[(j, i)].conj())
    })
}

pub(crate) fn vector_norm(v: &[c64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Sequential dense product. Results never depend on thread count.
pub fn matmul_seq(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(a.nrows(), b.ncols());
    matmul(
        out.as_mut(),
        Accum::Replace,
        a,
        b,
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    out
}

/// Sequential `A† B`.
pub fn adjoint_matmul_seq(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(a.ncols(), b.ncols());
    matmul(
        out.as_mut(),
        Accum::Replace,
        a.adjoint(),
        b,
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    out
}

/// Sequential `A B†`.
pub fn matmul_adjoint_seq(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(a.nrows(), b.nrows());
    matmul(
        out.as_mut(),
        Accum::Replace,
        a,
        b.adjoint(),
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    out
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Mat<c64>,
}

/// Hermitian eigensolver, run sequentially so that output bits do not depend
/// on the worker pool.
pub fn eigh(x: MatRef<'_, c64>) -> Result<HermitianEigen> {
    check_square(x)?;
    let n = x.nrows();
    let mut values = Diag::<c64>::zeros(n);
    let mut vectors = Mat::<c64>::zeros(n, n);
    let par = Par::Seq;
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<c64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        x,
        values.as_mut(),
        Some(vectors.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Numeric(format!("Hermitian eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = values.column_vector().iter().map(|z| z.re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigensolver returned non-finite eigenvalues".into()));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(x: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_square(x)?;
    let n = x.nrows();
    let mut values = Diag::<c64>::zeros(n);
    let par = Par::Seq;
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<c64>(
        n,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        x,
        values.as_mut(),
        None,
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Numeric(format!("Hermitian eigensolver failed: {e:?}")))?;
    let mut values: Vec<f64> = values.column_vector().iter().map(|z| z.re).collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Spectral projector `Σ_k v_k v_k†` over the selected eigenvector columns.
pub fn projector_from_columns(vectors: MatRef<'_, c64>, columns: &[usize]) -> Mat<c64> {
    let d = vectors.nrows();
    let mut p = Mat::<c64>::zeros(d, d);
    for &k in columns {
        for j in 0..d {
            let vj = vectors[(j, k)].conj();
            for i in 0..d {
                p[(i, j)] += vectors[(i, k)] * vj;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn pure_rho(v: &[c64]) -> Mat<c64> {
        let d = v.len();
        Mat::from_fn(d, d, |i, j| v[i] * v[j].conj())
    }

    #[test]
    fn shape_rejects_trivial_factors() {
        assert!(SpaceShape::new(1, 4).is_err());
        assert!(SpaceShape::new(2, 1).is_err());
        let shape = SpaceShape::new(2, 3).unwrap();
        assert_eq!(shape.index(1, 2), 5);
        assert_eq!(shape.split(5), (1, 2));
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let shape = SpaceShape::new(2, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::new(
            Space::Global(shape),
            vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)],
        )
        .unwrap();
        let sigma = partial_trace_bath(&DensityMatrix::from_pure(&bell)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((sigma.matrix()[(i, j)] - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn product_state_reduces_to_system_factor() {
        let rho_s = DensityMatrix::new(
            Space::System(2),
            Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => c(0.7, 0.0),
                (1, 1) => c(0.3, 0.0),
                (0, 1) => c(0.1, -0.2),
                _ => c(0.1, 0.2),
            }),
        )
        .unwrap();
        let rho_b = DensityMatrix::maximally_mixed(Space::Bath(3));
        let global = DensityMatrix::product(&rho_s, &rho_b).unwrap();
        let sigma = partial_trace_bath(&global).unwrap();
        let dist = trace_distance(sigma.matrix(), rho_s.matrix()).unwrap();
        assert!(dist < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_wrong_dimension() {
        let shape = SpaceShape::new(2, 3).unwrap();
        let x = Mat::<c64>::zeros(5, 5);
        assert!(matches!(
            partial_trace_bath_op(x.as_ref(), shape),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn trace_norm_known_values() {
        let zero = Mat::<c64>::zeros(3, 3);
        assert_eq!(trace_norm(zero.as_ref()).unwrap(), 0.0);

        let z = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(1.0, 0.0),
            (1, 1) => c(-1.0, 0.0),
            _ => c(0.0, 0.0),
        });
        assert!((trace_norm(z.as_ref()).unwrap() - 2.0).abs() < 1e-15);

        // |0⟩⟨0| − |+⟩⟨+| has eigenvalues ±1/√2.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let zero_proj = pure_rho(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let plus_proj = pure_rho(&[c(h, 0.0), c(h, 0.0)]);
        let d = trace_distance(zero_proj.as_ref(), plus_proj.as_ref()).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-14, "{d}");
    }

    #[test]
    fn trace_norm_rejects_non_hermitian() {
        let x = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(matches!(trace_norm(x.as_ref()), Err(Error::NotHermitian { .. })));
        assert!(matches!(operator_norm(x.as_ref()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn operator_norm_known_values() {
        let id = Mat::<c64>::identity(5, 5);
        assert!((operator_norm(id.as_ref()).unwrap() - 1.0).abs() < 1e-14);
        let d = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(-3.0, 0.0),
            (1, 1) => c(2.0, 0.0),
            _ => c(0.0, 0.0),
        });
        assert_eq!(operator_norm(d.as_ref()).unwrap(), 3.0);
    }

    #[test]
    fn tensor_identity_and_trace() {
        let i2 = Mat::<c64>::identity(2, 2);
        let i4 = tensor_product(i2.as_ref(), i2.as_ref()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(i4[(i, j)], c(expect, 0.0));
            }
        }
        let a = Mat::from_fn(2, 2, |i, j| c(1.0 + i as f64, j as f64 - 0.5));
        let b = Mat::from_fn(2, 2, |i, j| c(0.3 * j as f64, 2.0 - i as f64));
        let ab = tensor_product(a.as_ref(), b.as_ref()).unwrap();
        let lhs = trace(ab.as_ref());
        let rhs = trace(a.as_ref()) * trace(b.as_ref());
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = Mat::<c64>::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(Space::System(2), bad_trace),
            Err(Error::InvalidTrace { .. })
        ));
        let negative = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(1.5, 0.0),
            (1, 1) => c(-0.5, 0.0),
            _ => c(0.0, 0.0),
        });
        assert!(matches!(
            DensityMatrix::new(Space::System(2), negative),
            Err(Error::NotPositive { .. })
        ));
        assert!(PureState::new(Space::System(2), vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let x = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c([3.0, 1.0, 2.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let e = eigh(x.as_ref()).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(2, 1)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 2)].norm() - 1.0).abs() < 1e-15);
    }
}
