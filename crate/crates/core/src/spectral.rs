//! Exact diagonalization, eigenstate reduced states `τ_n = Tr_B |n><n|`, the
//! dephasing map and its reduced form `Φ_S(ρ) = Σ_n p_n τ_n`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    self, DensityMatrix, GlobalState, PureState, Space, SpaceShape, TOLERANCES,
};
use crate::models::{ModelSpec, SplitHamiltonian};

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Eigen-decomposition of a global Hamiltonian.
#[derive(Debug)]
pub struct SpectralData {
    shape: SpaceShape,
    energies: Vec<f64>,
    eigenvectors: Mat<c64>,
    /// Half-open index ranges of (numerically) degenerate eigenvalues.
    classes: Vec<(usize, usize)>,
    model_hash: String,
    /// `d * d_S^2` entries, `τ_n` row-major at offset `n * d_S^2`.
    tau: OnceLock<Vec<c64>>,
}

impl Clone for SpectralData {
    fn clone(&self) -> Self {
        let tau = OnceLock::new();
        if let Some(t) = self.tau.get() {
            let _ = tau.set(t.clone());
        }
        Self {
            shape: self.shape,
            energies: self.energies.clone(),
            eigenvectors: self.eigenvectors.clone(),
            classes: self.classes.clone(),
            model_hash: self.model_hash.clone(),
            tau,
        }
    }
}

/// Diagnostics of a decomposition.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub max_residual: f64,
    pub norm_h: f64,
    pub max_orthonormality_error: f64,
}

pub fn diagonalize(h: &SplitHamiltonian) -> Result<SpectralData> {
    diagonalize_matrix(h.h.as_ref(), h.shape, h.model_hash.clone())
}

/// Diagonalizes an arbitrary Hermitian global matrix.
pub fn diagonalize_matrix(h: MatRef<'_, c64>, shape: SpaceShape, model_hash: String) -> Result<SpectralData> {
    if h.nrows() != shape.total() || h.ncols() != shape.total() {
        return Err(Error::Dimension(format!(
            "{}x{} Hamiltonian for global dimension {}",
            h.nrows(),
            h.ncols(),
            shape.total()
        )));
    }
    hilbert::check_hermitian(h)?;
    let eig = hilbert::eigh(h)?;
    let mut vectors = eig.vectors;
    fix_gauge(&mut vectors);
    let sd = SpectralData::from_parts(shape, eig.values, vectors, model_hash)?;
    let diag = sd.diagnostics(h);
    if diag.max_residual > RESIDUAL_TOLERANCE * diag.norm_h.max(1.0)
        || diag.max_orthonormality_error > ORTHONORMALITY_TOLERANCE
    {
        return Err(Error::Numeric(format!(
            "eigendecomposition failed checks: residual {:.3e} (norm {:.3e}), orthonormality error {:.3e}",
            diag.max_residual, diag.norm_h, diag.max_orthonormality_error
        )));
    }
    Ok(sd)
}

/// Rotates every column so that its largest-magnitude entry is real positive.
/// Ties go to the lowest row index.
fn fix_gauge(v: &mut Mat<c64>) {
    for n in 0..v.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..v.nrows() {
            let a = v[(i, n)].norm();
            if a > best_abs * (1.0 + 1e-12) {
                best = i;
                best_abs = a;
            }
        }
        if best_abs <= 0.0 {
            continue;
        }
        let phase = v[(best, n)].conj() / best_abs;
        for i in 0..v.nrows() {
            v[(i, n)] *= phase;
        }
        v[(best, n)] = c64::new(v[(best, n)].re, 0.0);
    }
}

impl SpectralData {
    pub(crate) fn from_parts(
        shape: SpaceShape,
        energies: Vec<f64>,
        eigenvectors: Mat<c64>,
        model_hash: String,
    ) -> Result<Self> {
        let d = shape.total();
        if energies.len() != d || eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(Error::Dimension("spectral data does not match its shape".into()));
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Numeric("energies are not sorted ascending".into()));
        }
        let norm_h = energies
            .iter()
            .fold(0.0_f64, |m, e| m.max(e.abs()));
        let classes = degeneracy_classes(&energies, DEGENERACY_TOLERANCE * norm_h.max(1.0));
        Ok(Self {
            shape,
            energies,
            eigenvectors,
            classes,
            model_hash,
            tau: OnceLock::new(),
        })
    }

    pub fn shape(&self) -> SpaceShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenvectors(&self) -> MatRef<'_, c64> {
        self.eigenvectors.as_ref()
    }

    pub fn eigenvector(&self, n: usize) -> &[c64] {
        self.eigenvectors
            .col(n)
            .try_as_col_major()
            .expect("owned matrices are column-major")
            .as_slice()
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn norm_h(&self) -> f64 {
        self.energies.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    /// Degenerate groups as half-open index ranges, singletons included.
    pub fn degeneracy_classes(&self) -> &[(usize, usize)] {
        &self.classes
    }

    pub fn is_degenerate(&self) -> bool {
        self.classes.iter().any(|(a, b)| b - a > 1)
    }

    pub fn diagnostics(&self, h: MatRef<'_, c64>) -> EigenDiagnostics {
        let v = self.eigenvectors.as_ref();
        let hv = hilbert::matmul_seq(h, v);
        let mut max_residual = 0.0_f64;
        for n in 0..self.dim() {
            let mut r = 0.0;
            for i in 0..self.dim() {
                r += (hv[(i, n)] - v[(i, n)] * self.energies[n]).norm_sqr();
            }
            max_residual = max_residual.max(r.sqrt());
        }
        let gram = hilbert::adjoint_matmul_seq(v, v);
        let mut max_orth = 0.0_f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                let delta = if i == j { 1.0 } else { 0.0 };
                max_orth = max_orth.max((gram[(i, j)] - delta).norm());
            }
        }
        EigenDiagnostics {
            max_residual,
            norm_h: self.norm_h(),
            max_orthonormality_error: max_orth,
        }
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.dim(),
            });
        }
        Ok(())
    }

    /// All `τ_n` stored contiguously, computed once.
    pub fn tau_table(&self) -> &[c64] {
        self.tau.get_or_init(|| {
            let d_s = self.shape.d_s();
            let block = d_s * d_s;
            let mut table = vec![c64::new(0.0, 0.0); self.dim() * block];
            table
                .par_chunks_mut(block)
                .enumerate()
                .for_each(|(n, out)| {
                    let tau = hilbert::partial_trace_pure(self.eigenvector(n), self.shape);
                    for s in 0..d_s {
                        for t in 0..d_s {
                            out[s * d_s + t] = tau[(s, t)];
                        }
                    }
                });
            table
        })
    }

    pub(crate) fn tau_slice(&self, n: usize) -> &[c64] {
        let block = self.shape.d_s() * self.shape.d_s();
        &self.tau_table()[n * block..(n + 1) * block]
    }

    pub fn tau_mat(&self, n: usize) -> Mat<c64> {
        let d_s = self.shape.d_s();
        let t = self.tau_slice(n);
        Mat::from_fn(d_s, d_s, |i, j| t[i * d_s + j])
    }

    /// Preloads a τ table read from disk.
    pub(crate) fn set_tau_table(&self, table: Vec<c64>) -> Result<()> {
        let expected = self.dim() * self.shape.d_s() * self.shape.d_s();
        if table.len() != expected {
            return Err(Error::Malformed(format!(
                "tau table has {} entries, expected {expected}",
                table.len()
            )));
        }
        let _ = self.tau.set(table);
        Ok(())
    }

    pub fn has_tau_table(&self) -> bool {
        self.tau.get().is_some()
    }

    /// Indices with energies in the inclusive window `[lo, hi]`.
    pub fn indices_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.energies.partition_point(|&e| e < lo);
        let b = self.energies.partition_point(|&e| e <= hi);
        a..b.max(a)
    }
}

fn degeneracy_classes(energies: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut classes = Vec::new();
    let mut start = 0;
    for n in 1..=energies.len() {
        if n == energies.len() || energies[n] - energies[n - 1] > tol {
            classes.push((start, n));
            start = n;
        }
    }
    classes
}

/// `τ_n = Tr_B |n><n|`.
pub fn eigenstate_reduced(sd: &SpectralData, n: usize) -> Result<DensityMatrix> {
    sd.check_index(n)?;
    DensityMatrix::from_parts(Space::System(sd.shape.d_s()), sd.tau_mat(n))
}

/// Coherences kept inside one degenerate energy class.
#[derive(Clone, Debug)]
pub struct DegenerateBlock {
    pub start: usize,
    /// `⟨a|ρ|b⟩` for `a, b` in `start..start + len`.
    pub matrix: Mat<c64>,
}

/// Infinite-time average of a state, expressed in the energy eigenbasis.
#[derive(Clone, Debug)]
pub struct DiagonalEnsemble {
    pub probabilities: Vec<f64>,
    pub blocks: Vec<DegenerateBlock>,
    /// Set when some block of size > 1 carries coherences.
    pub degenerate: bool,
    pub model_hash: String,
}

impl DiagonalEnsemble {
    fn validate(self) -> Result<Self> {
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > TOLERANCES.trace {
            return Err(Error::InvalidTrace {
                trace: total,
                tolerance: TOLERANCES.trace,
            });
        }
        if let Some(&min) = self.probabilities.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -1e-12 {
                return Err(Error::NotPositive { min_eigenvalue: min });
            }
        }
        Ok(self)
    }

    /// Applies the dephasing map again to a probability vector; the identity.
    pub fn dephase_again(&self) -> Vec<f64> {
        self.probabilities.clone()
    }
}

/// Dephasing of a global density matrix: diagonal weights plus intra-class
/// coherences. One `O(d³)` rotation.
pub fn dephase(rho: &DensityMatrix, sd: &SpectralData) -> Result<DiagonalEnsemble> {
    check_state_shape(rho.space(), sd)?;
    let v = sd.eigenvectors();
    let rv = hilbert::matmul_seq(rho.matrix(), v);
    let d = sd.dim();
    let element = |a: usize, b: usize| -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..d {
            acc += v[(i, a)].conj() * rv[(i, b)];
        }
        acc
    };
    let probabilities: Vec<f64> = (0..d).map(|n| element(n, n).re).collect();
    let blocks = sd
        .degeneracy_classes()
        .iter()
        .filter(|(a, b)| b - a > 1)
        .map(|&(a, b)| DegenerateBlock {
            start: a,
            matrix: Mat::from_fn(b - a, b - a, |i, j| element(a + i, a + j)),
        })
        .collect::<Vec<_>>();
    DiagonalEnsemble {
        degenerate: !blocks.is_empty(),
        probabilities,
        blocks,
        model_hash: sd.model_hash.clone(),
    }
    .validate()
}

/// Dephasing of a pure state from its eigenbasis amplitudes, `O(d²)`.
pub fn dephase_pure(psi: &PureState, sd: &SpectralData) -> Result<DiagonalEnsemble> {
    check_state_shape(psi.space(), sd)?;
    let c = eigen_amplitudes(psi.amplitudes(), sd);
    let probabilities = c.iter().map(|a| a.norm_sqr()).collect();
    let blocks = sd
        .degeneracy_classes()
        .iter()
        .filter(|(a, b)| b - a > 1)
        .map(|&(a, b)| DegenerateBlock {
            start: a,
            matrix: Mat::from_fn(b - a, b - a, |i, j| c[a + i] * c[a + j].conj()),
        })
        .collect::<Vec<_>>();
    DiagonalEnsemble {
        degenerate: !blocks.is_empty(),
        probabilities,
        blocks,
        model_hash: sd.model_hash.clone(),
    }
    .validate()
}

/// `c_n = ⟨n|ψ⟩`.
pub fn eigen_amplitudes(psi: &[c64], sd: &SpectralData) -> Vec<c64> {
    (0..sd.dim())
        .into_par_iter()
        .map(|n| {
            let col = sd.eigenvector(n);
            let mut acc = c64::new(0.0, 0.0);
            for (a, b) in col.iter().zip(psi) {
                acc += a.conj() * b;
            }
            acc
        })
        .collect()
}

fn check_state_shape(space: Space, sd: &SpectralData) -> Result<()> {
    match space {
        Space::Global(shape) if shape == sd.shape => Ok(()),
        other => Err(Error::Dimension(format!(
            "state on {other:?} does not match spectral data of shape {:?}",
            sd.shape
        ))),
    }
}

/// `Φ_S(ρ) = Σ_n p_n τ_n`, plus intra-class coherence terms when degenerate.
pub fn reduce_ensemble(ens: &DiagonalEnsemble, sd: &SpectralData) -> Result<DensityMatrix> {
    let d_s = sd.shape.d_s();
    let block = d_s * d_s;
    let tau = sd.tau_table();
    let mut acc = vec![c64::new(0.0, 0.0); block];
    for (n, &p) in ens.probabilities.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let t = &tau[n * block..(n + 1) * block];
        for k in 0..block {
            acc[k] += t[k] * p;
        }
    }
    let mut sigma = Mat::from_fn(d_s, d_s, |i, j| acc[i * d_s + j]);
    for blk in &ens.blocks {
        let len = blk.matrix.nrows();
        for a in 0..len {
            for b in 0..len {
                if a == b {
                    continue;
                }
                let w = blk.matrix[(a, b)];
                if w == c64::new(0.0, 0.0) {
                    continue;
                }
                let outer = hilbert::partial_trace_outer(
                    sd.eigenvector(blk.start + a),
                    sd.eigenvector(blk.start + b),
                    sd.shape,
                );
                for i in 0..d_s {
                    for j in 0..d_s {
                        sigma[(i, j)] += w * outer[(i, j)];
                    }
                }
            }
        }
    }
    DensityMatrix::from_parts(Space::System(d_s), hilbert::hermitian_part(sigma.as_ref()))
}

/// Equilibrium reduced state `Φ_S(ρ)` of a global density matrix.
pub fn equilibrium_state(rho: &DensityMatrix, sd: &SpectralData) -> Result<DensityMatrix> {
    reduce_ensemble(&dephase(rho, sd)?, sd)
}

pub fn equilibrium_state_pure(psi: &PureState, sd: &SpectralData) -> Result<DensityMatrix> {
    reduce_ensemble(&dephase_pure(psi, sd)?, sd)
}

pub fn equilibrium_state_of(state: &GlobalState, sd: &SpectralData) -> Result<DensityMatrix> {
    match state {
        GlobalState::Pure(psi) => equilibrium_state_pure(psi, sd),
        GlobalState::Mixed(rho) => equilibrium_state(rho, sd),
    }
}

/// `Tr_B e^{-iHt} ρ e^{iHt}` at each requested time.
pub fn evolve_reduced(state: &GlobalState, sd: &SpectralData, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Precondition("times must be finite".into()));
    }
    check_state_shape(state.space(), sd)?;
    let d_s = sd.shape.d_s();
    match state {
        GlobalState::Pure(psi) => {
            let c = eigen_amplitudes(psi.amplitudes(), sd);
            times
                .par_iter()
                .map(|&t| {
                    let psi_t = evolve_amplitudes(&c, sd, t);
                    let sigma = hilbert::partial_trace_pure(&psi_t, sd.shape);
                    DensityMatrix::from_parts(Space::System(d_s), sigma)
                })
                .collect()
        }
        GlobalState::Mixed(rho) => {
            // Decompose ρ into weighted pure components and evolve each.
            let eig = hilbert::eigh(rho.matrix())?;
            let comps: Vec<(f64, Vec<c64>)> = eig
                .values
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 1e-15)
                .map(|(k, &w)| {
                    let col: Vec<c64> = (0..sd.dim()).map(|i| eig.vectors[(i, k)]).collect();
                    (w, eigen_amplitudes(&col, sd))
                })
                .collect();
            times
                .par_iter()
                .map(|&t| {
                    let mut sigma = Mat::<c64>::zeros(d_s, d_s);
                    for (w, c) in &comps {
                        let psi_t = evolve_amplitudes(c, sd, t);
                        let part = hilbert::partial_trace_pure(&psi_t, sd.shape);
                        for i in 0..d_s {
                            for j in 0..d_s {
                                sigma[(i, j)] += part[(i, j)] * *w;
                            }
                        }
                    }
                    let total = hilbert::trace(sigma.as_ref()).re;
                    let sigma = Mat::from_fn(d_s, d_s, |i, j| sigma[(i, j)] / total);
                    DensityMatrix::from_parts(Space::System(d_s), sigma)
                })
                .collect()
        }
    }
}

/// `Σ_n c_n e^{-i E_n t} |n>`.
fn evolve_amplitudes(c: &[c64], sd: &SpectralData, t: f64) -> Vec<c64> {
    let d = sd.dim();
    let mut out = vec![c64::new(0.0, 0.0); d];
    for (n, &cn) in c.iter().enumerate() {
        if cn == c64::new(0.0, 0.0) {
            continue;
        }
        let phase = c64::from_polar(1.0, -sd.energies[n] * t);
        let w = cn * phase;
        for (o, v) in out.iter_mut().zip(sd.eigenvector(n)) {
            *o += v * w;
        }
    }
    out
}

/// Midpoint-rule average of `Tr_B ρ(t)` over `[0, horizon]`.
pub fn time_averaged_reduced(
    state: &GlobalState,
    sd: &SpectralData,
    horizon: f64,
    points: usize,
) -> Result<DensityMatrix> {
    if points == 0 || !(horizon > 0.0) {
        return Err(Error::Precondition("need a positive horizon and at least one point".into()));
    }
    let dt = horizon / points as f64;
    let times: Vec<f64> = (0..points).map(|k| (k as f64 + 0.5) * dt).collect();
    let traj = evolve_reduced(state, sd, &times)?;
    let d_s = sd.shape.d_s();
    let mut acc = Mat::<c64>::zeros(d_s, d_s);
    for sigma in &traj {
        for i in 0..d_s {
            for j in 0..d_s {
                acc[(i, j)] += sigma.matrix()[(i, j)];
            }
        }
    }
    let acc = Mat::from_fn(d_s, d_s, |i, j| acc[(i, j)] / points as f64);
    DensityMatrix::from_parts(Space::System(d_s), acc)
}

/// `(1/T) ∫_0^T e^{-iωt} dt`.
pub fn phase_average(omega: f64, horizon: f64) -> c64 {
    let x = omega * horizon;
    if x.abs() < 1e-4 {
        return c64::new(1.0 - x * x / 6.0, -x / 2.0);
    }
    let (s, c) = x.sin_cos();
    // (1 − e^{−ix}) / (ix)
    c64::new(s / x, (c - 1.0) / x)
}

/// Exact average of `Tr_B ρ(t)` over `[0, horizon]`: every oscillating term
/// `e^{-i(E_n − E_m)t}` is integrated in closed form. Costs one `d × d`
/// product per pure component.
pub fn finite_time_average(state: &GlobalState, sd: &SpectralData, horizon: f64) -> Result<DensityMatrix> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Precondition("need a positive finite horizon".into()));
    }
    let e = &sd.energies;
    let kernel = Mat::from_fn(e.len(), e.len(), |n, m| phase_average(e[n] - e[m], horizon));
    average_with_kernel(state, sd, &kernel)
}

/// Filon-type quadrature of the same average on `panels` equal panels: node
/// `t_k = kT/N` carries the weight `(1/N)·(1/h)∫_0^h e^{-iωs} ds`, so each
/// panel's phase is integrated exactly and no aliasing arises.
pub fn filon_time_average(
    state: &GlobalState,
    sd: &SpectralData,
    horizon: f64,
    panels: usize,
) -> Result<DensityMatrix> {
    if panels == 0 || !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Precondition("need a positive finite horizon and at least one panel".into()));
    }
    let e = &sd.energies;
    let h = horizon / panels as f64;
    let kernel = Mat::from_fn(e.len(), e.len(), |n, m| {
        let omega = e[n] - e[m];
        let mut acc = c64::new(0.0, 0.0);
        for k in 0..panels {
            acc += c64::from_polar(1.0, -omega * k as f64 * h);
        }
        acc * phase_average(omega, h) / panels as f64
    });
    average_with_kernel(state, sd, &kernel)
}

// σ = Σ_w w · Tr_B[U K U†] with U = V·diag(c) for each pure component.
fn average_with_kernel(state: &GlobalState, sd: &SpectralData, kernel: &Mat<c64>) -> Result<DensityMatrix> {
    check_state_shape(state.space(), sd)?;
    let comps: Vec<(f64, Vec<c64>)> = match state {
        GlobalState::Pure(psi) => vec![(1.0, eigen_amplitudes(psi.amplitudes(), sd))],
        GlobalState::Mixed(rho) => {
            let eig = hilbert::eigh(rho.matrix())?;
            eig.values
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 1e-15)
                .map(|(k, &w)| {
                    let col: Vec<c64> = (0..sd.dim()).map(|i| eig.vectors[(i, k)]).collect();
                    (w, eigen_amplitudes(&col, sd))
                })
                .collect()
        }
    };
    let d = sd.dim();
    let (d_s, d_b) = (sd.shape.d_s(), sd.shape.d_b());
    let mut sigma = Mat::<c64>::zeros(d_s, d_s);
    let mut total = 0.0;
    for (w, c) in &comps {
        let u = Mat::from_fn(d, d, |i, n| sd.eigenvectors[(i, n)] * c[n]);
        let uk = hilbert::matmul_seq(u.as_ref(), kernel.as_ref());
        for s in 0..d_s {
            for t in 0..d_s {
                let mut acc = c64::new(0.0, 0.0);
                for m in 0..d {
                    for b in 0..d_b {
                        acc += uk[(s * d_b + b, m)] * u[(t * d_b + b, m)].conj();
                    }
                }
                sigma[(s, t)] += acc * *w;
            }
        }
        total += w;
    }
    let sigma = Mat::from_fn(d_s, d_s, |i, j| sigma[(i, j)] / total);
    DensityMatrix::from_parts(Space::System(d_s), hilbert::hermitian_part(sigma.as_ref()))
}

/// Eigen-decomposition of `H_B` on the bath space.
#[derive(Clone, Debug)]
pub struct BathSpectrum {
    pub energies: Vec<f64>,
    pub eigenvectors: Mat<c64>,
}

pub fn diagonalize_bath(h: &SplitHamiltonian) -> Result<BathSpectrum> {
    let eig = hilbert::eigh(h.h_b.as_ref())?;
    let mut vectors = eig.vectors;
    fix_gauge(&mut vectors);
    Ok(BathSpectrum {
        energies: eig.values,
        eigenvectors: vectors,
    })
}

// ---------------------------------------------------------------------------
// On-disk cache

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub model_hash: String,
    #[serde(rename = "d_S")]
    pub d_s: usize,
    #[serde(rename = "d_B")]
    pub d_b: usize,
    pub d_total: usize,
    pub tolerances: CacheTolerances,
    pub format_version: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheTolerances {
    pub residual: f64,
    pub orthonormality: f64,
    pub degeneracy: f64,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn acquire_lock(dir: &Path) -> Result<LockGuard> {
    let path = dir.join(".lock");
    match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(_) => Ok(LockGuard(path)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::CacheLocked(dir.to_path_buf())),
        Err(e) => Err(Error::io(&path, e)),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn f64_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Malformed(format!("{} is not a float64 array", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Directory that holds the cache of a given model hash under `root`.
pub fn cache_dir(root: &Path, model_hash: &str) -> PathBuf {
    root.join(model_hash)
}

/// Writes `sd` (and its τ table, when already computed) into `dir`.
pub fn write_cache(dir: &Path, sd: &SpectralData, spec: Option<&ModelSpec>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let _lock = acquire_lock(dir)?;
    let meta = CacheMeta {
        model_hash: sd.model_hash.clone(),
        d_s: sd.shape.d_s(),
        d_b: sd.shape.d_b(),
        d_total: sd.dim(),
        tolerances: CacheTolerances {
            residual: RESIDUAL_TOLERANCE,
            orthonormality: ORTHONORMALITY_TOLERANCE,
            degeneracy: DEGENERACY_TOLERANCE,
        },
        format_version: CACHE_FORMAT_VERSION,
    };
    write_file(&dir.join("energies.f64"), &f64_bytes(sd.energies.iter().copied()))?;
    let d = sd.dim();
    let vecs = f64_bytes((0..d).flat_map(|n| sd.eigenvector(n).iter().flat_map(|z| [z.re, z.im])));
    write_file(&dir.join("eigvecs.c128"), &vecs)?;
    if let Some(tau) = sd.tau.get() {
        write_file(&dir.join("tau.c128"), &f64_bytes(tau.iter().flat_map(|z| [z.re, z.im])))?;
    }
    if let Some(spec) = spec {
        write_file(&dir.join("model.json"), spec.to_json_pretty().as_bytes())?;
    }
    // meta.json goes last: its presence marks a complete cache.
    write_file(&dir.join("meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())
}

pub fn read_meta(dir: &Path) -> Result<CacheMeta> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

/// Reads a cache, refusing it when `expected_hash` is given and differs.
pub fn read_cache(dir: &Path, expected_hash: Option<&str>) -> Result<SpectralData> {
    if dir.join(".lock").exists() {
        return Err(Error::CacheLocked(dir.to_path_buf()));
    }
    let meta = read_meta(dir)?;
    if meta.format_version != CACHE_FORMAT_VERSION {
        return Err(Error::Malformed(format!(
            "cache format version {} (expected {CACHE_FORMAT_VERSION})",
            meta.format_version
        )));
    }
    if let Some(expected) = expected_hash {
        if expected != meta.model_hash {
            return Err(Error::StaleCache {
                path: dir.to_path_buf(),
                expected: expected.to_string(),
                found: meta.model_hash,
            });
        }
    }
    let shape = SpaceShape::new(meta.d_s, meta.d_b)?;
    let d = shape.total();
    if meta.d_total != d {
        return Err(Error::Malformed("d_total does not equal d_S * d_B".into()));
    }
    let energies = read_f64s(&dir.join("energies.f64"))?;
    let raw = read_f64s(&dir.join("eigvecs.c128"))?;
    if energies.len() != d || raw.len() != 2 * d * d {
        return Err(Error::Malformed("cache arrays do not match meta.json".into()));
    }
    let vectors = Mat::from_fn(d, d, |i, n| {
        let k = 2 * (n * d + i);
        c64::new(raw[k], raw[k + 1])
    });
    let sd = SpectralData::from_parts(shape, energies, vectors, meta.model_hash)?;
    let tau_path = dir.join("tau.c128");
    if tau_path.exists() {
        let raw = read_f64s(&tau_path)?;
        sd.set_tau_table(raw.chunks_exact(2).map(|c| c64::new(c[0], c[1])).collect())?;
    }
    Ok(sd)
}

/// Model spec stored alongside a cache, if any.
pub fn read_cached_model(dir: &Path) -> Result<Option<ModelSpec>> {
    let path = dir.join("model.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let spec = ModelSpec::from_json(&text)?;
    Ok(Some(spec))
}
