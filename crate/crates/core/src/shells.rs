//! Energy shells, their projectors, micro-canonical reduced states and the
//! projector-leakage bound.

use std::fs;
use std::path::Path;

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, DensityMatrix, Space, SpaceShape};
use crate::report::BoundReport;
use crate::spectral::{BathSpectrum, SpectralData};

/// Slack used by [`leakage_bound_check`] and its support precondition.
pub const LEAKAGE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellTag {
    Bath,
    Global,
}

/// Indices of eigenvalues within `[center - half_width, center + half_width]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyShell {
    pub tag: ShellTag,
    pub center: f64,
    pub half_width: f64,
    pub indices: Vec<usize>,
    pub empty: bool,
}

#[inline]
pub fn in_window(e: f64, center: f64, half_width: f64) -> bool {
    (e - center).abs() <= half_width
}

/// Builds the inclusive shell. An empty window gives a flagged shell rather
/// than an error.
pub fn make_shell(spectrum: &[f64], center: f64, half_width: f64, tag: ShellTag) -> Result<EnergyShell> {
    if !(half_width > 0.0) || !center.is_finite() || !half_width.is_finite() {
        return Err(Error::Precondition(format!(
            "shell needs a finite center and positive half-width (got {center}, {half_width})"
        )));
    }
    let indices: Vec<usize> = spectrum
        .iter()
        .enumerate()
        .filter(|(_, &e)| in_window(e, center, half_width))
        .map(|(i, _)| i)
        .collect();
    Ok(EnergyShell {
        tag,
        center,
        half_width,
        empty: indices.is_empty(),
        indices,
    })
}

impl EnergyShell {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.empty {
            return Err(Error::EmptyShell(format!(
                "no {:?} eigenvalues within {} of {}",
                self.tag, self.half_width, self.center
            )));
        }
        Ok(())
    }

    pub fn require_tag(&self, tag: ShellTag) -> Result<()> {
        if self.tag != tag {
            return Err(Error::Precondition(format!(
                "expected a {tag:?} shell, got a {:?} shell",
                self.tag
            )));
        }
        Ok(())
    }

    /// Writes `{stem}.json` and the `{stem}.u32` index sidecar into `dir`.
    pub fn write_report(&self, dir: &Path, stem: &str) -> Result<()> {
        let idx_name = format!("{stem}.u32");
        let bytes: Vec<u8> = self
            .indices
            .iter()
            .flat_map(|&i| (i as u32).to_le_bytes())
            .collect();
        let idx_path = dir.join(&idx_name);
        fs::write(&idx_path, bytes).map_err(|e| Error::io(&idx_path, e))?;
        let report = ShellReport {
            tag: self.tag,
            e: self.center,
            delta: self.half_width,
            count: self.len(),
            indices_path: idx_name,
        };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))
    }

    pub fn read_report(dir: &Path, stem: &str) -> Result<Self> {
        let path = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let report: ShellReport =
            serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        let idx_path = dir.join(&report.indices_path);
        let bytes = fs::read(&idx_path).map_err(|e| Error::io(&idx_path, e))?;
        if bytes.len() != 4 * report.count {
            return Err(Error::Malformed(format!("{} has the wrong length", idx_path.display())));
        }
        let indices: Vec<usize> = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")) as usize)
            .collect();
        Ok(Self {
            tag: report.tag,
            center: report.e,
            half_width: report.delta,
            empty: indices.is_empty(),
            indices,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShellReport {
    pub tag: ShellTag,
    #[serde(rename = "E")]
    pub e: f64,
    pub delta: f64,
    pub count: usize,
    pub indices_path: String,
}

/// Projector onto a shell together with its complement.
#[derive(Clone, Debug)]
pub struct ShellProjector {
    pub shell: EnergyShell,
    pub p: Mat<c64>,
    pub q: Mat<c64>,
}

impl ShellProjector {
    fn from_p(shell: EnergyShell, p: Mat<c64>) -> Self {
        let d = p.nrows();
        let q = Mat::from_fn(d, d, |i, j| {
            let id = if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
            id - p[(i, j)]
        });
        Self { shell, p, q }
    }

    /// Projector onto a global shell spanned by eigenvectors of `sd`.
    pub fn global(sd: &SpectralData, shell: &EnergyShell) -> Result<Self> {
        shell.require_tag(ShellTag::Global)?;
        let p = hilbert::projector_from_columns(sd.eigenvectors(), &shell.indices);
        Ok(Self::from_p(shell.clone(), p))
    }

    pub fn rank(&self) -> f64 {
        hilbert::trace(self.p.as_ref()).re
    }

    /// Max-abs entry of `P² − P`.
    pub fn idempotency_residual(&self) -> f64 {
        let p2 = hilbert::matmul_seq(self.p.as_ref(), self.p.as_ref());
        let d = self.p.nrows();
        let diff = Mat::from_fn(d, d, |i, j| p2[(i, j)] - self.p[(i, j)]);
        hilbert::max_abs(diff.as_ref())
    }
}

/// `1_S ⊗ Σ_{k ∈ shell} |k><k|` in the global basis.
pub fn bath_shell_embedding(shell: &EnergyShell, bath: &BathSpectrum, shape: SpaceShape) -> Result<ShellProjector> {
    shell.require_tag(ShellTag::Bath)?;
    if bath.energies.len() != shape.d_b() {
        return Err(Error::Dimension("bath spectrum does not match the shape".into()));
    }
    let p_b = hilbert::projector_from_columns(bath.eigenvectors.as_ref(), &shell.indices);
    let id = Mat::<c64>::identity(shape.d_s(), shape.d_s());
    let p = hilbert::tensor_product(id.as_ref(), p_b.as_ref())?;
    Ok(ShellProjector::from_p(shell.clone(), p))
}

/// Uniform average of `τ_n` over a global shell, i.e. `Tr_B(P) / Tr(P)`.
pub fn microcanonical_reduced(sd: &SpectralData, shell: &EnergyShell) -> Result<DensityMatrix> {
    shell.require_tag(ShellTag::Global)?;
    shell.require_nonempty()?;
    let d_s = sd.shape().d_s();
    let block = d_s * d_s;
    let tau = sd.tau_table();
    let mut acc = vec![c64::new(0.0, 0.0); block];
    let mut sorted = shell.indices.clone();
    sorted.sort_unstable();
    for &n in &sorted {
        if n >= sd.dim() {
            return Err(Error::IndexOutOfRange { index: n, len: sd.dim() });
        }
        for k in 0..block {
            acc[k] += tau[n * block + k];
        }
    }
    let w = 1.0 / sorted.len() as f64;
    let sigma = Mat::from_fn(d_s, d_s, |i, j| acc[i * d_s + j] * w);
    DensityMatrix::from_parts(Space::System(d_s), hilbert::hermitian_part(sigma.as_ref()))
}

/// Eigen-data of a Hermitian operator, reused across many leakage checks.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl Spectrum {
    pub fn of(a: MatRef<'_, c64>) -> Result<Self> {
        hilbert::check_hermitian(a)?;
        let e = hilbert::eigh(a)?;
        Ok(Self {
            values: e.values,
            vectors: e.vectors,
        })
    }

    /// `Tr(ρ Q)` for `Q` the projector onto eigenvalues outside the window.
    pub fn weight_outside(&self, rho: MatRef<'_, c64>, center: f64, half_width: f64) -> f64 {
        let d = self.values.len();
        let rv = hilbert::matmul_seq(rho, self.vectors.as_ref());
        let mut acc = 0.0;
        for (k, &e) in self.values.iter().enumerate() {
            if in_window(e, center, half_width) {
                continue;
            }
            let mut w = c64::new(0.0, 0.0);
            for i in 0..d {
                w += self.vectors[(i, k)].conj() * rv[(i, k)];
            }
            acc += w.re;
        }
        acc
    }
}

/// Checks `Tr(ρQ) ≤ ((‖A1 − A2‖ + Δ2)/Δ1)²`, where `Q` projects onto the
/// eigenvalues of `A1` outside `[λ−Δ1, λ+Δ1]` and `ρ` is supported on the
/// eigenvalues of `A2` inside `[λ−Δ2, λ+Δ2]`.
pub fn leakage_bound_check(
    a1: MatRef<'_, c64>,
    a2: MatRef<'_, c64>,
    lambda: f64,
    delta1: f64,
    delta2: f64,
    rho: &DensityMatrix,
) -> Result<BoundReport> {
    let s1 = Spectrum::of(a1)?;
    let s2 = Spectrum::of(a2)?;
    leakage_bound_check_with(&s1, &s2, a1, a2, lambda, delta1, delta2, rho)
}

/// [`leakage_bound_check`] with precomputed spectra.
#[allow(clippy::too_many_arguments)]
pub fn leakage_bound_check_with(
    s1: &Spectrum,
    s2: &Spectrum,
    a1: MatRef<'_, c64>,
    a2: MatRef<'_, c64>,
    lambda: f64,
    delta1: f64,
    delta2: f64,
    rho: &DensityMatrix,
) -> Result<BoundReport> {
    let d = a1.nrows();
    if a2.nrows() != d || rho.dim() != d {
        return Err(Error::Dimension("operators and state must share one space".into()));
    }
    if !(delta1 > 0.0) || !(delta2 >= 0.0) {
        return Err(Error::Precondition("need Δ1 > 0 and Δ2 ≥ 0".into()));
    }
    let support = s2.weight_outside(rho.matrix(), lambda, delta2);
    if support > LEAKAGE_TOLERANCE {
        return Err(Error::Precondition(format!(
            "state has weight {support:.3e} outside the Δ2-shell of A2"
        )));
    }
    let diff = Mat::from_fn(d, d, |i, j| a1[(i, j)] - a2[(i, j)]);
    let norm = hilbert::operator_norm(diff.as_ref())?;
    let lhs = s1.weight_outside(rho.matrix(), lambda, delta1).max(0.0);
    let rhs = ((norm + delta2) / delta1).powi(2);
    Ok(BoundReport::with_tolerance("leakage", lhs, rhs, LEAKAGE_TOLERANCE)
        .input("lambda", lambda)
        .input("delta1", delta1)
        .input("delta2", delta2)
        .input("norm_diff", norm)
        .input("support_residual", support))
}

/// Overlaps `(1_S ⊗ U_K)† |n>` for every eigenvector, one column per `n`.
pub(crate) fn shell_overlaps(sd: &SpectralData, bath: &BathSpectrum, shell: &EnergyShell) -> Mat<c64> {
    let shape = sd.shape();
    let (d_s, d_b) = (shape.d_s(), shape.d_b());
    let k = shell.len();
    let u_k = Mat::from_fn(d_b, k, |i, j| bath.eigenvectors[(i, shell.indices[j])]);
    let v = sd.eigenvectors();
    let mut w = Mat::<c64>::zeros(d_s * k, sd.dim());
    for s in 0..d_s {
        let block = hilbert::adjoint_matmul_seq(u_k.as_ref(), v.subrows(s * d_b, d_b));
        w.as_mut().subrows_mut(s * k, k).copy_from(&block);
    }
    w
}

/// `<n|Q|n>` for every eigenstate, with `Q` the complement of the embedded
/// bath-shell projector.
pub fn eigenstate_leakages(sd: &SpectralData, bath: &BathSpectrum, shell: &EnergyShell) -> Result<Vec<f64>> {
    shell.require_tag(ShellTag::Bath)?;
    if bath.energies.len() != sd.shape().d_b() {
        return Err(Error::Dimension("bath spectrum does not match the spectral data".into()));
    }
    if shell.is_empty() {
        return Ok(vec![1.0; sd.dim()]);
    }
    let w = shell_overlaps(sd, bath, shell);
    Ok((0..sd.dim())
        .into_par_iter()
        .map(|n| {
            let inside: f64 = (0..w.nrows()).map(|r| w[(r, n)].norm_sqr()).sum();
            (1.0 - inside).clamp(0.0, 1.0)
        })
        .collect())
}

pub fn eigenstate_leakage(sd: &SpectralData, bath: &BathSpectrum, shell: &EnergyShell, n: usize) -> Result<f64> {
    if n >= sd.dim() {
        return Err(Error::IndexOutOfRange { index: n, len: sd.dim() });
    }
    shell.require_tag(ShellTag::Bath)?;
    let shape = sd.shape();
    let (d_s, d_b) = (shape.d_s(), shape.d_b());
    let v = sd.eigenvector(n);
    let mut inside = 0.0;
    for s in 0..d_s {
        let part = &v[s * d_b..(s + 1) * d_b];
        for &k in &shell.indices {
            let mut acc = c64::new(0.0, 0.0);
            for (b, a) in part.iter().enumerate() {
                acc += bath.eigenvectors[(b, k)].conj() * a;
            }
            inside += acc.norm_sqr();
        }
    }
    Ok((1.0 - inside).clamp(0.0, 1.0))
}
