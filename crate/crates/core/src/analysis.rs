//! Measured ETH precision, thermalization precision of bath shells, and the
//! bound checks that connect them.
//!
//! Every random stream is seeded per cell from a global seed, and every
//! parallel map collects in index order, so reports are bit-reproducible
//! regardless of the worker count.

use std::path::Path;

use faer::{c64, Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, DensityMatrix, GlobalState, PureState, Space};
use crate::models::{DenseMatrix, SplitHamiltonian};
use crate::report::{BoundReport, Verdict, SCHEMA_VERSION};
use crate::shells::{self, EnergyShell, ShellTag};
use crate::spectral::{self, BathSpectrum, SpectralData};
use crate::thermo::{self, fmt, Theorem1Constants, ThermoConfig, ThermoProfile};

/// Bins of the pair-distance histogram over `[0, 2]`.
pub const HISTOGRAM_BINS: usize = 40;

/// Slack for the triangle inequality across pairs.
pub const TRIANGLE_TOLERANCE: f64 = 1e-12;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream used by one scan cell.
pub fn cell_seed(seed: u64, cell: u64) -> u64 {
    splitmix64(seed ^ splitmix64(cell))
}

pub fn haar_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<c64> {
    let mut v: Vec<c64> = (0..n)
        .map(|_| c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = hilbert::vector_norm(&v);
    for a in &mut v {
        *a /= norm;
    }
    v
}

fn check_region(sd: &SpectralData, region: (f64, f64)) -> Result<()> {
    let (lo, hi) = region;
    let e = sd.energies();
    let (emin, emax) = (e[0], e[e.len() - 1]);
    let tol = 1e-9 * emin.abs().max(emax.abs()).max(1.0);
    if !(lo <= hi) || lo < emin - tol || hi > emax + tol {
        return Err(Error::OutOfRange {
            energy: if lo < emin - tol || !(lo <= hi) { lo } else { hi },
            lo: emin,
            hi: emax,
        });
    }
    Ok(())
}

/// The middle third of the spectrum by eigenvalue rank.
pub fn mid_spectrum_region(energies: &[f64]) -> (f64, f64) {
    let d = energies.len();
    let a = d / 3;
    let b = ((2 * d).div_ceil(3)).max(a + 1).min(d);
    (energies[a], energies[b - 1])
}

// ---------------------------------------------------------------------------
// ETH scan

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn empty(bins: usize, hi: f64) -> Self {
        Self {
            edges: (0..=bins).map(|i| hi * i as f64 / bins as f64).collect(),
            counts: vec![0; bins],
        }
    }

    fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let hi = self.edges[bins];
        let i = ((v / hi) * bins as f64).floor().max(0.0) as usize;
        self.counts[i.min(bins - 1)] += 1;
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthReport {
    pub schema_version: u32,
    pub model_hash: String,
    pub region: (f64, f64),
    pub delta: f64,
    pub states: usize,
    pub eps_measured: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub pair_count: u64,
    pub distance_histogram: Histogram,
}

/// `‖τ_n − τ_m‖₁` straight from the τ table.
pub fn tau_distance(sd: &SpectralData, n: usize, m: usize) -> f64 {
    let d_s = sd.shape().d_s();
    let (a, b) = (sd.tau_slice(n), sd.tau_slice(m));
    let diff = Mat::from_fn(d_s, d_s, |i, j| a[i * d_s + j] - b[i * d_s + j]);
    hilbert::trace_norm_unchecked(diff.as_ref())
}

/// `‖τ_n − ω‖₁`.
pub fn tau_distance_to(sd: &SpectralData, n: usize, omega: MatRef<'_, c64>) -> f64 {
    let d_s = sd.shape().d_s();
    let a = sd.tau_slice(n);
    let diff = Mat::from_fn(d_s, d_s, |i, j| a[i * d_s + j] - omega[(i, j)]);
    hilbert::trace_norm_unchecked(diff.as_ref())
}

/// Exhaustive maximum of `‖τ_m − τ_n‖₁` over eigenpairs in `region` with
/// `|E_m − E_n| ≤ 2Δ`.
pub fn eth_scan(sd: &SpectralData, region: (f64, f64), delta: f64) -> Result<EthReport> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Precondition(format!("Δ must be positive (got {delta})")));
    }
    check_region(sd, region)?;
    let range = sd.indices_in(region.0, region.1);
    if range.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} eigenstates in [{}, {}]",
            range.len(),
            region.0,
            region.1
        )));
    }
    let e = sd.energies();
    let end = range.end;
    sd.tau_table();
    let rows: Vec<(f64, Option<(usize, usize)>, u64, Histogram)> = range
        .clone()
        .into_par_iter()
        .map(|n| {
            let mut best = (0.0, None);
            let mut count = 0;
            let mut hist = Histogram::empty(HISTOGRAM_BINS, 2.0);
            for m in n + 1..end {
                if e[m] - e[n] > 2.0 * delta {
                    break;
                }
                let dist = tau_distance(sd, n, m);
                count += 1;
                hist.add(dist);
                if dist > best.0 {
                    best = (dist, Some((n, m)));
                }
            }
            (best.0, best.1, count, hist)
        })
        .collect();
    let mut eps = 0.0;
    let mut worst = None;
    let mut pair_count = 0;
    let mut hist = Histogram::empty(HISTOGRAM_BINS, 2.0);
    for (dist, pair, count, h) in rows {
        pair_count += count;
        hist.merge(&h);
        if dist > eps {
            eps = dist;
            worst = pair;
        }
    }
    Ok(EthReport {
        schema_version: SCHEMA_VERSION,
        model_hash: sd.model_hash().to_string(),
        region,
        delta,
        states: range.len(),
        eps_measured: eps,
        worst_pair: worst,
        pair_count,
        distance_histogram: hist,
    })
}

// ---------------------------------------------------------------------------
// Thermalization scan

/// Budget of the product and entangled optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub random_products: usize,
    pub random_entangled: usize,
    pub refine_starts: usize,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            random_products: 64,
            random_entangled: 32,
            refine_starts: 3,
            refine_steps: 12,
            seed: 20_240_917,
        }
    }
}

impl SamplerConfig {
    /// Every count multiplied by `factor`; the seed is kept.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            random_products: self.random_products * factor,
            random_entangled: self.random_entangled * factor,
            refine_starts: self.refine_starts * factor,
            refine_steps: self.refine_steps * factor,
            seed: self.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub max: f64,
    pub count: usize,
}

impl SampleStats {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: values.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: String,
    pub best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermReport {
    pub schema_version: u32,
    pub shell: EnergyShell,
    pub omega: DenseMatrix,
    /// Largest deviation found over product initial states. A lower bound on
    /// the supremum.
    pub eps_product: f64,
    /// Largest deviation found over all states of the subspace, products
    /// included. A lower bound on the supremum.
    pub eps_entangled: f64,
    pub lower_bound: bool,
    pub product_stats: SampleStats,
    pub entangled_stats: SampleStats,
    pub trace: Vec<TraceEntry>,
    pub sampler: SamplerConfig,
}

/// `x ↦ ‖Φ_S(|x><x|) − ω‖₁` for states `x` of `C^{d_S} ⊗ span(shell)`,
/// written in the product basis `|s> ⊗ |K_j>` with `s` slowest.
pub struct ShellObjective<'a> {
    sd: &'a SpectralData,
    /// `a[(r, n)] = <r|n>`.
    a: Mat<c64>,
    d_s: usize,
    k: usize,
    omega: Mat<c64>,
}

impl<'a> ShellObjective<'a> {
    pub fn new(sd: &'a SpectralData, bath: &BathSpectrum, shell: &EnergyShell, omega: &DensityMatrix) -> Result<Self> {
        shell.require_tag(ShellTag::Bath)?;
        shell.require_nonempty()?;
        let d_s = sd.shape().d_s();
        if omega.dim() != d_s {
            return Err(Error::Dimension(format!(
                "ω has dimension {}, system has {d_s}",
                omega.dim()
            )));
        }
        if bath.energies.len() != sd.shape().d_b() {
            return Err(Error::Dimension("bath spectrum does not match the spectral data".into()));
        }
        sd.tau_table();
        Ok(Self {
            sd,
            a: shells::shell_overlaps(sd, bath, shell),
            d_s,
            k: shell.len(),
            omega: omega.matrix().to_owned(),
        })
    }

    /// Dimension of the embedded subspace, `d_S · |shell|`.
    pub fn dim(&self) -> usize {
        self.d_s * self.k
    }

    pub fn shell_len(&self) -> usize {
        self.k
    }

    fn amplitudes(&self, x: &[c64]) -> Vec<c64> {
        let d = self.sd.dim();
        (0..d)
            .map(|n| {
                let col = self.a.col(n);
                let mut acc = c64::new(0.0, 0.0);
                for (r, xr) in x.iter().enumerate() {
                    acc += col[r].conj() * xr;
                }
                acc
            })
            .collect()
    }

    /// `Φ_S(|x><x|)`.
    pub fn reduced(&self, x: &[c64]) -> Mat<c64> {
        let c = self.amplitudes(x);
        let d_s = self.d_s;
        let block = d_s * d_s;
        let tau = self.sd.tau_table();
        let mut acc = vec![c64::new(0.0, 0.0); block];
        let shape = self.sd.shape();
        for &(lo, hi) in self.sd.degeneracy_classes() {
            if hi - lo == 1 {
                let p = c[lo].norm_sqr();
                if p == 0.0 {
                    continue;
                }
                for (o, t) in acc.iter_mut().zip(&tau[lo * block..(lo + 1) * block]) {
                    *o += t * p;
                }
            } else {
                let mut v = vec![c64::new(0.0, 0.0); self.sd.dim()];
                for (n, cn) in c.iter().enumerate().take(hi).skip(lo) {
                    for (o, e) in v.iter_mut().zip(self.sd.eigenvector(n)) {
                        *o += e * cn;
                    }
                }
                let part = hilbert::partial_trace_pure(&v, shape);
                for i in 0..d_s {
                    for j in 0..d_s {
                        acc[i * d_s + j] += part[(i, j)];
                    }
                }
            }
        }
        let sigma = Mat::from_fn(d_s, d_s, |i, j| acc[i * d_s + j]);
        hilbert::hermitian_part(sigma.as_ref())
    }

    pub fn value(&self, x: &[c64]) -> f64 {
        let sigma = self.reduced(x);
        hilbert::trace_distance_unchecked(sigma.as_ref(), self.omega.as_ref())
    }

    /// Value plus a norm-one witness `Y` with `Tr(Y(σ − ω)) = ‖σ − ω‖₁`.
    fn witness(&self, x: &[c64]) -> Result<(f64, Mat<c64>)> {
        let sigma = self.reduced(x);
        let d_s = self.d_s;
        let diff = Mat::from_fn(d_s, d_s, |i, j| sigma[(i, j)] - self.omega[(i, j)]);
        let eig = hilbert::eigh(diff.as_ref())?;
        let value = eig.values.iter().map(|v| v.abs()).sum();
        let mut y = Mat::<c64>::zeros(d_s, d_s);
        for (k, &l) in eig.values.iter().enumerate() {
            let sign = if l >= 0.0 { 1.0 } else { -1.0 };
            for i in 0..d_s {
                for j in 0..d_s {
                    y[(i, j)] += eig.vectors[(i, k)] * eig.vectors[(j, k)].conj() * sign;
                }
            }
        }
        Ok((value, y))
    }

    /// Subspace matrix `G` with `<x|G|x> = Tr(Y Φ_S(|x><x|))`.
    fn gram(&self, y: &Mat<c64>) -> Mat<c64> {
        let d_s = self.d_s;
        let block = d_s * d_s;
        let tau = self.sd.tau_table();
        let shape = self.sd.shape();
        let d_b = shape.d_b();
        let mut b = self.a.clone();
        for &(lo, hi) in self.sd.degeneracy_classes() {
            if hi - lo == 1 {
                let t = &tau[lo * block..(lo + 1) * block];
                let mut g = 0.0;
                for s in 0..d_s {
                    for u in 0..d_s {
                        g += (y[(s, u)] * t[u * d_s + s]).re;
                    }
                }
                for r in 0..b.nrows() {
                    b[(r, lo)] *= g;
                }
            } else {
                let len = hi - lo;
                // t[(p, q)] = <lo+p| Y ⊗ 1 |lo+q>
                let t = Mat::from_fn(len, len, |p, q| {
                    let vp = self.sd.eigenvector(lo + p);
                    let vq = self.sd.eigenvector(lo + q);
                    let mut acc = c64::new(0.0, 0.0);
                    for s in 0..d_s {
                        for u in 0..d_s {
                            let ysu = y[(s, u)];
                            if ysu == c64::new(0.0, 0.0) {
                                continue;
                            }
                            let mut inner = c64::new(0.0, 0.0);
                            for beta in 0..d_b {
                                inner += vp[s * d_b + beta].conj() * vq[u * d_b + beta];
                            }
                            acc += ysu * inner;
                        }
                    }
                    acc
                });
                let cols = self.a.subcols(lo, len);
                let mixed = hilbert::matmul_seq(cols, t.as_ref());
                b.as_mut().subcols_mut(lo, len).copy_from(&mixed);
            }
        }
        let g = hilbert::matmul_adjoint_seq(b.as_ref(), self.a.as_ref());
        hilbert::hermitian_part(g.as_ref())
    }

    fn product_vector(&self, psi: &[c64], phi: &[c64]) -> Vec<c64> {
        let mut x = Vec::with_capacity(self.dim());
        for &p in psi {
            for &f in phi {
                x.push(p * f);
            }
        }
        x
    }

    /// Alternating ascent over product states. Each sweep cannot decrease the
    /// objective.
    fn refine_product(&self, mut psi: Vec<c64>, mut phi: Vec<c64>, steps: usize) -> Result<(f64, Vec<c64>, Vec<c64>)> {
        let (d_s, k) = (self.d_s, self.k);
        let mut value = self.value(&self.product_vector(&psi, &phi));
        for _ in 0..steps {
            let (_, y) = self.witness(&self.product_vector(&psi, &phi))?;
            let g = self.gram(&y);
            let m_s = Mat::from_fn(d_s, d_s, |s, t| {
                let mut acc = c64::new(0.0, 0.0);
                for j in 0..k {
                    for l in 0..k {
                        acc += phi[j].conj() * g[(s * k + j, t * k + l)] * phi[l];
                    }
                }
                acc
            });
            let new_psi = top_eigenvector(&m_s)?;
            let m_b = Mat::from_fn(k, k, |j, l| {
                let mut acc = c64::new(0.0, 0.0);
                for s in 0..d_s {
                    for t in 0..d_s {
                        acc += new_psi[s].conj() * g[(s * k + j, t * k + l)] * new_psi[t];
                    }
                }
                acc
            });
            let new_phi = top_eigenvector(&m_b)?;
            let new_value = self.value(&self.product_vector(&new_psi, &new_phi));
            if new_value > value {
                let gain = new_value - value;
                psi = new_psi;
                phi = new_phi;
                value = new_value;
                if gain < 1e-12 {
                    break;
                }
            } else {
                break;
            }
        }
        Ok((value, psi, phi))
    }

    /// Ascent over all states of the subspace.
    fn refine_entangled(&self, mut x: Vec<c64>, steps: usize) -> Result<f64> {
        let mut value = self.value(&x);
        for _ in 0..steps {
            let (_, y) = self.witness(&x)?;
            let g = self.gram(&y);
            let nx = top_eigenvector(&g)?;
            let nv = self.value(&nx);
            if nv > value {
                let gain = nv - value;
                x = nx;
                value = nv;
                if gain < 1e-12 {
                    break;
                }
            } else {
                break;
            }
        }
        Ok(value)
    }
}

fn top_eigenvector(m: &Mat<c64>) -> Result<Vec<c64>> {
    let eig = hilbert::eigh(m.as_ref())?;
    let k = eig.values.len() - 1;
    let mut v: Vec<c64> = (0..m.nrows()).map(|i| eig.vectors[(i, k)]).collect();
    // Fix the global phase for reproducible downstream arithmetic.
    if let Some(big) = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
    {
        let phase = big.conj() / big.norm();
        for a in &mut v {
            *a *= phase;
        }
    }
    Ok(v)
}

fn unit(n: usize, i: usize) -> Vec<c64> {
    let mut v = vec![c64::new(0.0, 0.0); n];
    v[i] = c64::new(1.0, 0.0);
    v
}

/// Indices of the `count` largest values, ties broken by position.
fn top_indices(values: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

/// Lower-bound estimates of the thermalization precision of a bath shell
/// over product and over all initial states supported on `C^{d_S} ⊗ shell`.
pub fn therm_scan(
    sd: &SpectralData,
    bath: &BathSpectrum,
    shell: &EnergyShell,
    omega: &DensityMatrix,
    budget: &SamplerConfig,
) -> Result<ThermReport> {
    let obj = ShellObjective::new(sd, bath, shell, omega)?;
    let (d_s, k) = (obj.d_s, obj.k);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut trace = Vec::new();

    // Products: (system factor, shell factor).
    let mut starts: Vec<(Vec<c64>, Vec<c64>)> = Vec::with_capacity(d_s * k + budget.random_products);
    for s in 0..d_s {
        for j in 0..k {
            starts.push((unit(d_s, s), unit(k, j)));
        }
    }
    let basis_count = starts.len();
    for _ in 0..budget.random_products {
        let psi = haar_vector(&mut rng, d_s);
        let phi = haar_vector(&mut rng, k);
        starts.push((psi, phi));
    }
    let values: Vec<f64> = starts
        .par_iter()
        .map(|(psi, phi)| obj.value(&obj.product_vector(psi, phi)))
        .collect();
    let mut best = values.iter().copied().fold(0.0, f64::max);
    let basis_best = values[..basis_count].iter().copied().fold(0.0, f64::max);
    trace.push(TraceEntry {
        stage: "basis_products".into(),
        best: basis_best,
    });
    trace.push(TraceEntry {
        stage: "random_products".into(),
        best,
    });

    let chosen = top_indices(&values, budget.refine_starts);
    let refined: Vec<(f64, Vec<c64>, Vec<c64>)> = chosen
        .par_iter()
        .map(|&i| obj.refine_product(starts[i].0.clone(), starts[i].1.clone(), budget.refine_steps))
        .collect::<Result<_>>()?;
    let mut product_values = values.clone();
    for (v, _, _) in &refined {
        product_values.push(*v);
        best = best.max(*v);
        trace.push(TraceEntry {
            stage: "refine_product".into(),
            best,
        });
    }
    let eps_product = best;

    // Entangled states of the subspace; products are members too.
    let dim = obj.dim();
    let randoms: Vec<Vec<c64>> = (0..budget.random_entangled)
        .map(|_| haar_vector(&mut rng, dim))
        .collect();
    let random_values: Vec<f64> = randoms.par_iter().map(|x| obj.value(x)).collect();
    let mut ent_best = random_values.iter().copied().fold(eps_product, f64::max);
    trace.push(TraceEntry {
        stage: "random_entangled".into(),
        best: ent_best,
    });
    let mut ent_starts: Vec<Vec<c64>> = refined
        .iter()
        .map(|(_, psi, phi)| obj.product_vector(psi, phi))
        .collect();
    for i in top_indices(&random_values, budget.refine_starts) {
        ent_starts.push(randoms[i].clone());
    }
    let ent_refined: Vec<f64> = ent_starts
        .par_iter()
        .map(|x| obj.refine_entangled(x.clone(), budget.refine_steps))
        .collect::<Result<_>>()?;
    let mut entangled_values = random_values.clone();
    for v in ent_refined {
        entangled_values.push(v);
        ent_best = ent_best.max(v);
        trace.push(TraceEntry {
            stage: "refine_entangled".into(),
            best: ent_best,
        });
    }

    Ok(ThermReport {
        schema_version: SCHEMA_VERSION,
        shell: shell.clone(),
        omega: DenseMatrix::from_mat(omega.matrix()),
        eps_product,
        eps_entangled: ent_best,
        lower_bound: true,
        product_stats: SampleStats::of(&product_values),
        entangled_stats: SampleStats::of(&entangled_values),
        trace,
        sampler: budget.clone(),
    })
}

/// `‖Φ_S(ρ_S ⊗ ρ_B) − ω‖₁` for one pure product state; `bath_coeffs` are
/// amplitudes in the shell eigenbasis.
pub fn product_deviation(obj: &ShellObjective<'_>, system: &[c64], bath_coeffs: &[c64]) -> Result<f64> {
    if system.len() != obj.d_s || bath_coeffs.len() != obj.k {
        return Err(Error::Dimension("product factors do not match the subspace".into()));
    }
    Ok(obj.value(&obj.product_vector(system, bath_coeffs)))
}

/// Plain Monte-Carlo maximum over `samples` Haar-random pure products.
pub fn monte_carlo_products(obj: &ShellObjective<'_>, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Vec<c64>, Vec<c64>)> = (0..samples)
        .map(|_| (haar_vector(&mut rng, obj.d_s), haar_vector(&mut rng, obj.k)))
        .collect();
    pairs
        .par_iter()
        .map(|(p, f)| obj.value(&obj.product_vector(p, f)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Entangled-state amplification: `ε_entangled ≤ 4 d_S ε_product`.
pub fn lemma1_check(report: &ThermReport, d_s: usize) -> BoundReport {
    BoundReport::new(
        "lemma1",
        report.eps_entangled,
        4.0 * d_s as f64 * report.eps_product,
    )
    .input("d_S", d_s as f64)
    .input("eps_product", report.eps_product)
    .input("E", report.shell.center)
    .input("delta_b", report.shell.half_width)
    .sampled()
}

// ---------------------------------------------------------------------------
// Micro-canonical closeness

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Outcome {
    pub index: usize,
    /// `Tr[ρ(1 − P)]`.
    pub peaking: f64,
    pub report: Option<BoundReport>,
    pub skipped: Option<String>,
}

/// Weight of a state inside the global shell.
pub fn shell_weight(state: &GlobalState, sd: &SpectralData, shell: &EnergyShell) -> Result<f64> {
    let probs = match state {
        GlobalState::Pure(psi) => spectral::dephase_pure(psi, sd)?.probabilities,
        GlobalState::Mixed(rho) => spectral::dephase(rho, sd)?.probabilities,
    };
    Ok(shell.indices.iter().map(|&n| probs[n]).sum())
}

/// `‖Φ_S(ρ) − Tr_B(P)/Tr(P)‖₁ ≤ 3 ε_eth` for each state obeying the peaking
/// condition `Tr[ρ(1 − P)] ≤ ε_eth`. Other states are skipped.
pub fn prop1_check(
    sd: &SpectralData,
    shell: &EnergyShell,
    eps_eth: f64,
    states: &[GlobalState],
) -> Result<Vec<Prop1Outcome>> {
    shell.require_tag(ShellTag::Global)?;
    let micro = shells::microcanonical_reduced(sd, shell)?;
    states
        .iter()
        .enumerate()
        .map(|(index, state)| {
            let peaking = (1.0 - shell_weight(state, sd, shell)?).max(0.0);
            if peaking > eps_eth {
                return Ok(Prop1Outcome {
                    index,
                    peaking,
                    report: None,
                    skipped: Some(format!(
                        "Tr[ρ(1−P)] = {peaking:.3e} exceeds ε_eth = {eps_eth:.3e}"
                    )),
                });
            }
            let phi = spectral::equilibrium_state_of(state, sd)?;
            let lhs = hilbert::trace_distance_unchecked(phi.matrix(), micro.matrix());
            Ok(Prop1Outcome {
                index,
                peaking,
                report: Some(
                    BoundReport::new("prop1", lhs, 3.0 * eps_eth)
                        .input("eps_eth", eps_eth)
                        .input("peaking", peaking)
                        .input("E", shell.center)
                        .input("delta", shell.half_width),
                ),
                skipped: None,
            })
        })
        .collect()
}

/// Random pure state with weight `1 − leak` spread Haar-randomly over the
/// global shell and `leak` over its complement.
pub fn random_peaked_state(
    sd: &SpectralData,
    shell: &EnergyShell,
    leak: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PureState> {
    shell.require_nonempty()?;
    let d = sd.dim();
    let inside: Vec<usize> = shell.indices.clone();
    let mut is_in = vec![false; d];
    for &n in &inside {
        is_in[n] = true;
    }
    let outside: Vec<usize> = (0..d).filter(|&n| !is_in[n]).collect();
    let leak = if outside.is_empty() { 0.0 } else { leak.clamp(0.0, 1.0) };
    let cin = haar_vector(rng, inside.len());
    let cout = haar_vector(rng, outside.len().max(1));
    let mut amps = vec![c64::new(0.0, 0.0); d];
    let (wi, wo) = ((1.0 - leak).sqrt(), leak.sqrt());
    for (c, &n) in cin.iter().zip(&inside) {
        for (a, v) in amps.iter_mut().zip(sd.eigenvector(n)) {
            *a += v * (c * wi);
        }
    }
    for (c, &n) in cout.iter().zip(&outside) {
        for (a, v) in amps.iter_mut().zip(sd.eigenvector(n)) {
            *a += v * (c * wo);
        }
    }
    PureState::normalized(Space::Global(sd.shape()), amps)
}

/// Energy eigenstate `|n>` as a pure global state.
pub fn eigenstate(sd: &SpectralData, n: usize) -> Result<PureState> {
    if n >= sd.dim() {
        return Err(Error::IndexOutOfRange { index: n, len: sd.dim() });
    }
    PureState::normalized(Space::Global(sd.shape()), sd.eigenvector(n).to_vec())
}

// ---------------------------------------------------------------------------
// Eigenstate bounds

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenstateBound {
    pub n: usize,
    pub energy: f64,
    pub leakage: f64,
    /// `‖τ_n − ω‖₁ ≤ 4 d_S ε + 2 √<n|Q|n>`.
    pub eq7: BoundReport,
    /// `‖τ_n − ω‖₁ ≤ 8 ‖H_C‖²/Δ_B² + 4 d_S ε`.
    pub eq8: BoundReport,
    /// `√<n|Q|n> ≤ ‖H_C‖ / (Δ_B − |E_n − E|)`, exact on both sides.
    pub leakage_bound: BoundReport,
    /// Whether the `eq8` right-hand side dominates the `eq7` one.
    pub chain_consistent: bool,
}

/// Bounds on `‖τ_n − ω‖₁` for every eigenstate with `|E_n − E| ≤ Δ_B/2`,
/// where `E` and `Δ_B` are the center and half-width of the bath shell.
pub fn eigenstate_bound_check(
    sd: &SpectralData,
    h: &SplitHamiltonian,
    bath: &BathSpectrum,
    shell: &EnergyShell,
    omega: &DensityMatrix,
    eps_product: f64,
) -> Result<Vec<EigenstateBound>> {
    shell.require_tag(ShellTag::Bath)?;
    let d_s = sd.shape().d_s();
    if omega.dim() != d_s {
        return Err(Error::Dimension("ω does not live on the system".into()));
    }
    let (e0, db) = (shell.center, shell.half_width);
    let window = sd.indices_in(e0 - db / 2.0, e0 + db / 2.0);
    if window.is_empty() {
        return Ok(Vec::new());
    }
    let leaks = shells::eigenstate_leakages(sd, bath, shell)?;
    let norm = h.norm_hc;
    let base = 4.0 * d_s as f64 * eps_product;
    let rhs8 = 8.0 * norm * norm / (db * db) + base;
    let e = sd.energies();
    Ok(window
        .map(|n| {
            let dist = tau_distance_to(sd, n, omega.matrix());
            let leak = leaks[n];
            let rhs7 = base + 2.0 * leak.sqrt();
            let offset = (e[n] - e0).abs();
            let tag = |r: BoundReport| {
                r.input("n", n as f64)
                    .input("E_n", e[n])
                    .input("E", e0)
                    .input("delta_b", db)
                    .input("d_S", d_s as f64)
                    .input("eps", eps_product)
                    .input("norm_hc", norm)
            };
            EigenstateBound {
                n,
                energy: e[n],
                leakage: leak,
                eq7: tag(BoundReport::new("eq7", dist, rhs7).input("leakage", leak)).sampled(),
                eq8: tag(BoundReport::new("eq8", dist, rhs8)).sampled(),
                leakage_bound: tag(BoundReport::new(
                    "leakage_bound",
                    leak.sqrt(),
                    norm / (db - offset),
                )),
                chain_consistent: rhs8 + 1e-12 >= rhs7,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Reference states

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaVariant {
    MicrocanonicalReduced,
    CanonicalReduced,
}

/// Mean global energy minus mean bath energy, `Tr(H_C)/d`.
pub fn bath_offset(h: &SplitHamiltonian) -> f64 {
    hilbert::trace(h.h_c.as_ref()).re / h.h_c.nrows() as f64
}

/// `Tr_B e^{−βH} / Z` from the spectral data.
pub fn canonical_reduced(sd: &SpectralData, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::Precondition(format!("β must be finite (got {beta})")));
    }
    let e = sd.energies();
    let shift = if beta >= 0.0 { e[0] } else { e[e.len() - 1] };
    let weights: Vec<f64> = e.iter().map(|&x| (-beta * (x - shift)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d_s = sd.shape().d_s();
    let block = d_s * d_s;
    let tau = sd.tau_table();
    let mut acc = vec![c64::new(0.0, 0.0); block];
    for (n, w) in weights.iter().enumerate() {
        for (o, t) in acc.iter_mut().zip(&tau[n * block..(n + 1) * block]) {
            *o += t * (w / z);
        }
    }
    let sigma = Mat::from_fn(d_s, d_s, |i, j| acc[i * d_s + j]);
    DensityMatrix::new(Space::System(d_s), hilbert::hermitian_part(sigma.as_ref()))
}

/// Target state `ω(β(E))`. The micro-canonical variant averages `τ_n` over
/// the global shell of half-width `half_width` at `E + Tr(H_C)/d`.
pub fn omega_builder(
    sd: &SpectralData,
    h: &SplitHamiltonian,
    profile: &ThermoProfile,
    e: f64,
    variant: OmegaVariant,
    half_width: f64,
) -> Result<DensityMatrix> {
    let en = sd.energies();
    if !(e >= en[0] && e <= en[en.len() - 1]) {
        return Err(Error::OutOfRange {
            energy: e,
            lo: en[0],
            hi: en[en.len() - 1],
        });
    }
    match variant {
        OmegaVariant::MicrocanonicalReduced => {
            let shell = shells::make_shell(en, e + bath_offset(h), half_width, ShellTag::Global)?;
            shells::microcanonical_reduced(sd, &shell)
        }
        OmegaVariant::CanonicalReduced => canonical_reduced(sd, profile.beta_at(e)?),
    }
}

// ---------------------------------------------------------------------------
// End-to-end audit

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub grid_e: usize,
    pub grid_db: usize,
    /// Geometric `Δ_B` range of the grid; defaults to `[‖H_C‖/2, 4‖H_C‖]`.
    pub db_range: Option<(f64, f64)>,
    pub sampler: SamplerConfig,
    pub omega: OmegaVariant,
    /// Global shell half-width of the micro-canonical `ω`; defaults to the
    /// profile kernel width.
    pub omega_half_width: Option<f64>,
    /// Kernel-width factors for the sensitivity of the predicted precision.
    pub kernel_factors: Vec<f64>,
    /// Budget multiplier when a Lemma-1 cell comes out inconclusive.
    pub retry_factor: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            grid_e: 10,
            grid_db: 10,
            db_range: None,
            sampler: SamplerConfig::default(),
            omega: OmegaVariant::MicrocanonicalReduced,
            omega_half_width: None,
            kernel_factors: vec![0.75, 1.5],
            retry_factor: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Grid,
    /// `Δ_B = 2Δ`, the width paired with the predicted scale.
    Pairing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: usize,
    pub kind: CellKind,
    #[serde(rename = "E")]
    pub e: f64,
    pub delta_b: f64,
    pub shell_size: usize,
    pub eps_product: Option<f64>,
    pub eps_entangled: Option<f64>,
    /// `β² Δ_B ‖H_C‖ / C`, the precision an ideal bath reaches.
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub eps_min: f64,
    /// `eps_product ≤ eps_min`; a sampled lower bound cannot prove this.
    pub ideal: Option<bool>,
    pub lemma1: Option<BoundReport>,
    pub lemma1_retried: bool,
    pub eigenstates: usize,
    pub eq7_violations: usize,
    pub eq8_violations: usize,
    pub leakage_violations: usize,
    pub chain_inconsistent: usize,
    pub min_slack_eq7: Option<f64>,
    pub min_slack_eq8: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair_count: u64,
    /// Largest `‖τ_m − τ_n‖₁ − ‖τ_m − ω‖₁ − ‖τ_n − ω‖₁`; never positive.
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub triangle_max_excess: f64,
    pub triangle_violations: u64,
    /// Largest `‖τ_m − ω‖₁ + ‖τ_n − ω‖₁` over pairs.
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub chain_max: f64,
    /// Pairs whose eigenvalues are not both within `Δ` of their cell center.
    pub outside_cell: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSensitivity {
    pub factor: f64,
    pub kernel_width: f64,
    pub eps_eth_pred: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub bath_ideal: bool,
    pub eth_pred: f64,
    pub eth_measured: f64,
    /// The predicted precision is at least 2, the largest possible distance.
    pub vacuous: bool,
    /// `eth_measured ≤ eth_pred`, asserted only for ideal baths.
    pub implication_holds: Option<bool>,
    pub grid_ideal_cells: usize,
    pub grid_cells: usize,
    pub conclusive_violations: usize,
    pub inconclusive_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub model_hash: String,
    pub region: (f64, f64),
    pub constants: Theorem1Constants,
    pub eth: EthReport,
    pub cells: Vec<CellResult>,
    pub pairs: PairSummary,
    pub sensitivity: Vec<KernelSensitivity>,
    pub verdict: AuditVerdict,
    pub config: AuditConfig,
    /// Per-eigenstate bound rows; written to CSV only.
    #[serde(skip)]
    pub rows: Vec<(usize, EigenstateBound)>,
}

/// One `(E, Δ_B)` cell: thermalization scan, Lemma-1 check with a budget
/// retry, and eigenstate bounds.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub result: CellResult,
    pub omega: Option<DensityMatrix>,
    pub rows: Vec<EigenstateBound>,
}

#[allow(clippy::too_many_arguments)]
pub fn scan_cell(
    sd: &SpectralData,
    h: &SplitHamiltonian,
    bath: &BathSpectrum,
    profile: &ThermoProfile,
    config: &AuditConfig,
    omega_hw: f64,
    cell: usize,
    kind: CellKind,
    e: f64,
    delta_b: f64,
) -> Result<CellOutcome> {
    let d_s = sd.shape().d_s();
    let eps_min = thermo::precision_condition(profile, e, delta_b, h.norm_hc)?;
    let shell = shells::make_shell(&bath.energies, e, delta_b, ShellTag::Bath)?;
    let mut result = CellResult {
        cell,
        kind,
        e,
        delta_b,
        shell_size: shell.len(),
        eps_product: None,
        eps_entangled: None,
        eps_min,
        ideal: None,
        lemma1: None,
        lemma1_retried: false,
        eigenstates: 0,
        eq7_violations: 0,
        eq8_violations: 0,
        leakage_violations: 0,
        chain_inconsistent: 0,
        min_slack_eq7: None,
        min_slack_eq8: None,
    };
    if shell.is_empty() {
        return Ok(CellOutcome {
            result,
            omega: None,
            rows: Vec::new(),
        });
    }
    let omega = omega_builder(sd, h, profile, e, config.omega, omega_hw)?;
    let budget = config.sampler.with_seed(cell_seed(config.sampler.seed, cell as u64));
    let mut therm = therm_scan(sd, bath, &shell, &omega, &budget)?;
    let mut lemma1 = lemma1_check(&therm, d_s);
    if lemma1.verdict == Verdict::Inconclusive && config.retry_factor > 1 {
        therm = therm_scan(sd, bath, &shell, &omega, &budget.scaled(config.retry_factor))?;
        lemma1 = lemma1_check(&therm, d_s);
        result.lemma1_retried = true;
    }
    let rows = eigenstate_bound_check(sd, h, bath, &shell, &omega, therm.eps_product)?;
    result.eps_product = Some(therm.eps_product);
    result.eps_entangled = Some(therm.eps_entangled);
    result.ideal = Some(therm.eps_product <= eps_min);
    result.lemma1 = Some(lemma1);
    result.eigenstates = rows.len();
    result.eq7_violations = rows.iter().filter(|r| !r.eq7.holds).count();
    result.eq8_violations = rows.iter().filter(|r| !r.eq8.holds).count();
    result.leakage_violations = rows.iter().filter(|r| !r.leakage_bound.holds).count();
    result.chain_inconsistent = rows.iter().filter(|r| !r.chain_consistent).count();
    result.min_slack_eq7 = rows.iter().map(|r| r.eq7.slack).reduce(f64::min);
    result.min_slack_eq8 = rows.iter().map(|r| r.eq8.slack).reduce(f64::min);
    Ok(CellOutcome {
        result,
        omega: Some(omega),
        rows,
    })
}

/// `[‖H_C‖/2, 4‖H_C‖]`.
pub fn default_db_range(norm_hc: f64) -> (f64, f64) {
    (0.5 * norm_hc, 4.0 * norm_hc)
}

/// Half-width of the global shell behind a micro-canonical `ω`.
pub fn omega_half_width(config: &AuditConfig, profile: &ThermoProfile, norm_hc: f64) -> f64 {
    config.omega_half_width.unwrap_or(if profile.kernel_width.is_finite() {
        profile.kernel_width
    } else {
        norm_hc
    })
}

/// Centers of `n` equal sub-intervals of `[lo, hi]`.
pub fn cell_centers(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .collect()
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (r * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Measured ETH precision of the global Hamiltonian against the precision
/// predicted from bath thermodynamics, with the supporting bath-shell scans.
pub fn theorem1_audit(
    sd: &SpectralData,
    h: &SplitHamiltonian,
    bath: &BathSpectrum,
    profile: &ThermoProfile,
    region: (f64, f64),
    config: &AuditConfig,
) -> Result<AuditReport> {
    if config.grid_e == 0 {
        return Err(Error::Precondition("energy grid must have at least one point".into()));
    }
    check_region(sd, region)?;
    let d_s = sd.shape().d_s();
    let norm = h.norm_hc;
    let constants = thermo::theorem1_constants(profile, region, d_s, norm)?;
    let delta = constants.delta;
    let eth = eth_scan(sd, region, delta)?;
    let omega_hw = omega_half_width(config, profile, norm);

    let energies = cell_centers(region.0, region.1, config.grid_e);
    let mut cells: Vec<(CellKind, f64, f64)> = Vec::new();
    if config.grid_db > 0 {
        let db_range = config.db_range.unwrap_or(default_db_range(norm));
        for (e, db) in grid_cells(region, config.grid_e, db_range, config.grid_db) {
            cells.push((CellKind::Grid, e, db));
        }
    }
    for &e in &energies {
        cells.push((CellKind::Pairing, e, 2.0 * delta));
    }
    let outcomes: Vec<CellOutcome> = cells
        .iter()
        .enumerate()
        .map(|(i, &(kind, e, db))| scan_cell(sd, h, bath, profile, config, omega_hw, i, kind, e, db))
        .collect::<Result<_>>()?;

    // Pair chain through the pairing cell nearest each midpoint.
    let pairing: Vec<&CellOutcome> = outcomes
        .iter()
        .filter(|o| o.result.kind == CellKind::Pairing)
        .collect();
    let pairs = pair_summary(sd, region, delta, &pairing)?;

    let sensitivity = config
        .kernel_factors
        .iter()
        .map(|&f| {
            let w = profile.kernel_width * f;
            let mut entry = KernelSensitivity {
                factor: f,
                kernel_width: w,
                eps_eth_pred: None,
                delta: None,
            };
            if !w.is_finite() || profile.levels == 0 {
                return entry;
            }
            let cfg = ThermoConfig::new(w, profile.energy_grid.len());
            if let Ok(p) = thermo::thermo_profile_on_grid_with(&bath.energies, &cfg, &profile.energy_grid) {
                if let Ok(c) = thermo::theorem1_constants(&p, region, d_s, norm) {
                    entry.eps_eth_pred = Some(c.eps_eth);
                    entry.delta = Some(c.delta);
                }
            }
            entry
        })
        .collect();

    let grid_cells: Vec<&CellResult> = outcomes
        .iter()
        .map(|o| &o.result)
        .filter(|c| c.kind == CellKind::Grid && c.ideal.is_some())
        .collect();
    let pairing_nonempty: Vec<&CellResult> = outcomes
        .iter()
        .map(|o| &o.result)
        .filter(|c| c.kind == CellKind::Pairing && c.ideal.is_some())
        .collect();
    let bath_ideal = !pairing_nonempty.is_empty() && pairing_nonempty.iter().all(|c| c.ideal == Some(true));
    let conclusive_violations = outcomes
        .iter()
        .map(|o| {
            o.rows.iter().filter(|r| r.eq7.is_conclusive_violation()).count()
                + o.rows.iter().filter(|r| r.eq8.is_conclusive_violation()).count()
                + o.rows.iter().filter(|r| r.leakage_bound.is_conclusive_violation()).count()
                + usize::from(o.result.lemma1.as_ref().is_some_and(|l| l.is_conclusive_violation()))
        })
        .sum();
    let inconclusive_cells = outcomes
        .iter()
        .filter(|o| {
            o.result
                .lemma1
                .as_ref()
                .is_some_and(|l| l.verdict == Verdict::Inconclusive)
                || o.rows
                    .iter()
                    .any(|r| r.eq7.verdict == Verdict::Inconclusive || r.eq8.verdict == Verdict::Inconclusive)
        })
        .count();
    let verdict = AuditVerdict {
        bath_ideal,
        eth_pred: constants.eps_eth,
        eth_measured: eth.eps_measured,
        vacuous: constants.eps_eth >= 2.0,
        implication_holds: bath_ideal.then_some(eth.eps_measured <= constants.eps_eth),
        grid_ideal_cells: grid_cells.iter().filter(|c| c.ideal == Some(true)).count(),
        grid_cells: grid_cells.len(),
        conclusive_violations,
        inconclusive_cells,
    };

    let mut rows = Vec::new();
    let mut results = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        for r in o.rows {
            rows.push((o.result.cell, r));
        }
        results.push(o.result);
    }
    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        model_hash: sd.model_hash().to_string(),
        region,
        constants,
        eth,
        cells: results,
        pairs,
        sensitivity,
        verdict,
        config: config.clone(),
        rows,
    })
}

fn pair_summary(
    sd: &SpectralData,
    region: (f64, f64),
    delta: f64,
    pairing: &[&CellOutcome],
) -> Result<PairSummary> {
    let mut summary = PairSummary {
        pair_count: 0,
        triangle_max_excess: f64::NEG_INFINITY,
        triangle_violations: 0,
        chain_max: 0.0,
        outside_cell: 0,
    };
    let usable: Vec<(f64, &DensityMatrix)> = pairing
        .iter()
        .filter_map(|o| o.omega.as_ref().map(|w| (o.result.e, w)))
        .collect();
    if usable.is_empty() {
        summary.triangle_max_excess = 0.0;
        return Ok(summary);
    }
    let range = sd.indices_in(region.0, region.1);
    let e = sd.energies();
    // ‖τ_n − ω_c‖₁ for every region state and pairing cell.
    let to_omega: Vec<Vec<f64>> = usable
        .iter()
        .map(|(_, w)| range.clone().map(|n| tau_distance_to(sd, n, w.matrix())).collect())
        .collect();
    let start = range.start;
    let end = range.end;
    let rows: Vec<PairSummary> = range
        .clone()
        .into_par_iter()
        .map(|n| {
            let mut s = PairSummary {
                pair_count: 0,
                triangle_max_excess: f64::NEG_INFINITY,
                triangle_violations: 0,
                chain_max: 0.0,
                outside_cell: 0,
            };
            for m in n + 1..end {
                if e[m] - e[n] > 2.0 * delta {
                    break;
                }
                let mid = 0.5 * (e[n] + e[m]);
                let c = (0..usable.len())
                    .min_by(|&a, &b| (usable[a].0 - mid).abs().total_cmp(&(usable[b].0 - mid).abs()))
                    .unwrap_or(0);
                let ec = usable[c].0;
                let dnm = tau_distance(sd, n, m);
                let chain = to_omega[c][n - start] + to_omega[c][m - start];
                s.pair_count += 1;
                s.triangle_max_excess = s.triangle_max_excess.max(dnm - chain);
                if dnm > chain + TRIANGLE_TOLERANCE {
                    s.triangle_violations += 1;
                }
                s.chain_max = s.chain_max.max(chain);
                if (e[n] - ec).abs() > delta || (e[m] - ec).abs() > delta {
                    s.outside_cell += 1;
                }
            }
            s
        })
        .collect();
    for s in rows {
        summary.pair_count += s.pair_count;
        summary.triangle_max_excess = summary.triangle_max_excess.max(s.triangle_max_excess);
        summary.triangle_violations += s.triangle_violations;
        summary.chain_max = summary.chain_max.max(s.chain_max);
        summary.outside_cell += s.outside_cell;
    }
    if summary.pair_count == 0 {
        summary.triangle_max_excess = 0.0;
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellBound {
    pub cell: usize,
    #[serde(flatten)]
    pub bound: EigenstateBound,
}

/// Eigenstate bounds over a list of `(E, Δ_B)` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub schema_version: u32,
    pub model_hash: String,
    pub cells: Vec<CellResult>,
    pub records: Vec<CellBound>,
}

impl BoundsReport {
    pub fn conclusive_violations(&self) -> usize {
        self.records
            .iter()
            .map(|r| {
                [&r.bound.eq7, &r.bound.eq8, &r.bound.leakage_bound]
                    .iter()
                    .filter(|b| b.is_conclusive_violation())
                    .count()
            })
            .sum::<usize>()
            + self
                .cells
                .iter()
                .filter(|c| c.lemma1.as_ref().is_some_and(|l| l.is_conclusive_violation()))
                .count()
    }

    pub fn rows(&self) -> Vec<(usize, EigenstateBound)> {
        self.records.iter().map(|r| (r.cell, r.bound.clone())).collect()
    }
}

/// Runs [`scan_cell`] on every `(E, Δ_B)` pair.
pub fn bounds_scan(
    sd: &SpectralData,
    h: &SplitHamiltonian,
    bath: &BathSpectrum,
    profile: &ThermoProfile,
    cells: &[(f64, f64)],
    config: &AuditConfig,
) -> Result<BoundsReport> {
    let omega_hw = omega_half_width(config, profile, h.norm_hc);
    let mut results = Vec::with_capacity(cells.len());
    let mut records = Vec::new();
    for (i, &(e, db)) in cells.iter().enumerate() {
        let o = scan_cell(sd, h, bath, profile, config, omega_hw, i, CellKind::Grid, e, db)?;
        records.extend(o.rows.into_iter().map(|bound| CellBound { cell: i, bound }));
        results.push(o.result);
    }
    Ok(BoundsReport {
        schema_version: SCHEMA_VERSION,
        model_hash: sd.model_hash().to_string(),
        cells: results,
        records,
    })
}

/// `grid_e × grid_db` cells: energies at sub-interval centers of `region`,
/// widths geometric over `db_range`.
pub fn grid_cells(region: (f64, f64), grid_e: usize, db_range: (f64, f64), grid_db: usize) -> Vec<(f64, f64)> {
    let widths = geometric_grid(db_range.0, db_range.1, grid_db.max(1));
    cell_centers(region.0, region.1, grid_e)
        .into_iter()
        .flat_map(|e| widths.iter().map(move |&db| (e, db)))
        .collect()
}

// ---------------------------------------------------------------------------
// Serialization

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

const BOUND_COLUMNS: [&str; 10] = [
    "cell", "n", "E_n", "E", "delta_b", "name", "lhs", "rhs", "slack", "holds",
];

fn bound_record(cell: usize, r: &BoundReport) -> Vec<String> {
    let get = |k: &str| r.inputs.get(k).copied().unwrap_or(f64::NAN);
    vec![
        cell.to_string(),
        (get("n") as usize).to_string(),
        fmt(get("E_n")),
        fmt(get("E")),
        fmt(get("delta_b")),
        r.name.clone(),
        fmt(r.lhs),
        fmt(r.rhs),
        fmt(r.slack),
        r.holds.to_string(),
    ]
}

/// One row per (cell, eigenstate, bound).
pub fn write_bounds_csv(path: &Path, rows: &[(usize, EigenstateBound)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = BOUND_COLUMNS.to_vec();
    header.push("verdict");
    w.write_record(&header)?;
    for (cell, row) in rows {
        for r in [&row.eq7, &row.eq8, &row.leakage_bound] {
            let mut rec = bound_record(*cell, r);
            rec.push(verdict_name(r.verdict).into());
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// One row per audit cell.
pub fn write_cells_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "cell",
        "kind",
        "E",
        "delta_b",
        "shell_size",
        "eps_product",
        "eps_entangled",
        "eps_min",
        "ideal",
        "lemma1_lhs",
        "lemma1_rhs",
        "lemma1_slack",
        "lemma1_holds",
        "eigenstates",
        "eq7_violations",
        "eq8_violations",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt);
    for c in cells {
        let l = c.lemma1.as_ref();
        w.write_record([
            c.cell.to_string(),
            match c.kind {
                CellKind::Grid => "grid".to_string(),
                CellKind::Pairing => "pairing".to_string(),
            },
            fmt(c.e),
            fmt(c.delta_b),
            c.shell_size.to_string(),
            opt(c.eps_product),
            opt(c.eps_entangled),
            fmt(c.eps_min),
            c.ideal.map_or_else(String::new, |b| b.to_string()),
            opt(l.map(|l| l.lhs)),
            opt(l.map(|l| l.rhs)),
            opt(l.map(|l| l.slack)),
            l.map_or_else(String::new, |l| l.holds.to_string()),
            c.eigenstates.to_string(),
            c.eq7_violations.to_string(),
            c.eq8_violations.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
