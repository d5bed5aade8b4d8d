//! System+bath spin chains with the split `H = H_C + 1_S ⊗ H_B`.
//!
//! Sites are laid out on an open chain, system sites first. The boundary bath
//! site is the first bath site. Site `j` of an `N`-site chain is bit `N-1-j`
//! of the computational basis index, which reproduces the global ordering
//! `i = s * d_B + b` of [`crate::hilbert`].
//!
//! Pauli convention: `Z|0> = |0>`, `Z|1> = -|1>`. Every term enters with a
//! plus sign:
//!
//! ```text
//! transverse_ising: J Σ Z_j Z_{j+1} + h Σ X_j + h_S Σ_sys Z_j + Σ w_j Z_j
//! xxz:              J Σ (X X + Y Y + Δz Z Z) + h Σ X_j + h_S Σ_sys Z_j + Σ w_j Z_j
//! ```
//!
//! The bond across the system/bath boundary uses `g` in place of `J`.

use std::collections::BTreeMap;

use faer::{c64, Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{self, SpaceShape};
use crate::report::BoundReport;

pub const DEFAULT_MAX_SITES: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    TransverseIsing,
    Xxz,
    CustomDense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    #[serde(rename = "J", default)]
    pub j: f64,
    #[serde(default)]
    pub delta_z: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(rename = "h_S", default)]
    pub h_s: f64,
    #[serde(default)]
    pub g: f64,
    /// Longitudinal field on bath sites; breaks integrability of the bath chain.
    #[serde(default)]
    pub h_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for Disorder {
    fn default() -> Self {
        Self {
            seed: 0,
            amplitude: 0.0,
        }
    }
}

/// Dense complex matrix in JSON: separate real and imaginary row lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl DenseMatrix {
    pub fn from_mat(m: MatRef<'_, c64>) -> Self {
        let re = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect())
            .collect();
        let has_im = (0..m.nrows()).any(|i| (0..m.ncols()).any(|j| m[(i, j)].im != 0.0));
        let im = has_im.then(|| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect())
                .collect()
        });
        Self { re, im }
    }

    pub fn to_mat(&self) -> Result<Mat<c64>> {
        let n = self.re.len();
        let square = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !square(&self.re) || self.im.as_ref().is_some_and(|im| !square(im)) {
            return Err(Error::Spec("custom matrix must be square".into()));
        }
        let m = Mat::from_fn(n, n, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |im| im[i][j]);
            c64::new(self.re[i][j], im)
        });
        if (0..n).any(|i| (0..n).any(|j| !m[(i, j)].re.is_finite() || !m[(i, j)].im.is_finite())) {
            return Err(Error::Spec("custom matrix has non-finite entries".into()));
        }
        Ok(m)
    }
}

/// Explicit operators for the `custom_dense` family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomOperators {
    /// Global coupling term, `d_S d_B` square.
    pub h_c: DenseMatrix,
    /// Bath Hamiltonian, `d_B` square.
    pub h_b: DenseMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_family: ModelFamily,
    pub sys_sites: usize,
    pub bath_sites: usize,
    pub couplings: Couplings,
    #[serde(default)]
    pub disorder: Disorder,
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomOperators>,
}

fn default_units() -> String {
    "dimensionless".to_string()
}

impl ModelSpec {
    /// Transverse-field Ising bath with a weakly disordered longitudinal field.
    pub fn default_benchmark(sys_sites: usize, bath_sites: usize) -> Self {
        Self {
            model_family: ModelFamily::TransverseIsing,
            sys_sites,
            bath_sites,
            couplings: Couplings {
                j: 1.0,
                delta_z: 0.0,
                h: 0.9055,
                h_s: 0.5,
                g: 0.4,
                h_z: 0.809,
            },
            disorder: Disorder {
                seed: 7,
                amplitude: 1e-3,
            },
            units: default_units(),
            custom: None,
        }
    }

    /// `custom_dense` model with `d_S = 2^sys_sites`, `d_B = 2^bath_sites`
    /// inferred from the matrix shapes when they are powers of two.
    pub fn custom(h_c: MatRef<'_, c64>, h_b: MatRef<'_, c64>) -> Result<Self> {
        let d_b = h_b.nrows();
        if d_b == 0 || h_c.nrows() % d_b != 0 {
            return Err(Error::Dimension(format!(
                "H_C dimension {} is not a multiple of H_B dimension {d_b}",
                h_c.nrows()
            )));
        }
        let d_s = h_c.nrows() / d_b;
        let sites = |d: usize| if d.is_power_of_two() { d.trailing_zeros() as usize } else { 0 };
        Ok(Self {
            model_family: ModelFamily::CustomDense,
            sys_sites: sites(d_s),
            bath_sites: sites(d_b),
            couplings: Couplings {
                j: 0.0,
                delta_z: 0.0,
                h: 0.0,
                h_s: 0.0,
                g: 0.0,
                h_z: 0.0,
            },
            disorder: Disorder::default(),
            units: default_units(),
            custom: Some(CustomOperators {
                h_c: DenseMatrix::from_mat(h_c),
                h_b: DenseMatrix::from_mat(h_b),
            }),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    /// Canonical JSON: keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("model spec serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self, max_sites: usize) -> Result<()> {
        let c = &self.couplings;
        let params = [c.j, c.delta_z, c.h, c.h_s, c.g, c.h_z, self.disorder.amplitude];
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Spec("all couplings must be finite".into()));
        }
        if self.disorder.amplitude < 0.0 {
            return Err(Error::Spec("disorder amplitude must be nonnegative".into()));
        }
        match self.model_family {
            ModelFamily::CustomDense => {
                if self.custom.is_none() {
                    return Err(Error::Spec("custom_dense needs explicit h_c and h_b".into()));
                }
            }
            _ => {
                if self.sys_sites < 1 || self.bath_sites < 1 {
                    return Err(Error::Spec("need at least one system and one bath site".into()));
                }
                if self.sys_sites + self.bath_sites > max_sites {
                    return Err(Error::Resource(format!(
                        "{} sites exceed the cap of {max_sites}",
                        self.sys_sites + self.bath_sites
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One Pauli factor of a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pauli {
    X,
    Y,
    Z,
}

/// `coeff * Π P_site` on an `n`-site register.
#[derive(Clone, Debug)]
struct PauliTerm {
    coeff: f64,
    ops: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    fn new(coeff: f64, ops: &[(usize, Pauli)]) -> Self {
        Self {
            coeff,
            ops: ops.to_vec(),
        }
    }

    /// Adds this term into `m`, an `2^n` square matrix.
    fn accumulate(&self, m: &mut Mat<c64>, n: usize) {
        let mut flip = 0usize;
        for &(site, p) in &self.ops {
            if p != Pauli::Z {
                flip ^= 1 << (n - 1 - site);
            }
        }
        for col in 0..(1usize << n) {
            let mut amp = c64::new(self.coeff, 0.0);
            for &(site, p) in &self.ops {
                let bit = (col >> (n - 1 - site)) & 1;
                let sign = if bit == 0 { 1.0 } else { -1.0 };
                match p {
                    Pauli::X => {}
                    Pauli::Z => amp *= sign,
                    Pauli::Y => amp *= c64::new(0.0, sign),
                }
            }
            m[(col ^ flip, col)] += amp;
        }
    }
}

fn assemble(terms: &[PauliTerm], n: usize) -> Mat<c64> {
    let d = 1usize << n;
    let mut m = Mat::<c64>::zeros(d, d);
    for t in terms {
        t.accumulate(&mut m, n);
    }
    m
}

/// Term lists for a spin model, split into the coupling part (indices on the
/// full chain) and the bath part (indices on the bath chain alone).
struct Terms {
    coupling: Vec<PauliTerm>,
    bath: Vec<PauliTerm>,
}

fn spin_terms(spec: &ModelSpec) -> Terms {
    let ns = spec.sys_sites;
    let nb = spec.bath_sites;
    let c = &spec.couplings;
    let bond = |j: f64, a: usize, b: usize| -> Vec<PauliTerm> {
        use Pauli::*;
        match spec.model_family {
            ModelFamily::Xxz => vec![
                PauliTerm::new(j, &[(a, X), (b, X)]),
                PauliTerm::new(j, &[(a, Y), (b, Y)]),
                PauliTerm::new(j * c.delta_z, &[(a, Z), (b, Z)]),
            ],
            _ => vec![PauliTerm::new(j, &[(a, Z), (b, Z)])],
        }
    };

    // Fields are drawn system sites first so the system part is independent of
    // the bath size.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.disorder.seed);
    let mut fields = Vec::with_capacity(ns + nb);
    for _ in 0..ns + nb {
        let u: f64 = rng.random();
        fields.push(spec.disorder.amplitude * (2.0 * u - 1.0));
    }
    let disordered = spec.disorder.amplitude > 0.0;

    let mut coupling = Vec::new();
    for s in 0..ns {
        coupling.push(PauliTerm::new(c.h, &[(s, Pauli::X)]));
        coupling.push(PauliTerm::new(c.h_s, &[(s, Pauli::Z)]));
        if disordered {
            coupling.push(PauliTerm::new(fields[s], &[(s, Pauli::Z)]));
        }
    }
    for s in 0..ns.saturating_sub(1) {
        coupling.extend(bond(c.j, s, s + 1));
    }
    coupling.extend(bond(c.g, ns - 1, ns));

    let mut bath = Vec::new();
    for b in 0..nb {
        bath.push(PauliTerm::new(c.h, &[(b, Pauli::X)]));
        bath.push(PauliTerm::new(c.h_z, &[(b, Pauli::Z)]));
        if disordered {
            bath.push(PauliTerm::new(fields[ns + b], &[(b, Pauli::Z)]));
        }
    }
    for b in 0..nb.saturating_sub(1) {
        bath.extend(bond(c.j, b, b + 1));
    }

    coupling.retain(|t| t.coeff != 0.0);
    bath.retain(|t| t.coeff != 0.0);
    Terms { coupling, bath }
}

/// `H = H_C + 1_S ⊗ H_B` with its pieces kept separately.
#[derive(Clone, Debug)]
pub struct SplitHamiltonian {
    pub shape: SpaceShape,
    /// Bath Hamiltonian on the `d_B`-dimensional bath space.
    pub h_b: Mat<c64>,
    /// Coupling term on the global space.
    pub h_c: Mat<c64>,
    /// Full Hamiltonian on the global space.
    pub h: Mat<c64>,
    pub norm_hc: f64,
    /// Number of bath qubits when `d_B` is a power of two; enables the
    /// boundary-locality check.
    pub bath_qubits: Option<usize>,
    pub model_hash: String,
}

impl SplitHamiltonian {
    /// Assembles `H` from explicit pieces.
    pub fn from_parts(h_c: Mat<c64>, h_b: Mat<c64>, model_hash: String) -> Result<Self> {
        let d_b = h_b.nrows();
        if h_b.ncols() != d_b || h_c.ncols() != h_c.nrows() || d_b == 0 || h_c.nrows() % d_b != 0 {
            return Err(Error::Dimension(format!(
                "H_C is {}x{}, H_B is {}x{}",
                h_c.nrows(),
                h_c.ncols(),
                h_b.nrows(),
                h_b.ncols()
            )));
        }
        let shape = SpaceShape::new(h_c.nrows() / d_b, d_b)?;
        hilbert::check_hermitian(h_c.as_ref()).map_err(|e| Error::Spec(format!("H_C: {e}")))?;
        hilbert::check_hermitian(h_b.as_ref()).map_err(|e| Error::Spec(format!("H_B: {e}")))?;
        let mut h = h_c.clone();
        add_bath_embedded(&mut h, h_b.as_ref(), shape);
        let norm_hc = hilbert::operator_norm(h_c.as_ref())?;
        Ok(Self {
            shape,
            h_b,
            h_c,
            h,
            norm_hc,
            bath_qubits: d_b.is_power_of_two().then(|| d_b.trailing_zeros() as usize),
            model_hash,
        })
    }

    /// `1_S ⊗ H_B` on the global space, built on demand.
    pub fn h_b_embedded(&self) -> Mat<c64> {
        let d = self.shape.total();
        let mut m = Mat::<c64>::zeros(d, d);
        add_bath_embedded(&mut m, self.h_b.as_ref(), self.shape);
        m
    }
}

fn add_bath_embedded(m: &mut Mat<c64>, h_b: MatRef<'_, c64>, shape: SpaceShape) {
    let d_b = shape.d_b();
    for s in 0..shape.d_s() {
        for j in 0..d_b {
            for i in 0..d_b {
                m[(s * d_b + i, s * d_b + j)] += h_b[(i, j)];
            }
        }
    }
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<SplitHamiltonian> {
    build_hamiltonian_capped(spec, DEFAULT_MAX_SITES)
}

pub fn build_hamiltonian_capped(spec: &ModelSpec, max_sites: usize) -> Result<SplitHamiltonian> {
    spec.validate(max_sites)?;
    let hash = spec.content_hash();
    if spec.model_family == ModelFamily::CustomDense {
        let custom = spec.custom.as_ref().expect("validated");
        let h_c = custom.h_c.to_mat()?;
        let h_b = custom.h_b.to_mat()?;
        if h_c.nrows() > 1 << max_sites {
            return Err(Error::Resource(format!(
                "global dimension {} exceeds the cap of 2^{max_sites}",
                h_c.nrows()
            )));
        }
        return SplitHamiltonian::from_parts(h_c, h_b, hash);
    }

    let ns = spec.sys_sites;
    let nb = spec.bath_sites;
    let terms = spin_terms(spec);
    let h_b = assemble(&terms.bath, nb);
    let h_c = assemble(&terms.coupling, ns + nb);
    // H_C lives on the system plus the boundary site; its norm is read off
    // that small operator so it cannot depend on the bath size.
    let local = assemble(&terms.coupling, ns + 1);
    let norm_hc = hilbert::operator_norm(local.as_ref())?;
    let shape = SpaceShape::new(1 << ns, 1 << nb)?;
    let mut h = h_c.clone();
    add_bath_embedded(&mut h, h_b.as_ref(), shape);
    Ok(SplitHamiltonian {
        shape,
        h_b,
        h_c,
        h,
        norm_hc,
        bath_qubits: Some(nb),
        model_hash: hash,
    })
}

/// Per-check residuals of the split invariants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitReport {
    pub checks: Vec<BoundReport>,
    /// Interior bath sites on which the coupling term acts nontrivially.
    pub nonlocal_sites: Vec<usize>,
}

impl SplitReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&BoundReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const SPLIT_TOLERANCE: f64 = 1e-13;
pub const LOCALITY_TOLERANCE: f64 = 1e-12;
pub const NORM_TOLERANCE: f64 = 1e-10;

pub fn verify_split(h: &SplitHamiltonian) -> Result<SplitReport> {
    let shape = h.shape;
    let d = shape.total();
    let d_b = shape.d_b();
    let mut split = 0.0_f64;
    for j in 0..d {
        for i in 0..d {
            let (si, bi) = shape.split(i);
            let (sj, bj) = shape.split(j);
            let hb = if si == sj { h.h_b[(bi, bj)] } else { c64::new(0.0, 0.0) };
            split = split.max((h.h[(i, j)] - h.h_c[(i, j)] - hb).norm());
        }
    }
    let scale = hilbert::max_abs(h.h.as_ref()).max(1.0);
    let mut checks = vec![BoundReport::with_tolerance("split_identity", split, SPLIT_TOLERANCE * scale, 0.0)
        .input("max_abs_h", scale)];

    let mut nonlocal_sites = Vec::new();
    let norm_reference;
    if let Some(nb) = h.bath_qubits {
        let n = shape.total().trailing_zeros() as usize;
        let ns = n - nb;
        let mut worst = 0.0_f64;
        for site in ns + 1..n {
            let mut site_worst = 0.0_f64;
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                site_worst = site_worst.max(commutator_max_abs(h.h_c.as_ref(), n, site, p));
            }
            if site_worst > LOCALITY_TOLERANCE {
                nonlocal_sites.push(site - ns);
            }
            worst = worst.max(site_worst);
        }
        checks.push(
            BoundReport::with_tolerance("boundary_locality", worst, LOCALITY_TOLERANCE, 0.0)
                .input("bath_sites", nb as f64),
        );
        // Restrict H_C to the all-zero configuration of the interior bath
        // sites; when locality holds this is the local coupling operator.
        let d_local = 2 * (d / d_b);
        let interior = nb - 1;
        let local = Mat::from_fn(d_local, d_local, |r, c| h.h_c[(r << interior, c << interior)]);
        norm_reference = hilbert::operator_norm(hilbert::hermitian_part(local.as_ref()).as_ref())?;
    } else {
        norm_reference = hilbert::operator_norm(h.h_c.as_ref())?;
    }
    let rel = (h.norm_hc - norm_reference).abs() / norm_reference.max(f64::MIN_POSITIVE);
    checks.push(
        BoundReport::with_tolerance("norm_consistency", rel, NORM_TOLERANCE, 0.0)
            .input("norm_hc", h.norm_hc)
            .input("recomputed", norm_reference),
    );
    Ok(SplitReport {
        checks,
        nonlocal_sites,
    })
}

/// Max-abs entry of `[X, P_site]` for a single-site Pauli on an `n`-qubit register.
fn commutator_max_abs(x: MatRef<'_, c64>, n: usize, site: usize, p: Pauli) -> f64 {
    let mask = 1usize << (n - 1 - site);
    let flip = if p == Pauli::Z { 0 } else { mask };
    // P|c> = phase(c) |c ^ flip>
    let phase = |c: usize| -> c64 {
        let sign = if c & mask == 0 { 1.0 } else { -1.0 };
        match p {
            Pauli::X => c64::new(1.0, 0.0),
            Pauli::Y => c64::new(0.0, sign),
            Pauli::Z => c64::new(sign, 0.0),
        }
    };
    let d = x.nrows();
    let mut worst = 0.0_f64;
    for c in 0..d {
        let pc = phase(c);
        let cf = c ^ flip;
        for r in 0..d {
            // (X P)[r,c] = X[r, c^f] phase(c);  (P X)[r,c] = phase(r^f) X[r^f, c]
            let rf = r ^ flip;
            let v = x[(r, cf)] * pc - phase(rf) * x[(rf, c)];
            worst = worst.max(v.norm());
        }
    }
    worst
}

/// Parameters of a model in a flat record, for report `inputs`.
pub fn coupling_record(spec: &ModelSpec) -> BTreeMap<String, f64> {
    let c = &spec.couplings;
    BTreeMap::from([
        ("J".to_string(), c.j),
        ("delta_z".to_string(), c.delta_z),
        ("h".to_string(), c.h),
        ("h_S".to_string(), c.h_s),
        ("g".to_string(), c.g),
        ("h_z".to_string(), c.h_z),
        ("disorder_amplitude".to_string(), spec.disorder.amplitude),
        ("sys_sites".to_string(), spec.sys_sites as f64),
        ("bath_sites".to_string(), spec.bath_sites as f64),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: ModelFamily, ns: usize, nb: usize, j: f64, h: f64, h_s: f64, g: f64) -> ModelSpec {
        ModelSpec {
            model_family: family,
            sys_sites: ns,
            bath_sites: nb,
            couplings: Couplings {
                j,
                delta_z: 0.7,
                h,
                h_s,
                g,
                h_z: 0.0,
            },
            disorder: Disorder::default(),
            units: default_units(),
            custom: None,
        }
    }

    #[test]
    fn decoupled_single_spins() {
        let h = build_hamiltonian(&spec(ModelFamily::TransverseIsing, 1, 1, 0.0, 0.0, 1.0, 0.0)).unwrap();
        let expect = [1.0, 1.0, -1.0, -1.0];
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expect[i] } else { 0.0 };
                assert_eq!(h.h[(i, j)], c64::new(e, 0.0));
            }
        }
        assert!((h.norm_hc - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_y_convention() {
        let mut m = Mat::<c64>::zeros(2, 2);
        PauliTerm::new(1.0, &[(0, Pauli::Y)]).accumulate(&mut m, 1);
        assert_eq!(m[(1, 0)], c64::new(0.0, 1.0));
        assert_eq!(m[(0, 1)], c64::new(0.0, -1.0));
    }

    #[test]
    fn xxz_decoupled_commutes() {
        let h = build_hamiltonian(&spec(ModelFamily::Xxz, 1, 3, 1.0, 0.3, 0.5, 0.0)).unwrap();
        let hb = h.h_b_embedded();
        let a = hilbert::matmul_seq(h.h_c.as_ref(), hb.as_ref());
        let b = hilbert::matmul_seq(hb.as_ref(), h.h_c.as_ref());
        let diff = Mat::from_fn(16, 16, |i, j| a[(i, j)] - b[(i, j)]);
        assert!(hilbert::max_abs(diff.as_ref()) < 1e-13);
    }

    #[test]
    fn split_checks_pass_and_detect_corruption() {
        let mut h = build_hamiltonian(&ModelSpec::default_benchmark(1, 4)).unwrap();
        let report = verify_split(&h).unwrap();
        assert!(report.all_hold(), "{report:?}");
        h.h[(3, 5)] += c64::new(1e-3, 0.0);
        let report = verify_split(&h).unwrap();
        let split = report.check("split_identity").unwrap();
        assert!(!split.holds);
        assert!((split.lhs - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn norm_hc_independent_of_bath_size() {
        let norms: Vec<f64> = (2..=6)
            .map(|nb| build_hamiltonian(&ModelSpec::default_benchmark(1, nb)).unwrap().norm_hc)
            .collect();
        for n in &norms {
            assert!((n - norms[0]).abs() <= 1e-10 * norms[0]);
        }
    }

    #[test]
    fn zero_disorder_is_clean_model() {
        let mut a = ModelSpec::default_benchmark(1, 3);
        a.disorder.amplitude = 0.0;
        let mut b = a.clone();
        b.disorder.seed = 99;
        let ha = build_hamiltonian(&a).unwrap();
        let hb = build_hamiltonian(&b).unwrap();
        assert_eq!(ha.h, hb.h);
    }

    #[test]
    fn size_cap_and_spec_errors() {
        let big = ModelSpec::default_benchmark(2, 12);
        assert!(matches!(build_hamiltonian(&big), Err(Error::Resource(_))));
        let bad = r#"{"model_family":"heisenberg","sys_sites":1,"bath_sites":2,"couplings":{}}"#;
        assert!(matches!(ModelSpec::from_json(bad), Err(Error::Spec(_))));
    }

    #[test]
    fn hash_is_stable_under_field_order() {
        let a = ModelSpec::default_benchmark(1, 5);
        let text = a.to_json_pretty();
        let b = ModelSpec::from_json(&text).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 16);
        let mut c = a.clone();
        c.couplings.g = 0.41;
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
