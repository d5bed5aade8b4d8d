//! The `eth-lab` command line.
//!
//! Each subcommand writes its artifacts plus a `manifest.json` into `--out`.
//! Exit status: 0 on success, 2 for bad input or unmet preconditions, 3 for
//! numerical failures. Files written by a failing run are removed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, AuditConfig, BoundsReport, EthReport, OmegaVariant, SamplerConfig};
use crate::error::{Error, Result};
use crate::hilbert::{self, GlobalState, PureState, Space};
use crate::models::{self, ModelSpec, SplitHamiltonian};
use crate::plot;
use crate::report::SCHEMA_VERSION;
use crate::shells::{self, ShellTag};
use crate::spectral::{self, BathSpectrum, SpectralData};
use crate::thermo::{self, fmt, ThermoConfig, ThermoProfile};

#[derive(Parser, Debug)]
#[command(name = "eth-lab", version, about = "Eigenstate thermalization laboratory for system+bath spin models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Assemble the Hamiltonian and verify its system/bath split.
    Build(BuildArgs),
    /// Diagonalize and write a content-addressed spectral cache.
    Diag(DiagArgs),
    /// Exhaustive ETH precision scan over a spectral region.
    Eth(EthArgs),
    /// Thermalization precision of one bath shell.
    Therm(ThermArgs),
    /// Eigenstate bounds on one cell or on an (E, Δ_B) grid.
    Bounds(BoundsArgs),
    /// Micro-canonical thermodynamics of the bath spectrum.
    Thermo(ThermoArgs),
    /// End-to-end audit of the predicted against the measured ETH precision.
    Audit(AuditArgs),
    /// Reduced-state dynamics of a product initial state.
    Evolve(EvolveArgs),
    /// SVG figures from report files.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Args, Debug, Serialize)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Artifact formats to write; JSON is always written.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json,csv")]
    pub formats: Vec<Format>,
}

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    /// Model specification (JSON). Without it the default benchmark is used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub sys_sites: usize,
    #[arg(long, default_value_t = 9)]
    pub bath_sites: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CacheArgs {
    /// Cache directory written by `diag` (the `<hash>` subdirectory).
    #[arg(long)]
    pub cache: PathBuf,
    /// Model specification the cache must match.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ThermoKnobs {
    /// Gaussian kernel width; defaults to a quarter of the spectral spread.
    #[arg(long)]
    pub kernel_width: Option<f64>,
    #[arg(long, default_value_t = thermo::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long, default_value_t = thermo::DEFAULT_MIN_LEVELS)]
    pub min_levels: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = SamplerConfig::default().random_products)]
    pub products: usize,
    #[arg(long, default_value_t = SamplerConfig::default().random_entangled)]
    pub entangled: usize,
    #[arg(long, default_value_t = SamplerConfig::default().refine_starts)]
    pub starts: usize,
    #[arg(long, default_value_t = SamplerConfig::default().refine_steps)]
    pub steps: usize,
    #[arg(long, default_value_t = SamplerConfig::default().seed)]
    pub seed: u64,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            random_products: self.products,
            random_entangled: self.entangled,
            refine_starts: self.starts,
            refine_steps: self.steps,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaArg {
    Micro,
    Canonical,
}

impl From<OmegaArg> for OmegaVariant {
    fn from(o: OmegaArg) -> Self {
        match o {
            OmegaArg::Micro => OmegaVariant::MicrocanonicalReduced,
            OmegaArg::Canonical => OmegaVariant::CanonicalReduced,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct OmegaArgs {
    #[arg(long, value_enum, default_value = "micro")]
    pub omega: OmegaArg,
    /// Half-width of the global shell behind the micro-canonical ω.
    #[arg(long)]
    pub omega_width: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct DiagArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Cache root; the cache goes to `<out>/<model hash>`.
    #[arg(long, default_value = "cache")]
    pub out: PathBuf,
    /// Also store the reduced eigenstates.
    #[arg(long)]
    pub with_tau: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct EthArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Region bounds; the middle third of the spectrum by default.
    #[arg(long, allow_hyphen_values = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub emax: Option<f64>,
    /// One or more scales Δ.
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta: Vec<f64>,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ThermArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Bath shell center.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub e: f64,
    /// Bath shell half-width.
    #[arg(long)]
    pub delta_b: f64,
    #[command(flatten)]
    pub omega: OmegaArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub thermo: ThermoKnobs,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Single cell center; omit together with `--delta-b` to scan a grid.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub e: Option<f64>,
    #[arg(long)]
    pub delta_b: Option<f64>,
    /// Grid shape `<energies>x<widths>` over the bath's valid range.
    #[arg(long, default_value = "10x10")]
    pub grid: String,
    #[arg(long)]
    pub db_min: Option<f64>,
    #[arg(long)]
    pub db_max: Option<f64>,
    #[command(flatten)]
    pub omega: OmegaArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub thermo: ThermoKnobs,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ThermoArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub thermo: ThermoKnobs,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct AuditArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Audit region; the bath's valid range by default.
    #[arg(long, allow_hyphen_values = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub emax: Option<f64>,
    #[arg(long, default_value = "10x10")]
    pub grid: String,
    #[arg(long)]
    pub db_min: Option<f64>,
    #[arg(long)]
    pub db_max: Option<f64>,
    #[command(flatten)]
    pub omega: OmegaArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub thermo: ThermoKnobs,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// System basis state; Haar random when omitted.
    #[arg(long)]
    pub system_basis: Option<usize>,
    /// Bath energy eigenstate; Haar random when omitted.
    #[arg(long)]
    pub bath_eigen: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Horizon of the exact finite-time average.
    #[arg(long, default_value_t = 1e5)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct PlotArgs {
    /// ETH reports (single objects or arrays).
    #[arg(long, value_delimiter = ',')]
    pub eth: Vec<PathBuf>,
    /// Bounds report written by `bounds`.
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    /// Profile JSON written by `thermo`.
    #[arg(long)]
    pub thermo: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Per-run record written next to the artifacts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

/// Tracks written files so that a failing run can clean up after itself.
struct Run {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    timings: BTreeMap<String, f64>,
    inputs: BTreeMap<String, String>,
    clock: Instant,
}

impl Run {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            timings: BTreeMap::new(),
            inputs: BTreeMap::new(),
            clock: Instant::now(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        analysis::write_json(&p, value)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings
            .insert(name.to_string(), now.duration_since(self.clock).as_secs_f64());
        self.clock = now;
    }

    fn finish(mut self, command: &str, config: &impl Serialize) -> Result<()> {
        let mut outputs: Vec<String> = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        outputs.sort();
        outputs.dedup();
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "eth-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            inputs: std::mem::take(&mut self.inputs),
            outputs,
            timings: std::mem::take(&mut self.timings),
        };
        let p = self.dir.join("manifest.json");
        analysis::write_json(&p, &manifest)
    }

    fn abort(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_file(self.dir.join("manifest.json"));
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn load_spec(model: &ModelArgs) -> Result<ModelSpec> {
    match &model.spec {
        Some(p) => ModelSpec::from_json(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
        None => Ok(ModelSpec::default_benchmark(model.sys_sites, model.bath_sites)),
    }
}

/// Everything a post-diagonalization command needs.
struct Loaded {
    spec: ModelSpec,
    h: SplitHamiltonian,
    sd: SpectralData,
}

fn load_cache(args: &CacheArgs, run: &mut Run) -> Result<Loaded> {
    let expected = match &args.spec {
        Some(p) => Some(ModelSpec::from_json(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?),
        None => None,
    };
    let hash = expected.as_ref().map(|s| s.content_hash());
    let sd = spectral::read_cache(&args.cache, hash.as_deref())?;
    let spec = match expected {
        Some(s) => s,
        None => spectral::read_cached_model(&args.cache)?.ok_or_else(|| {
            Error::Precondition(format!(
                "cache {} has no model.json; pass --spec",
                args.cache.display()
            ))
        })?,
    };
    if spec.content_hash() != sd.model_hash() {
        return Err(Error::StaleCache {
            path: args.cache.clone(),
            expected: spec.content_hash(),
            found: sd.model_hash().to_string(),
        });
    }
    let h = models::build_hamiltonian(&spec)?;
    run.inputs.insert("model_hash".into(), sd.model_hash().to_string());
    run.stage("load");
    Ok(Loaded { spec, h, sd })
}

fn bath_profile(loaded: &Loaded, knobs: &ThermoKnobs) -> Result<(BathSpectrum, ThermoProfile)> {
    let bath = spectral::diagonalize_bath(&loaded.h)?;
    let w = knobs
        .kernel_width
        .unwrap_or_else(|| thermo::default_kernel_width(&bath.energies));
    let mut cfg = ThermoConfig::new(w, knobs.grid_points);
    cfg.min_levels = knobs.min_levels;
    let profile = thermo::thermo_profile_with(&bath.energies, &cfg)?;
    Ok((bath, profile))
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Precondition(format!("grid must look like 10x10 (got {s})")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Precondition(format!("bad grid size {t:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn wants(out: &OutArgs, f: Format) -> bool {
    out.formats.contains(&f)
}

fn valid_range(profile: &ThermoProfile) -> Result<(f64, f64)> {
    profile.valid_range.ok_or_else(|| {
        Error::InsufficientData("the bath profile has no valid range; widen the kernel or enlarge the bath".into())
    })
}

// ---------------------------------------------------------------------------

fn cmd_build(a: &BuildArgs, run: &mut Run) -> Result<()> {
    let spec = load_spec(&a.model)?;
    let h = models::build_hamiltonian(&spec)?;
    run.stage("build");
    let report = models::verify_split(&h)?;
    run.stage("verify");
    run.inputs.insert("model_hash".into(), spec.content_hash());
    run.text("model.json", &spec.to_json_pretty())?;
    #[derive(Serialize)]
    struct BuildReport<'a> {
        schema_version: u32,
        model_hash: String,
        d_s: usize,
        d_b: usize,
        norm_hc: f64,
        split: &'a models::SplitReport,
        couplings: BTreeMap<String, f64>,
    }
    let out = BuildReport {
        schema_version: SCHEMA_VERSION,
        model_hash: spec.content_hash(),
        d_s: h.shape.d_s(),
        d_b: h.shape.d_b(),
        norm_hc: h.norm_hc,
        split: &report,
        couplings: models::coupling_record(&spec),
    };
    run.json("split_report.json", &out)?;
    println!("model {}  d_S={} d_B={}  ‖H_C‖={:.6}", out.model_hash, out.d_s, out.d_b, h.norm_hc);
    for c in &report.checks {
        println!("  {:<20} lhs={:.3e} rhs={:.3e} {}", c.name, c.lhs, c.rhs, if c.holds { "ok" } else { "FAIL" });
    }
    if !report.all_hold() {
        return Err(Error::Numeric("Hamiltonian split checks failed".into()));
    }
    Ok(())
}

fn cmd_diag(a: &DiagArgs) -> Result<()> {
    let spec = load_spec(&a.model)?;
    let h = models::build_hamiltonian(&spec)?;
    let hash = spec.content_hash();
    let dir = spectral::cache_dir(&a.out, &hash);
    let existed = dir.join("meta.json").exists();
    let t0 = Instant::now();
    let sd = spectral::diagonalize(&h)?;
    let t_diag = t0.elapsed().as_secs_f64();
    if a.with_tau {
        sd.tau_table();
    }
    let result = spectral::write_cache(&dir, &sd, Some(&spec)).and_then(|_| {
        let diag = sd.diagnostics(h.h.as_ref());
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "eth-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: "diag".into(),
            config: serde_json::to_value(a)?,
            inputs: BTreeMap::from([("model_hash".to_string(), hash.clone())]),
            outputs: {
                let mut v = vec!["eigvecs.c128", "energies.f64", "meta.json", "model.json"];
                if a.with_tau {
                    v.push("tau.c128");
                }
                v.sort();
                v.into_iter().map(String::from).collect()
            },
            timings: BTreeMap::from([
                ("diagonalize".to_string(), t_diag),
                ("total".to_string(), t0.elapsed().as_secs_f64()),
            ]),
        };
        analysis::write_json(&dir.join("manifest.json"), &manifest)?;
        println!("cache {}", dir.display());
        println!(
            "  d={}  E ∈ [{:.6}, {:.6}]  residual {:.2e}  orthonormality {:.2e}",
            sd.dim(),
            sd.energies()[0],
            sd.energies()[sd.dim() - 1],
            diag.max_residual,
            diag.max_orthonormality_error
        );
        Ok(())
    });
    if result.is_err() && !existed {
        let _ = fs::remove_dir_all(&dir);
    }
    result
}

fn cmd_eth(a: &EthArgs, run: &mut Run) -> Result<()> {
    let loaded = load_cache(&a.cache, run)?;
    let sd = &loaded.sd;
    let mid = analysis::mid_spectrum_region(sd.energies());
    let region = (a.emin.unwrap_or(mid.0), a.emax.unwrap_or(mid.1));
    let reports: Vec<EthReport> = a
        .delta
        .iter()
        .map(|&d| analysis::eth_scan(sd, region, d))
        .collect::<Result<_>>()?;
    run.stage("eth_scan");
    run.json("eth_report.json", &reports[0])?;
    if reports.len() > 1 {
        run.json("eth_curve.json", &reports)?;
    }
    if wants(&a.output, Format::Csv) {
        let p = run.path("eth_curve.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["delta", "eps_measured", "pair_count", "worst_n", "worst_m"])?;
        for r in &reports {
            let (n, m) = r.worst_pair.map_or((String::new(), String::new()), |(n, m)| (n.to_string(), m.to_string()));
            w.write_record([fmt(r.delta), fmt(r.eps_measured), r.pair_count.to_string(), n, m])?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
    }
    if wants(&a.output, Format::Svg) {
        run.text("eth_curve.svg", &plot::eth_curve(&reports))?;
    }
    for r in &reports {
        println!(
            "Δ={}  region [{:.4}, {:.4}]  states={}  pairs={}  ε_eth={:.6}  worst={:?}",
            r.delta, r.region.0, r.region.1, r.states, r.pair_count, r.eps_measured, r.worst_pair
        );
    }
    Ok(())
}

fn omega_for(
    loaded: &Loaded,
    profile: &ThermoProfile,
    e: f64,
    args: &OmegaArgs,
) -> Result<hilbert::DensityMatrix> {
    let hw = args.omega_width.unwrap_or(if profile.kernel_width.is_finite() {
        profile.kernel_width
    } else {
        loaded.h.norm_hc
    });
    analysis::omega_builder(&loaded.sd, &loaded.h, profile, e, args.omega.into(), hw)
}

fn cmd_therm(a: &ThermArgs, run: &mut Run) -> Result<()> {
    let loaded = load_cache(&a.cache, run)?;
    let (bath, profile) = bath_profile(&loaded, &a.thermo)?;
    let shell = shells::make_shell(&bath.energies, a.e, a.delta_b, ShellTag::Bath)?;
    shell.require_nonempty()?;
    let omega = omega_for(&loaded, &profile, a.e, &a.omega)?;
    run.stage("prepare");
    let report = analysis::therm_scan(&loaded.sd, &bath, &shell, &omega, &a.sampler.config())?;
    run.stage("therm_scan");
    let lemma1 = analysis::lemma1_check(&report, loaded.sd.shape().d_s());
    run.json("therm_report.json", &report)?;
    run.json("lemma1.json", &lemma1)?;
    if wants(&a.output, Format::Csv) {
        let p = run.path("therm_trace.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["step", "stage", "best"])?;
        for (i, t) in report.trace.iter().enumerate() {
            w.write_record([i.to_string(), t.stage.clone(), fmt(t.best)])?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
    }
    println!(
        "shell E={} Δ_B={} ({} levels)  ε_product ≥ {:.6}  ε_entangled ≥ {:.6}  (lower bounds)",
        a.e,
        a.delta_b,
        shell.len(),
        report.eps_product,
        report.eps_entangled
    );
    println!(
        "lemma1: {:.6} ≤ {:.6}  {:?}",
        lemma1.lhs, lemma1.rhs, lemma1.verdict
    );
    Ok(())
}

fn cmd_bounds(a: &BoundsArgs, run: &mut Run) -> Result<()> {
    let loaded = load_cache(&a.cache, run)?;
    let (bath, profile) = bath_profile(&loaded, &a.thermo)?;
    let cells = match (a.e, a.delta_b) {
        (Some(e), Some(db)) => vec![(e, db)],
        (None, None) => {
            let (ge, gd) = parse_grid(&a.grid)?;
            let region = valid_range(&profile)?;
            let def = analysis::default_db_range(loaded.h.norm_hc);
            let range = (a.db_min.unwrap_or(def.0), a.db_max.unwrap_or(def.1));
            analysis::grid_cells(region, ge, range, gd)
        }
        _ => return Err(Error::Precondition("pass both --E and --delta-b, or neither".into())),
    };
    let config = AuditConfig {
        sampler: a.sampler.config(),
        omega: a.omega.omega.into(),
        omega_half_width: a.omega.omega_width,
        ..AuditConfig::default()
    };
    run.stage("prepare");
    let report = analysis::bounds_scan(&loaded.sd, &loaded.h, &bath, &profile, &cells, &config)?;
    run.stage("bounds");
    run.json("bounds.json", &report)?;
    if wants(&a.output, Format::Csv) {
        let p = run.path("bounds.csv");
        analysis::write_bounds_csv(&p, &report.rows())?;
        let p = run.path("cells.csv");
        analysis::write_cells_csv(&p, &report.cells)?;
    }
    if wants(&a.output, Format::Svg) {
        run.text("bounds_scatter.svg", &plot::bounds_scatter(&report))?;
    }
    summarize_bounds(&report);
    Ok(())
}

fn summarize_bounds(report: &BoundsReport) {
    let count = |f: &dyn Fn(&analysis::CellBound) -> bool| report.records.iter().filter(|r| f(r)).count();
    println!(
        "{} cells, {} eigenstate records; violations: eq7 {}, eq8 {}, leakage {}; conclusive {}",
        report.cells.len(),
        report.records.len(),
        count(&|r| !r.bound.eq7.holds),
        count(&|r| !r.bound.eq8.holds),
        count(&|r| !r.bound.leakage_bound.holds),
        report.conclusive_violations()
    );
}

fn cmd_thermo(a: &ThermoArgs, run: &mut Run) -> Result<()> {
    let loaded = load_cache(&a.cache, run)?;
    let (_, profile) = bath_profile(&loaded, &a.thermo)?;
    run.stage("profile");
    run.json("thermo.json", &profile)?;
    if wants(&a.output, Format::Csv) {
        let p = run.path("thermo.csv");
        profile.write_csv(&p)?;
    }
    if wants(&a.output, Format::Svg) {
        run.text("thermo.svg", &plot::thermo_profile(&profile))?;
    }
    match profile.valid_range {
        Some((lo, hi)) => println!(
            "kernel width {:.4}  valid range [{lo:.4}, {hi:.4}]  ({} levels)",
            profile.kernel_width, profile.levels
        ),
        None => println!("kernel width {:.4}  no valid range", profile.kernel_width),
    }
    Ok(())
}

fn cmd_audit(a: &AuditArgs, run: &mut Run) -> Result<()> {
    let loaded = load_cache(&a.cache, run)?;
    let (bath, profile) = bath_profile(&loaded, &a.thermo)?;
    let valid = valid_range(&profile)?;
    let region = (a.emin.unwrap_or(valid.0), a.emax.unwrap_or(valid.1));
    let (ge, gd) = parse_grid(&a.grid)?;
    let def = analysis::default_db_range(loaded.h.norm_hc);
    let config = AuditConfig {
        grid_e: ge,
        grid_db: gd,
        db_range: Some((a.db_min.unwrap_or(def.0), a.db_max.unwrap_or(def.1))),
        sampler: a.sampler.config(),
        omega: a.omega.omega.into(),
        omega_half_width: a.omega.omega_width,
        ..AuditConfig::default()
    };
    run.stage("prepare");
    let report = analysis::theorem1_audit(&loaded.sd, &loaded.h, &bath, &profile, region, &config)?;
    run.stage("audit");
    run.json("audit.json", &report)?;
    run.json("verdict.json", &report.verdict)?;
    if wants(&a.output, Format::Csv) {
        let p = run.path("audit_cells.csv");
        analysis::write_cells_csv(&p, &report.cells)?;
        let p = run.path("audit_bounds.csv");
        analysis::write_bounds_csv(&p, &report.rows)?;
    }
    if wants(&a.output, Format::Svg) {
        let bounds = BoundsReport {
            schema_version: SCHEMA_VERSION,
            model_hash: report.model_hash.clone(),
            cells: report.cells.clone(),
            records: report
                .rows
                .iter()
                .map(|(cell, b)| analysis::CellBound {
                    cell: *cell,
                    bound: b.clone(),
                })
                .collect(),
        };
        run.text("bounds_scatter.svg", &plot::bounds_scatter(&bounds))?;
    }
    let v = &report.verdict;
    println!("model {}  region [{:.4}, {:.4}]", loaded.spec.content_hash(), region.0, region.1);
    println!(
        "predicted ε_eth = {:.6}{}  Δ = {:.6}",
        v.eth_pred,
        if v.vacuous { " (vacuous, ≥ 2)" } else { "" },
        report.constants.delta
    );
    println!("measured  ε_eth = {:.6}  ({} pairs)", v.eth_measured, report.eth.pair_count);
    println!(
        "bath ideal on the pairing cells: {}  grid cells ideal: {}/{}",
        v.bath_ideal, v.grid_ideal_cells, v.grid_cells
    );
    println!(
        "conclusive violations: {}  inconclusive cells: {}  triangle violations: {}",
        v.conclusive_violations, v.inconclusive_cells, report.pairs.triangle_violations
    );
    Ok(())
}

fn cmd_evolve(a: &EvolveArgs, run: &mut Run) -> Result<()> {
    let loaded = load_cache(&a.cache, run)?;
    let sd = &loaded.sd;
    let shape = sd.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let system = match a.system_basis {
        Some(i) => PureState::basis(Space::System(shape.d_s()), i)?,
        None => PureState::normalized(Space::System(shape.d_s()), analysis::haar_vector(&mut rng, shape.d_s()))?,
    };
    let bath_state = match a.bath_eigen {
        Some(k) => {
            let bath = spectral::diagonalize_bath(&loaded.h)?;
            if k >= shape.d_b() {
                return Err(Error::IndexOutOfRange { index: k, len: shape.d_b() });
            }
            let col: Vec<_> = (0..shape.d_b()).map(|i| bath.eigenvectors[(i, k)]).collect();
            PureState::normalized(Space::Bath(shape.d_b()), col)?
        }
        None => PureState::normalized(Space::Bath(shape.d_b()), analysis::haar_vector(&mut rng, shape.d_b()))?,
    };
    let psi = PureState::product(&system, &bath_state)?;
    let state = GlobalState::Pure(psi.clone());
    let eq = spectral::equilibrium_state_pure(&psi, sd)?;
    if a.points < 2 || !(a.tmax > 0.0) {
        return Err(Error::Precondition("need --points ≥ 2 and --tmax > 0".into()));
    }
    let times: Vec<f64> = (0..a.points)
        .map(|k| a.tmax * k as f64 / (a.points - 1) as f64)
        .collect();
    let traj = spectral::evolve_reduced(&state, sd, &times)?;
    let avg = spectral::finite_time_average(&state, sd, a.horizon)?;
    run.stage("evolve");
    let dist_avg = hilbert::trace_distance(avg.matrix(), eq.matrix())?;
    #[derive(Serialize)]
    struct EvolveReport {
        schema_version: u32,
        model_hash: String,
        equilibrium: models::DenseMatrix,
        horizon: f64,
        finite_time_average: models::DenseMatrix,
        average_distance: f64,
    }
    run.json(
        "evolve.json",
        &EvolveReport {
            schema_version: SCHEMA_VERSION,
            model_hash: sd.model_hash().to_string(),
            equilibrium: models::DenseMatrix::from_mat(eq.matrix()),
            horizon: a.horizon,
            finite_time_average: models::DenseMatrix::from_mat(avg.matrix()),
            average_distance: dist_avg,
        },
    )?;
    if wants(&a.output, Format::Csv) {
        let p = run.path("evolve.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["t", "distance_to_equilibrium", "rho00", "rho11", "re_rho01", "im_rho01"])?;
        for (t, rho) in times.iter().zip(&traj) {
            let m = rho.matrix();
            let d = hilbert::trace_distance(m, eq.matrix())?;
            let off = if m.nrows() > 1 { m[(0, 1)] } else { faer::c64::new(0.0, 0.0) };
            let r11 = if m.nrows() > 1 { m[(1, 1)].re } else { f64::NAN };
            w.write_record([fmt(*t), fmt(d), fmt(m[(0, 0)].re), fmt(r11), fmt(off.re), fmt(off.im)])?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
    }
    println!(
        "‖avg_T Tr_B ρ(t) − Φ_S(ρ)‖₁ = {dist_avg:.3e} at T = {}",
        a.horizon
    );
    Ok(())
}

fn read_eth_reports(path: &Path) -> Result<Vec<EthReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    };
    parsed.map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

fn cmd_plot(a: &PlotArgs, run: &mut Run) -> Result<()> {
    if a.eth.is_empty() && a.bounds.is_none() && a.thermo.is_none() {
        return Err(Error::Precondition("nothing to plot; pass --eth, --bounds or --thermo".into()));
    }
    if !a.eth.is_empty() {
        let mut reports = Vec::new();
        for p in &a.eth {
            reports.extend(read_eth_reports(p)?);
        }
        run.text("eth_curve.svg", &plot::eth_curve(&reports))?;
        println!("eth_curve.svg: {} points", reports.len());
    }
    if let Some(p) = &a.bounds {
        let report: BoundsReport = analysis::read_json(p)?;
        run.text("bounds_scatter.svg", &plot::bounds_scatter(&report))?;
        println!("bounds_scatter.svg: {} points", report.records.len());
    }
    if let Some(p) = &a.thermo {
        let profile: ThermoProfile = analysis::read_json(p)?;
        run.text("thermo.svg", &plot::thermo_profile(&profile))?;
        println!("thermo.svg");
    }
    Ok(())
}

fn out_dir(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Build(a) => Some(&a.output.out),
        Command::Diag(_) => None,
        Command::Eth(a) => Some(&a.output.out),
        Command::Therm(a) => Some(&a.output.out),
        Command::Bounds(a) => Some(&a.output.out),
        Command::Thermo(a) => Some(&a.output.out),
        Command::Audit(a) => Some(&a.output.out),
        Command::Evolve(a) => Some(&a.output.out),
        Command::Plot(a) => Some(&a.out),
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Build(_) => "build",
        Command::Diag(_) => "diag",
        Command::Eth(_) => "eth",
        Command::Therm(_) => "therm",
        Command::Bounds(_) => "bounds",
        Command::Thermo(_) => "thermo",
        Command::Audit(_) => "audit",
        Command::Evolve(_) => "evolve",
        Command::Plot(_) => "plot",
    }
}

/// Runs one parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    let Some(dir) = out_dir(&cli.command) else {
        let Command::Diag(a) = &cli.command else { unreachable!() };
        return cmd_diag(a);
    };
    let mut run = Run::new(dir)?;
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a, &mut run),
        Command::Eth(a) => cmd_eth(a, &mut run),
        Command::Therm(a) => cmd_therm(a, &mut run),
        Command::Bounds(a) => cmd_bounds(a, &mut run),
        Command::Thermo(a) => cmd_thermo(a, &mut run),
        Command::Audit(a) => cmd_audit(a, &mut run),
        Command::Evolve(a) => cmd_evolve(a, &mut run),
        Command::Plot(a) => cmd_plot(a, &mut run),
        Command::Diag(_) => unreachable!(),
    };
    match result {
        Ok(()) => {
            run.stage("write");
            run.finish(name(&cli.command), &cli.command)
        }
        Err(e) => {
            run.abort();
            Err(e)
        }
    }
}

/// Exit status for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

/// Caps the worker pool from `ETHLAB_THREADS`.
pub fn configure_threads() {
    if let Some(n) = std::env::var("ETHLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grid_shapes() {
        assert_eq!(parse_grid("10x10").unwrap(), (10, 10));
        assert_eq!(parse_grid("3X4").unwrap(), (3, 4));
        assert!(parse_grid("10by10").is_err());
        assert!(parse_grid("x3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(exit_code(&Error::DegenerateProfile("x".into())), 3);
        assert_eq!(exit_code(&Error::Precondition("x".into())), 2);
        assert_eq!(exit_code(&Error::InsufficientData("x".into())), 2);
    }

    #[test]
    fn command_line_is_consistent() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["eth-lab", "eth", "--cache", "c", "--emin", "-2", "--delta", "0.1,0.2"]).unwrap();
        let Command::Eth(a) = cli.command else { panic!() };
        assert_eq!(a.emin, Some(-2.0));
        assert_eq!(a.delta, vec![0.1, 0.2]);
        assert_eq!(a.output.formats, vec![Format::Json, Format::Csv]);
    }
}
