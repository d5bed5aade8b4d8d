//! Micro-canonical thermodynamics of a bath spectrum: smoothed density of
//! states, entropy, `β(E) = dS/dE` and heat capacity `C = -β² / (dβ/dE)`.
//!
//! Natural units throughout (`k = 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 512;
/// Minimum number of levels inside a kernel window for a grid point to count
/// as statistically meaningful.
pub const DEFAULT_MIN_LEVELS: f64 = 20.0;
/// Half-width of the counting window, in kernel widths (a window one kernel
/// width wide).
pub const DEFAULT_FLOOR_WINDOW: f64 = 0.5;

/// Default Gaussian kernel width: a quarter of the spectral standard deviation.
pub fn default_kernel_width(spectrum: &[f64]) -> f64 {
    let n = spectrum.len().max(1) as f64;
    let mean = spectrum.iter().sum::<f64>() / n;
    let var = spectrum.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    0.25 * var.sqrt()
}

/// `1.5 × mean level spacing × sqrt(bath_sites)`. Much narrower than
/// [`default_kernel_width`] for baths beyond a few sites, and noisy in `β'`.
pub fn spacing_kernel_width(spectrum: &[f64], bath_sites: usize) -> f64 {
    let (lo, hi) = min_max(spectrum);
    let spacing = (hi - lo) / (spectrum.len().max(2) - 1) as f64;
    1.5 * spacing * (bath_sites.max(1) as f64).sqrt()
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// Knobs of [`thermo_profile_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoConfig {
    pub kernel_width: f64,
    pub grid_points: usize,
    pub min_levels: f64,
    pub floor_window: f64,
}

impl ThermoConfig {
    pub fn new(kernel_width: f64, grid_points: usize) -> Self {
        Self {
            kernel_width,
            grid_points,
            min_levels: DEFAULT_MIN_LEVELS,
            floor_window: DEFAULT_FLOOR_WINDOW,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoProfile {
    pub energy_grid: Vec<f64>,
    #[serde(deserialize_with = "crate::report::nan_vec")]
    pub dos: Vec<f64>,
    #[serde(deserialize_with = "crate::report::nan_vec")]
    pub entropy: Vec<f64>,
    #[serde(deserialize_with = "crate::report::nan_vec")]
    pub beta: Vec<f64>,
    #[serde(deserialize_with = "crate::report::nan_vec")]
    pub dbeta: Vec<f64>,
    #[serde(deserialize_with = "crate::report::nan_vec")]
    pub heat_capacity: Vec<f64>,
    /// Levels within `floor_window` kernel widths of each grid point.
    pub level_counts: Vec<f64>,
    pub in_valid_range: Vec<bool>,
    pub valid_range: Option<(f64, f64)>,
    pub kernel_width: f64,
    pub reference_width: f64,
    pub levels: usize,
}

/// Profile on a uniform grid spanning the spectrum.
pub fn thermo_profile(spectrum: &[f64], kernel_width: f64, grid_points: usize) -> Result<ThermoProfile> {
    thermo_profile_with(spectrum, &ThermoConfig::new(kernel_width, grid_points))
}

pub fn thermo_profile_with(spectrum: &[f64], config: &ThermoConfig) -> Result<ThermoProfile> {
    if config.grid_points < 5 {
        return Err(Error::Precondition("need at least 5 grid points".into()));
    }
    let (lo, hi) = min_max(spectrum);
    if !(hi > lo) {
        return Err(Error::DegenerateProfile(format!(
            "all {} levels coincide",
            spectrum.len()
        )));
    }
    let n = config.grid_points;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    thermo_profile_on_grid_with(spectrum, config, &grid)
}

/// Profile evaluated on an arbitrary ascending grid.
pub fn thermo_profile_on_grid(spectrum: &[f64], kernel_width: f64, grid: &[f64]) -> Result<ThermoProfile> {
    thermo_profile_on_grid_with(spectrum, &ThermoConfig::new(kernel_width, grid.len()), grid)
}

pub fn thermo_profile_on_grid_with(spectrum: &[f64], config: &ThermoConfig, grid: &[f64]) -> Result<ThermoProfile> {
    let w = config.kernel_width;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::Precondition(format!("kernel width must be positive (got {w})")));
    }
    if grid.len() < 5 || grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Precondition("grid must be strictly ascending with at least 5 points".into()));
    }
    if spectrum.iter().any(|e| !e.is_finite()) {
        return Err(Error::Precondition("spectrum has non-finite values".into()));
    }
    let groups = group_levels(spectrum);
    if groups.len() < 2 {
        return Err(Error::DegenerateProfile(format!(
            "all {} levels coincide",
            spectrum.len()
        )));
    }

    let norm = 1.0 / (w * (2.0 * std::f64::consts::PI).sqrt());
    let reach = 12.0 * w;
    let floor_reach = config.floor_window * w;
    let mut dos = Vec::with_capacity(grid.len());
    let mut counts = Vec::with_capacity(grid.len());
    for &e in grid {
        let a = groups.partition_point(|g| g.0 < e - reach);
        let mut acc = 0.0;
        let mut count = 0.0;
        for &(v, m) in &groups[a..] {
            if v > e + reach {
                break;
            }
            let x = (e - v) / w;
            acc += m * (-0.5 * x * x).exp();
            if (e - v).abs() <= floor_reach {
                count += m;
            }
        }
        dos.push(acc * norm);
        counts.push(count);
    }

    let reference_width = w;
    let entropy: Vec<f64> = dos.iter().map(|&nu| (2.0 * reference_width * nu).ln()).collect();
    let beta = centered_derivative(grid, &entropy);
    let dbeta = centered_derivative(grid, &beta);
    let heat_capacity: Vec<f64> = beta
        .iter()
        .zip(&dbeta)
        .map(|(&b, &db)| -b * b / db)
        .collect();

    let ok: Vec<bool> = (0..grid.len())
        .map(|i| {
            dbeta[i].is_finite()
                && dbeta[i] < 0.0
                && heat_capacity[i].is_finite()
                && heat_capacity[i] > 0.0
                && counts[i] >= config.min_levels
        })
        .collect();
    let run = longest_run(&ok);
    let mut in_valid_range = vec![false; grid.len()];
    let valid_range = run.map(|(a, b)| {
        for flag in &mut in_valid_range[a..b] {
            *flag = true;
        }
        (grid[a], grid[b - 1])
    });

    Ok(ThermoProfile {
        energy_grid: grid.to_vec(),
        dos,
        entropy,
        beta,
        dbeta,
        heat_capacity,
        level_counts: counts,
        in_valid_range,
        valid_range,
        kernel_width: w,
        reference_width,
        levels: spectrum.len(),
    })
}

/// Sorted `(value, multiplicity)` pairs; values closer than `1e-12` (relative)
/// are merged.
fn group_levels(spectrum: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = spectrum.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scale = sorted
        .iter()
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match groups.last_mut() {
            Some((g, m)) if v - *g <= tol => *m += 1.0,
            _ => groups.push((v, 1.0)),
        }
    }
    groups
}

/// Second-order centered differences on a possibly nonuniform grid; the end
/// points are NaN.
fn centered_derivative(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![f64::NAN; n];
    for i in 1..n - 1 {
        let h1 = x[i] - x[i - 1];
        let h2 = x[i + 1] - x[i];
        out[i] = (h1 * h1 * f[i + 1] - h2 * h2 * f[i - 1] + (h2 * h2 - h1 * h1) * f[i])
            / (h1 * h2 * (h1 + h2));
    }
    out
}

fn longest_run(flags: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=flags.len() {
        let on = i < flags.len() && flags[i];
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| i - s > b - a) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

impl ThermoProfile {
    /// A flat profile with constant `β` and `C` over `[lo, hi]`, used for
    /// formula-level checks.
    pub fn constant(beta: f64, heat_capacity: f64, lo: f64, hi: f64, points: usize) -> Self {
        let points = points.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let n = grid.len();
        Self {
            energy_grid: grid,
            dos: vec![f64::NAN; n],
            entropy: vec![f64::NAN; n],
            beta: vec![beta; n],
            dbeta: vec![-beta * beta / heat_capacity; n],
            heat_capacity: vec![heat_capacity; n],
            level_counts: vec![f64::INFINITY; n],
            in_valid_range: vec![true; n],
            valid_range: Some((lo, hi)),
            kernel_width: f64::NAN,
            reference_width: f64::NAN,
            levels: 0,
        }
    }

    pub fn in_valid(&self, e: f64) -> bool {
        self.valid_range
            .is_some_and(|(a, b)| e >= a - 1e-12 * a.abs().max(1.0) && e <= b + 1e-12 * b.abs().max(1.0))
    }

    fn require_valid(&self, e: f64) -> Result<()> {
        if !self.in_valid(e) {
            let Some((lo, hi)) = self.valid_range else {
                return Err(Error::InsufficientData(format!(
                    "the profile has no valid range (kernel width {:.4}, {} levels)",
                    self.kernel_width, self.levels
                )));
            };
            return Err(Error::OutOfRange { energy: e, lo, hi });
        }
        Ok(())
    }

    fn interpolate(&self, values: &[f64], e: f64) -> f64 {
        let g = &self.energy_grid;
        let i = g.partition_point(|&x| x < e);
        if i == 0 {
            return values[0];
        }
        if i >= g.len() {
            return values[g.len() - 1];
        }
        let t = (e - g[i - 1]) / (g[i] - g[i - 1]);
        values[i - 1] * (1.0 - t) + values[i] * t
    }

    /// `β(E)` by linear interpolation on the grid.
    pub fn beta_at(&self, e: f64) -> Result<f64> {
        self.require_valid(e)?;
        Ok(self.interpolate(&self.beta, e))
    }

    /// `C(β(E))` by linear interpolation on the grid.
    pub fn heat_capacity_at(&self, e: f64) -> Result<f64> {
        self.require_valid(e)?;
        Ok(self.interpolate(&self.heat_capacity, e))
    }

    /// Grid indices inside both `[lo, hi]` and the valid range.
    pub fn grid_indices_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.energy_grid.len())
            .filter(|&i| {
                let e = self.energy_grid[i];
                self.in_valid_range[i] && e >= lo && e <= hi
            })
            .collect()
    }

    /// Writes the CSV table `E, dos, S, beta, C, in_valid_range`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["E", "dos", "S", "beta", "C", "in_valid_range"])?;
        for i in 0..self.energy_grid.len() {
            w.write_record([
                fmt(self.energy_grid[i]),
                fmt(self.dos[i]),
                fmt(self.entropy[i]),
                fmt(self.beta[i]),
                fmt(self.heat_capacity[i]),
                self.in_valid_range[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Shortest round-trip representation; `NaN` and infinities spelled out.
pub(crate) fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

/// Smallest `ε` satisfying `β² Δ_B ‖H_C‖ ≤ ε C`.
pub fn precision_condition(profile: &ThermoProfile, e: f64, delta_b: f64, norm_hc: f64) -> Result<f64> {
    let beta = profile.beta_at(e)?;
    let c = profile.heat_capacity_at(e)?;
    Ok(epsilon_min(beta, c, delta_b, norm_hc))
}

pub fn epsilon_min(beta: f64, heat_capacity: f64, delta_b: f64, norm_hc: f64) -> f64 {
    beta * beta * delta_b * norm_hc / heat_capacity
}

/// `(4‖H_C‖ C / (d_S β²))^{1/3}`.
pub fn optimal_bath_width(beta: f64, heat_capacity: f64, d_s: usize, norm_hc: f64) -> f64 {
    (4.0 * norm_hc * heat_capacity / (d_s as f64 * beta * beta)).cbrt()
}

/// `2‖H_C‖/Δ_B² + d_S β² Δ_B / C`, the width-dependent factor of the
/// eigenstate bound at the equality level of the precision condition.
pub fn width_objective(delta_b: f64, beta: f64, heat_capacity: f64, d_s: usize, norm_hc: f64) -> f64 {
    2.0 * norm_hc / (delta_b * delta_b) + d_s as f64 * beta * beta * delta_b / heat_capacity
}

/// `12 (2‖H_C‖² d_S β²/C)^{2/3}` at one energy.
pub fn eth_precision_at(beta: f64, heat_capacity: f64, d_s: usize, norm_hc: f64) -> f64 {
    12.0 * (2.0 * norm_hc * norm_hc * d_s as f64 * beta * beta / heat_capacity).powf(2.0 / 3.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Constants {
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub eps_eth: f64,
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub delta: f64,
    /// Grid energy where the supremum is attained.
    pub sup_energy: f64,
    pub region: (f64, f64),
    pub d_s: usize,
    pub norm_hc: f64,
    /// `(E, Δ_B_opt(E))` on the grid points of the region.
    pub deltab_opt: Vec<(f64, f64)>,
}

impl Theorem1Constants {
    /// `Δ = 2√3 ‖H_C‖ / √ε_eth`.
    pub fn scale_for(eps_eth: f64, norm_hc: f64) -> f64 {
        2.0 * 3.0_f64.sqrt() * norm_hc / eps_eth.sqrt()
    }
}

pub fn theorem1_constants(
    profile: &ThermoProfile,
    region: (f64, f64),
    d_s: usize,
    norm_hc: f64,
) -> Result<Theorem1Constants> {
    let (lo, hi) = region;
    if !(lo <= hi) {
        return Err(Error::Precondition(format!("empty region [{lo}, {hi}]")));
    }
    profile.require_valid(lo)?;
    profile.require_valid(hi)?;
    let idx = profile.grid_indices_in(lo, hi);
    if idx.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no profile grid points inside [{lo}, {hi}]"
        )));
    }
    let mut eps_eth = f64::NEG_INFINITY;
    let mut sup_energy = f64::NAN;
    let mut deltab_opt = Vec::with_capacity(idx.len());
    for &i in &idx {
        let (b, c) = (profile.beta[i], profile.heat_capacity[i]);
        let eps = eth_precision_at(b, c, d_s, norm_hc);
        if eps > eps_eth {
            eps_eth = eps;
            sup_energy = profile.energy_grid[i];
        }
        deltab_opt.push((profile.energy_grid[i], optimal_bath_width(b, c, d_s, norm_hc)));
    }
    Ok(Theorem1Constants {
        eps_eth,
        delta: Theorem1Constants::scale_for(eps_eth, norm_hc),
        sup_energy,
        region,
        d_s,
        norm_hc,
        deltab_opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_condition_arithmetic() {
        assert!((epsilon_min(1.0, 10.0, 0.5, 1.0) - 0.05).abs() < 1e-15);
        let p = ThermoProfile::constant(1.0, 10.0, -1.0, 1.0, 11);
        assert!((precision_condition(&p, 0.0, 0.5, 1.0).unwrap() - 0.05).abs() < 1e-15);
        assert!((precision_condition(&p, 0.0, 0.5, 2.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(precision_condition(&p, 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(precision_condition(&p, 3.0, 0.5, 1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn degenerate_spectrum_is_rejected() {
        assert!(matches!(
            thermo_profile(&[1.0; 200], 0.1, 64),
            Err(Error::DegenerateProfile(_))
        ));
    }

    #[test]
    fn centered_difference_is_exact_for_quadratics() {
        let x = [0.0, 0.3, 1.0, 1.2, 2.0];
        let f: Vec<f64> = x.iter().map(|v| 3.0 * v * v - v).collect();
        let d = centered_derivative(&x, &f);
        for i in 1..4 {
            assert!((d[i] - (6.0 * x[i] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn longest_run_picks_longest() {
        assert_eq!(longest_run(&[true, false, true, true, false]), Some((2, 4)));
        assert_eq!(longest_run(&[false, false]), None);
    }
}
