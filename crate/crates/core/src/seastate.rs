//! Long-crested irregular seas built by superposing regular component waves
//! drawn from the ITTC (modified Pierson-Moskowitz) spectrum.
//!
//! Conventions: headings are in degrees in the ship-fixed frame, 180° is head
//! seas, 90° port beam seas and 0° following seas. A component travelling at
//! heading χ past a ship moving at speed U is seen at the encounter frequency
//! `ω_e = ω − k·U·cos χ`. Dispersion is deep water, `k = ω²/g`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::gradcore::{Array, Rng};
use crate::textio::NumericTable;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// H_s in metres.
    pub significant_wave_height: f64,
    /// T_p in seconds.
    pub peak_period: f64,
    pub n_components: usize,
    /// Discretization band in rad/s.
    pub omega_min: f64,
    pub omega_max: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    9.81
}

impl SpectrumParams {
    /// Band `(0.25·ω_p, 4·ω_p)` around the peak frequency.
    pub fn with_default_band(significant_wave_height: f64, peak_period: f64, n_components: usize) -> Self {
        let wp = 2.0 * PI / peak_period;
        Self {
            significant_wave_height,
            peak_period,
            n_components,
            omega_min: 0.25 * wp,
            omega_max: 4.0 * wp,
            gravity: default_gravity(),
        }
    }

    /// Model-scale sea state 7: H_s = 0.284 m, T_p = 2.15 s, 240 components.
    pub fn sea_state_7() -> Self {
        Self::with_default_band(0.284, 2.15, 240)
    }

    pub fn peak_frequency(&self) -> f64 {
        2.0 * PI / self.peak_period
    }

    /// Zeroth moment implied by the significant wave height, `(H_s/4)²`.
    pub fn nominal_m0(&self) -> f64 {
        (self.significant_wave_height / 4.0).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.significant_wave_height > 0.0
            && self.peak_period > 0.0
            && self.n_components >= 1
            && self.omega_min > 0.0
            && self.omega_min < self.omega_max
            && self.gravity > 0.0
            && self.omega_max.is_finite();
        if !ok {
            return Err(Error::config(format!("invalid spectrum parameters: {self:?}")));
        }
        Ok(())
    }
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self::sea_state_7()
    }
}

/// `S(ω) = A/ω⁵ · exp(−B/ω⁴)` with `A = 173·H_s²/T₁⁴`, `B = 691/T₁⁴` and
/// `T₁ = T_p/1.296`.
pub fn spectral_density(omega: f64, params: &SpectrumParams) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::domain(format!("spectral density needs omega > 0, got {omega}")));
    }
    let t1 = params.peak_period / 1.296;
    let t1_4 = t1.powi(4);
    let a = 173.0 * params.significant_wave_height.powi(2) / t1_4;
    let b = 691.0 / t1_4;
    let w4 = omega.powi(4);
    Ok(a / (w4 * omega) * (-b / w4).exp())
}

/// Trapezoid integral of `S` over the discretization band with `n` panels.
pub fn band_energy(params: &SpectrumParams, n: usize) -> Result<f64> {
    let h = (params.omega_max - params.omega_min) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let w = params.omega_min + i as f64 * h;
        let s = spectral_density(w, params)?;
        sum += if i == 0 || i == n { 0.5 * s } else { s };
    }
    Ok(sum * h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentWaveSet {
    pub omegas: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub wavenumbers: Vec<f64>,
    pub source_params: SpectrumParams,
    pub seed: u64,
}

impl ComponentWaveSet {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// `Σ aᵢ²/2`, the variance carried by the components.
    pub fn energy(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a / 2.0).sum()
    }
}

/// Equal-interval mid-point discretization with `aᵢ = sqrt(2·S(ωᵢ)·Δω)` and
/// phases uniform on `[0, 2π)` from the seeded generator.
pub fn discretize_spectrum(params: &SpectrumParams, seed: u64) -> Result<ComponentWaveSet> {
    params.validate()?;
    let n = params.n_components;
    let dw = (params.omega_max - params.omega_min) / n as f64;
    let mut rng = Rng::seed_from_u64(seed);
    let mut set = ComponentWaveSet {
        omegas: Vec::with_capacity(n),
        amplitudes: Vec::with_capacity(n),
        phases: Vec::with_capacity(n),
        wavenumbers: Vec::with_capacity(n),
        source_params: params.clone(),
        seed,
    };
    for i in 0..n {
        let w = params.omega_min + (i as f64 + 0.5) * dw;
        set.omegas.push(w);
        set.amplitudes.push((2.0 * spectral_density(w, params)? * dw).sqrt());
        set.phases.push(2.0 * PI * rng.uniform());
        set.wavenumbers.push(w * w / params.gravity);
    }
    Ok(set)
}

/// Wave probe position in the ship-fixed horizontal plane, metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub x: f64,
    pub y: f64,
}

impl Probe {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Three points around the bow of a 7.28 m model.
    pub fn bow_defaults() -> Vec<Probe> {
        vec![Probe::new(3.4, 0.3), Probe::new(3.6, 0.0), Probe::new(3.4, -0.3)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeaKinematics {
    /// Wave heading in degrees, `[0, 360)`.
    pub heading_angle: f64,
    /// Forward speed in m/s.
    pub ship_speed: f64,
}

impl SeaKinematics {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.heading_angle) || !(self.ship_speed >= 0.0) || !self.ship_speed.is_finite() {
            return Err(Error::config(format!(
                "heading must be in [0, 360) and speed non-negative, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn heading_rad(&self) -> f64 {
        self.heading_angle.to_radians()
    }
}

/// Per-component quantities that depend on the heading and speed but not on
/// time or position.
#[derive(Clone, Debug)]
pub struct EncounterField<'a> {
    waves: &'a ComponentWaveSet,
    kx: Vec<f64>,
    ky: Vec<f64>,
    omega_e: Vec<f64>,
    pub cos_heading: f64,
    pub sin_heading: f64,
}

impl<'a> EncounterField<'a> {
    pub fn new(waves: &'a ComponentWaveSet, kin: &SeaKinematics) -> Self {
        let chi = kin.heading_rad();
        let (sin_heading, cos_heading) = chi.sin_cos();
        let kx = waves.wavenumbers.iter().map(|k| k * cos_heading).collect();
        let ky = waves.wavenumbers.iter().map(|k| k * sin_heading).collect();
        let omega_e = waves
            .omegas
            .iter()
            .zip(&waves.wavenumbers)
            .map(|(w, k)| w - k * kin.ship_speed * cos_heading)
            .collect();
        Self {
            waves,
            kx,
            ky,
            omega_e,
            cos_heading,
            sin_heading,
        }
    }

    pub fn encounter_frequencies(&self) -> &[f64] {
        &self.omega_e
    }

    /// `Σ wᵢ·aᵢ·cos(kᵢ(x cos χ + y sin χ) − ω_e,ᵢ t + εᵢ)` for per-component weights.
    pub fn weighted_sum(&self, weights: Option<&[f64]>, x: f64, y: f64, t: f64) -> f64 {
        let w = self.waves;
        let mut sum = 0.0;
        for i in 0..w.len() {
            let arg = self.kx[i] * x + self.ky[i] * y - self.omega_e[i] * t + w.phases[i];
            let scale = weights.map_or(1.0, |ws| ws[i]);
            sum += scale * w.amplitudes[i] * arg.cos();
        }
        sum
    }

    pub fn elevation(&self, probe: Probe, t: f64) -> f64 {
        self.weighted_sum(None, probe.x, probe.y, t)
    }
}

/// Surface elevation at a probe at time `t`.
pub fn probe_elevation(waves: &ComponentWaveSet, probe: Probe, kin: &SeaKinematics, t: f64) -> f64 {
    EncounterField::new(waves, kin).elevation(probe, t)
}

/// Number of samples `floor(duration/dt) + 1`, tolerant of representation
/// error in the ratio.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize + 1
}

/// Uniformly sampled elevations, `[n_steps × n_probes]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElevationTable {
    pub dt: f64,
    pub values: Array,
}

impl ElevationTable {
    pub fn n_steps(&self) -> usize {
        self.values.dim(0)
    }

    pub fn column(&self, probe: usize) -> Vec<f64> {
        (0..self.n_steps()).map(|k| self.values.row(k)[probe]).collect()
    }

    /// CSV with header `t,probe1,probe2,…`.
    pub fn to_csv(&self) -> String {
        let n_probes = self.values.dim(1);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n_probes).map(|i| format!("probe{i}")));
        let rows = (0..self.n_steps())
            .map(|k| {
                let mut row = vec![k as f64 * self.dt];
                row.extend_from_slice(self.values.row(k));
                row
            })
            .collect();
        NumericTable { header, rows }.to_csv()
    }
}

pub fn synthesize_probe_series(
    waves: &ComponentWaveSet,
    probes: &[Probe],
    kin: &SeaKinematics,
    duration: f64,
    dt: f64,
) -> Result<ElevationTable> {
    if probes.is_empty() {
        return Err(Error::domain("at least one probe is required"));
    }
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::domain(format!(
            "duration and dt must be positive, got {duration} and {dt}"
        )));
    }
    let field = EncounterField::new(waves, kin);
    let n = sample_count(duration, dt);
    let mut data = Vec::with_capacity(n * probes.len());
    for k in 0..n {
        let t = k as f64 * dt;
        data.extend(probes.iter().map(|&p| field.elevation(p, t)));
    }
    Ok(ElevationTable {
        dt,
        values: Array::from_vec(&[n, probes.len()], data)?,
    })
}
