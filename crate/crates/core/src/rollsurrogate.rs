//! Single-degree-of-freedom nonlinear roll oscillator driven by the spectral
//! wave field, used to generate roll/wave datasets.
//!
//! ```text
//! φ̈ = m(t) − 2ζω₀·φ̇ − β·φ̇|φ̇| − ω₀²·(φ + γφ³),   ω₀ = 2π / T_φ
//! m(t) = g_e · ω₀² · sin χ · Σ kᵢ aᵢ cos(−ω_e,ᵢ t + εᵢ)
//! ```
//!
//! The excitation is the effective wave slope at the midship reference point
//! scaled by the restoring stiffness and projected onto the beam direction.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::seastate::{
    discretize_spectrum, sample_count, ComponentWaveSet, EncounterField, Probe, SeaKinematics,
    SpectrumParams,
};
use crate::textio::{read_json, write_json, write_string, NumericTable};
use crate::{Error, Result};

/// Excitation gain calibrated so the default beam-sea run peaks at 25° of
/// roll (seed [`DEFAULT_WAVE_SEED`], sea state 7, default probes and speed).
pub const CALIBRATED_EXCITATION_GAIN: f64 = 0.568_716_752_142_878_9;

pub const DEFAULT_WAVE_SEED: u64 = 7;

/// Table-1 design speed of the model, m/s.
pub const DEFAULT_SHIP_SPEED: f64 = 2.196;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollParams {
    /// T_φ in seconds.
    pub natural_period: f64,
    /// ζ.
    pub linear_damping_ratio: f64,
    /// β in 1/rad.
    pub quadratic_damping: f64,
    /// γ in 1/rad².
    pub cubic_restoring: f64,
    pub excitation_gain: f64,
}

impl Default for RollParams {
    fn default() -> Self {
        Self {
            natural_period: 1.7,
            linear_damping_ratio: 0.05,
            quadratic_damping: 0.4,
            cubic_restoring: 0.6,
            excitation_gain: CALIBRATED_EXCITATION_GAIN,
        }
    }
}

impl RollParams {
    pub fn natural_frequency(&self) -> f64 {
        2.0 * PI / self.natural_period
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.natural_period > 0.0
            && self.linear_damping_ratio >= 0.0
            && self.quadratic_damping >= 0.0
            && self.excitation_gain >= 0.0
            && self.cubic_restoring.is_finite();
        if !ok {
            return Err(Error::config(format!("invalid roll parameters: {self:?}")));
        }
        Ok(())
    }

    /// Mechanical energy proxy `φ̇²/2 + ω₀²(φ²/2 + γφ⁴/4)`.
    pub fn energy(&self, s: RollState) -> f64 {
        let w2 = self.natural_frequency().powi(2);
        s.phi_dot * s.phi_dot / 2.0
            + w2 * (s.phi * s.phi / 2.0 + self.cubic_restoring * s.phi.powi(4) / 4.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RollState {
    /// rad
    pub phi: f64,
    /// rad/s
    pub phi_dot: f64,
}

impl RollState {
    pub fn new(phi: f64, phi_dot: f64) -> Self {
        Self { phi, phi_dot }
    }

    fn axpy(self, h: f64, d: RollState) -> RollState {
        RollState::new(self.phi + h * d.phi, self.phi_dot + h * d.phi_dot)
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.phi_dot.is_finite()
    }
}

/// Normalized wave moment acting on the hull, rad/s².
#[derive(Clone, Debug)]
pub struct Excitation<'a> {
    field: EncounterField<'a>,
    slopes: Vec<f64>,
    scale: f64,
}

impl<'a> Excitation<'a> {
    pub fn new(waves: &'a ComponentWaveSet, kin: &SeaKinematics, params: &RollParams) -> Self {
        let field = EncounterField::new(waves, kin);
        let scale = params.excitation_gain * params.natural_frequency().powi(2) * field.sin_heading;
        Self {
            field,
            slopes: waves.wavenumbers.clone(),
            scale,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.field.weighted_sum(Some(&self.slopes), 0.0, 0.0, t)
    }
}

pub fn excitation_moment(waves: &ComponentWaveSet, kin: &SeaKinematics, params: &RollParams, t: f64) -> f64 {
    Excitation::new(waves, kin, params).at(t)
}

/// Time derivative of the roll state under moment `m`.
pub fn roll_rhs(state: RollState, m: f64, params: &RollParams) -> RollState {
    let w0 = params.natural_frequency();
    let RollState { phi, phi_dot } = state;
    let phi_ddot = m
        - 2.0 * params.linear_damping_ratio * w0 * phi_dot
        - params.quadratic_damping * phi_dot * phi_dot.abs()
        - w0 * w0 * (phi + params.cubic_restoring * phi * phi * phi);
    RollState::new(phi_dot, phi_ddot)
}

/// Classical fourth-order Runge-Kutta step, forcing sampled at `t`, `t+dt/2`
/// and `t+dt`.
pub fn step_rk4(
    state: RollState,
    t: f64,
    dt: f64,
    forcing: impl Fn(f64) -> f64,
    params: &RollParams,
) -> Result<RollState> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let m0 = forcing(t);
    let m_half = forcing(t + dt / 2.0);
    let m1 = forcing(t + dt);
    let k1 = roll_rhs(state, m0, params);
    let k2 = roll_rhs(state.axpy(dt / 2.0, k1), m_half, params);
    let k3 = roll_rhs(state.axpy(dt / 2.0, k2), m_half, params);
    let k4 = roll_rhs(state.axpy(dt, k3), m1, params);
    let next = RollState::new(
        state.phi + dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
        state.phi_dot + dt / 6.0 * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot),
    );
    if !next.is_finite() {
        return Err(Error::Blowup { t: t + dt });
    }
    Ok(next)
}

/// Integrates from `state` for `n_steps` steps of `dt`, calling `observe`
/// with the step index and state after every step (and once for the initial
/// state with index 0).
pub fn integrate(
    mut state: RollState,
    dt: f64,
    n_steps: usize,
    forcing: impl Fn(f64) -> f64,
    params: &RollParams,
    mut observe: impl FnMut(usize, RollState),
) -> Result<RollState> {
    observe(0, state);
    for k in 0..n_steps {
        state = step_rk4(state, k as f64 * dt, dt, &forcing, params)?;
        observe(k + 1, state);
    }
    Ok(state)
}

/// Everything needed to regenerate a simulated record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    pub spectrum: SpectrumParams,
    pub roll: RollParams,
    pub kinematics: SeaKinematics,
    pub probes: Vec<Probe>,
    pub duration: f64,
    pub sim_dt: f64,
    pub output_dt: f64,
    pub seed: u64,
}

impl SimulationSetup {
    /// Sea state 7, default roll parameters and probes, 80 s at 0.005 s
    /// recorded every 0.1 s.
    pub fn standard(heading_angle: f64) -> Self {
        Self {
            spectrum: SpectrumParams::sea_state_7(),
            roll: RollParams::default(),
            kinematics: SeaKinematics {
                heading_angle,
                ship_speed: DEFAULT_SHIP_SPEED,
            },
            probes: Probe::bow_defaults(),
            duration: 80.0,
            sim_dt: 0.005,
            output_dt: 0.1,
            seed: DEFAULT_WAVE_SEED,
        }
    }
}

/// Sidecar metadata written next to a record CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub label: String,
    pub dt: f64,
    pub heading: f64,
    pub seed: u64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSetup>,
}

pub const RECORD_HEADER: [&str; 5] = ["t", "roll_deg", "wave1", "wave2", "wave3"];

/// Uniformly sampled roll angle (degrees) and three probe elevations (metres).
#[derive(Clone, Debug, PartialEq)]
pub struct MotionRecord {
    pub t: Vec<f64>,
    pub roll: Vec<f64>,
    pub wave: Vec<[f64; 3]>,
    pub dt: f64,
    pub heading: f64,
    pub seed: u64,
    pub label: String,
    pub simulation: Option<SimulationSetup>,
}

impl MotionRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if self.roll.len() != n || self.wave.len() != n {
            return Err(Error::data(format!(
                "record `{}`: column lengths differ ({n}, {}, {})",
                self.label,
                self.roll.len(),
                self.wave.len()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::data(format!("record `{}`: dt must be positive", self.label)));
        }
        for (k, w) in self.t.windows(2).enumerate() {
            if ((w[1] - w[0]) - self.dt).abs() > 1e-6 * self.dt.max(1.0) {
                return Err(Error::data(format!(
                    "record `{}`: samples {k} and {} are {} s apart, expected uniform {} s",
                    self.label,
                    k + 1,
                    w[1] - w[0],
                    self.dt
                )));
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> RecordMeta {
        RecordMeta {
            label: self.label.clone(),
            dt: self.dt,
            heading: self.heading,
            seed: self.seed,
            n_samples: self.len(),
            simulation: self.simulation.clone(),
        }
    }

    /// `t,roll_deg,wave1,wave2,wave3` at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let rows = (0..self.len())
            .map(|k| {
                let [a, b, c] = self.wave[k];
                vec![self.t[k], self.roll[k], a, b, c]
            })
            .collect();
        NumericTable {
            header: RECORD_HEADER.iter().map(|s| s.to_string()).collect(),
            rows,
        }
        .to_csv()
    }

    /// Writes `<path>` (CSV) and the sidecar `<path>` with a `.json` extension.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        write_string(csv_path, &self.to_csv())?;
        write_json(&sidecar_path(csv_path), &self.meta())
    }

    /// Reads a record CSV. The sidecar is optional: without it `dt` is taken
    /// from the time column and the label from the file stem.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let table = NumericTable::parse(&text, Some(&RECORD_HEADER), &csv_path.display().to_string())?;
        let sidecar = sidecar_path(csv_path);
        let meta: Option<RecordMeta> = if sidecar.exists() {
            Some(read_json(&sidecar)?)
        } else {
            None
        };
        Self::from_table(table, meta, csv_path)
    }

    fn from_table(table: NumericTable, meta: Option<RecordMeta>, origin: &Path) -> Result<Self> {
        if table.rows.len() < 2 {
            return Err(Error::data(format!("{}: need at least two samples", origin.display())));
        }
        let t = table.column(0);
        let wave = table.rows.iter().map(|r| [r[2], r[3], r[4]]).collect();
        let stem = origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (label, dt, heading, seed, simulation) = match meta {
            Some(m) => {
                if m.n_samples != table.rows.len() {
                    return Err(Error::data(format!(
                        "{}: sidecar lists {} samples, CSV has {}",
                        origin.display(),
                        m.n_samples,
                        table.rows.len()
                    )));
                }
                (m.label, m.dt, m.heading, m.seed, m.simulation)
            }
            None => (stem, t[1] - t[0], f64::NAN, 0, None),
        };
        let record = Self {
            roll: table.column(1),
            t,
            wave,
            dt,
            heading,
            seed,
            label,
            simulation,
        };
        record.validate()?;
        Ok(record)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Integrates the roll oscillator at `sim_dt` and records roll (degrees) and
/// the probe elevations every `output_dt`, starting from rest.
pub fn simulate_run(setup: &SimulationSetup, label: &str) -> Result<MotionRecord> {
    setup.spectrum.validate()?;
    setup.roll.validate()?;
    setup.kinematics.validate()?;
    if setup.probes.len() != 3 {
        return Err(Error::config(format!(
            "records carry exactly three wave probes, {} configured",
            setup.probes.len()
        )));
    }
    if !(setup.duration > 0.0) || !(setup.sim_dt > 0.0) || !(setup.output_dt > 0.0) {
        return Err(Error::config("duration, sim_dt and output_dt must be positive"));
    }
    let ratio = setup.output_dt / setup.sim_dt;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
        return Err(Error::config(format!(
            "output_dt {} is not an integer multiple of sim_dt {}",
            setup.output_dt, setup.sim_dt
        )));
    }
    let stride = stride as usize;
    let waves = discretize_spectrum(&setup.spectrum, setup.seed)?;
    let excitation = Excitation::new(&waves, &setup.kinematics, &setup.roll);
    let field = EncounterField::new(&waves, &setup.kinematics);

    let n = sample_count(setup.duration, setup.output_dt);
    let mut roll = Vec::with_capacity(n);
    integrate(
        RollState::default(),
        setup.sim_dt,
        (n - 1) * stride,
        |t| excitation.at(t),
        &setup.roll,
        |k, s| {
            if k % stride == 0 {
                roll.push(s.phi.to_degrees());
            }
        },
    )?;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * setup.output_dt).collect();
    let wave = t
        .iter()
        .map(|&tk| {
            let p = &setup.probes;
            [
                field.elevation(p[0], tk),
                field.elevation(p[1], tk),
                field.elevation(p[2], tk),
            ]
        })
        .collect();
    Ok(MotionRecord {
        t,
        roll,
        wave,
        dt: setup.output_dt,
        heading: setup.kinematics.heading_angle,
        seed: setup.seed,
        label: label.to_string(),
        simulation: Some(setup.clone()),
    })
}

pub fn max_abs_roll(record: &MotionRecord) -> f64 {
    record.roll.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Finds the excitation gain at which `setup` produces a peak roll of
/// `target_deg`, by bisection on the gain.
pub fn calibrate_excitation_gain(setup: &SimulationSetup, target_deg: f64) -> Result<f64> {
    let peak = |gain: f64| -> Result<f64> {
        let mut s = setup.clone();
        s.roll.excitation_gain = gain;
        Ok(max_abs_roll(&simulate_run(&s, "calibration")?))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while peak(hi)? < target_deg {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::domain("excitation gain search did not bracket the target"));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if peak(mid)? < target_deg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
