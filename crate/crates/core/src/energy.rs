//! Battery voltage models: drain under wind, the recharge curve toward the
//! 4.15 V departure threshold, seeded turbulence noise, and least-squares
//! calibration of the drain parameters from annotated voltage traces.
//!
//! Voltage is the battery-state proxy throughout. The drain rate is
//! `r0 + w * (alpha + beta * cos(theta))` where `w` is wind speed in m/s and
//! `theta` is the relative wind angle (0 = headwind). With the default
//! `alpha == beta` a pure tailwind drains exactly like calm air, and any other
//! angle drains more.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{self, TICK_SECONDS};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("relative wind angle is undefined in calm air")]
    CalmAir,
    #[error("invalid duration {0}: must be finite and nonnegative")]
    InvalidDuration(f64),
    #[error("voltage {0} exceeds the recharge asymptote; state is inconsistent")]
    Unreachable(f64),
    #[error("not enough calibration data: {0}")]
    InsufficientData(String),
    #[error("calibration design is degenerate: all traces share one wind condition")]
    DegenerateDesign,
    #[error("invalid energy model: {0}")]
    InvalidModel(String),
}

/// Compass direction, used for wind sources and dataset keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompassDir {
    N,
    E,
    S,
    W,
}

impl CompassDir {
    pub fn degrees(self) -> f64 {
        match self {
            CompassDir::N => 0.0,
            CompassDir::E => 90.0,
            CompassDir::S => 180.0,
            CompassDir::W => 270.0,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            CompassDir::N => "N",
            CompassDir::E => "E",
            CompassDir::S => "S",
            CompassDir::W => "W",
        }
    }
}

impl std::str::FromStr for CompassDir {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" | "n" => Ok(CompassDir::N),
            "E" | "e" => Ok(CompassDir::E),
            "S" | "s" => Ok(CompassDir::S),
            "W" | "w" => Ok(CompassDir::W),
            other => Err(format!("unknown compass direction {other:?}")),
        }
    }
}

impl std::fmt::Display for CompassDir {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.letter())
    }
}

/// Ambient wind: speed in km/h and the compass direction it blows FROM.
/// When `speed_kmh` is 0 the direction is ignored by every consumer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindField {
    pub speed_kmh: f64,
    pub from_direction_deg: f64,
}

impl WindField {
    pub const CALM: WindField = WindField {
        speed_kmh: 0.0,
        from_direction_deg: 0.0,
    };

    pub fn new(speed_kmh: f64, from_direction_deg: f64) -> Self {
        Self {
            speed_kmh,
            from_direction_deg: from_direction_deg.rem_euclid(360.0),
        }
    }

    pub fn from_compass(speed_kmh: f64, dir: CompassDir) -> Self {
        Self::new(speed_kmh, dir.degrees())
    }

    pub fn is_calm(&self) -> bool {
        self.speed_kmh == 0.0
    }

    /// Wind speed in m/s.
    pub fn speed_ms(&self) -> f64 {
        self.speed_kmh / 3.6
    }
}

/// Parameters of the voltage drain and recharge models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    /// Calm-air drain rate r0, volts per second.
    pub base_drain: f64,
    /// Wind drag alpha, volts per second per m/s of wind.
    pub wind_drag: f64,
    /// Directional gain beta, volts per second per m/s; at most `wind_drag`.
    pub direction_gain: f64,
    /// Turbulence noise sigma, volts per sample per m/s of wind.
    pub noise_gain: f64,
    /// Recharge time constant tau, seconds.
    pub recharge_tau: f64,
    /// Recharge asymptote, volts; strictly above the departure threshold.
    pub recharge_asymptote: f64,
    /// Departure threshold, volts.
    pub v_full: f64,
    /// Low-voltage floor, volts; flight below this is a failure.
    pub v_low: f64,
    /// Cruise speed, m/s.
    pub cruise_speed: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            base_drain: 0.002,
            wind_drag: 0.0008,
            direction_gain: 0.0008,
            noise_gain: 0.001,
            recharge_tau: 300.0,
            recharge_asymptote: 4.25,
            v_full: 4.15,
            v_low: 3.2,
            cruise_speed: 0.2,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let err = |msg: String| Err(EnergyError::InvalidModel(msg));
        if !(self.base_drain > 0.0) {
            return err(format!("base_drain {} must be > 0", self.base_drain));
        }
        if !(self.wind_drag >= 0.0) {
            return err(format!("wind_drag {} must be >= 0", self.wind_drag));
        }
        if !(0.0..=self.wind_drag).contains(&self.direction_gain) {
            return err(format!(
                "direction_gain {} must lie in [0, wind_drag={}]",
                self.direction_gain, self.wind_drag
            ));
        }
        if !(self.noise_gain >= 0.0) {
            return err(format!("noise_gain {} must be >= 0", self.noise_gain));
        }
        if !(self.recharge_tau > 0.0) {
            return err(format!("recharge_tau {} must be > 0", self.recharge_tau));
        }
        if !(self.v_low < self.v_full && self.v_full < self.recharge_asymptote) {
            return err(format!(
                "voltage levels must satisfy v_low < v_full < recharge_asymptote, got {} / {} / {}",
                self.v_low, self.v_full, self.recharge_asymptote
            ));
        }
        if !(self.cruise_speed > 0.0) {
            return err(format!("cruise_speed {} must be > 0", self.cruise_speed));
        }
        let finite = [
            self.base_drain,
            self.wind_drag,
            self.direction_gain,
            self.noise_gain,
            self.recharge_tau,
            self.recharge_asymptote,
            self.v_full,
            self.v_low,
            self.cruise_speed,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return err("all parameters must be finite".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EnergyError> {
        let model: EnergyModel =
            serde_json::from_str(text).map_err(|e| EnergyError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// A voltage series sampled every 0.1 s starting at t = 0. The spacing is
/// structural: sample `k` is at `k * 0.1` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    voltages: Vec<f64>,
}

impl VoltageTrace {
    pub fn new(voltages: Vec<f64>) -> Self {
        assert!(!voltages.is_empty(), "a trace has at least one sample");
        Self { voltages }
    }

    pub fn len(&self) -> usize {
        self.voltages.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn first(&self) -> f64 {
        self.voltages[0]
    }

    pub fn last(&self) -> f64 {
        *self.voltages.last().unwrap()
    }

    /// (time s, voltage) pairs.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.voltages
            .iter()
            .enumerate()
            .map(|(k, &v)| (grid::seconds(k as u64), v))
    }
}

/// Signed smallest angle between the drone heading and the direction the wind
/// blows from, degrees in `(-180, 180]`. 0 means pure headwind, ±180 pure
/// tailwind. Undefined in calm air.
pub fn relative_wind_angle(heading_deg: f64, wind: WindField) -> Result<f64, EnergyError> {
    if wind.is_calm() {
        return Err(EnergyError::CalmAir);
    }
    let mut delta = (wind.from_direction_deg - heading_deg).rem_euclid(360.0);
    if delta > 180.0 {
        delta -= 360.0;
    }
    Ok(delta)
}

/// Drain rate for a wind speed in m/s and the cosine of the relative angle.
pub fn drain_rate_cos(model: &EnergyModel, wind_speed_ms: f64, cos_theta: f64) -> f64 {
    model.base_drain + wind_speed_ms * (model.wind_drag + model.direction_gain * cos_theta)
}

/// Drain rate in volts/s for a drone on `heading_deg` in `wind`.
/// Calm air drains at the base rate.
pub fn drain_rate(model: &EnergyModel, wind: WindField, heading_deg: f64) -> f64 {
    if wind.is_calm() {
        return model.base_drain;
    }
    let theta = relative_wind_angle(heading_deg, wind).expect("non-calm wind");
    drain_rate_cos(model, wind.speed_ms(), theta.to_radians().cos())
}

/// Drain rate for a leg whose compass heading may be undefined (purely
/// vertical travel); such legs drain as pure crosswind.
pub fn drain_rate_leg(model: &EnergyModel, wind: WindField, heading_deg: Option<f64>) -> f64 {
    if wind.is_calm() {
        return model.base_drain;
    }
    match heading_deg {
        Some(h) => drain_rate(model, wind, h),
        None => drain_rate_cos(model, wind.speed_ms(), 0.0),
    }
}

/// Integrate the drain model over `duration_s` at 0.1 s steps:
/// `v[k+1] = v[k] - 0.1 * rate + noise`, with per-sample noise uniform in
/// `[-sigma*w, sigma*w)`. Calm air draws no noise, so the trace is exactly
/// linear. Deterministic for a fixed seed. The trace may cross the low
/// voltage floor; callers detect that.
pub fn simulate_drain(
    model: &EnergyModel,
    v0: f64,
    duration_s: f64,
    wind: WindField,
    heading_deg: f64,
    seed: u64,
) -> Result<VoltageTrace, EnergyError> {
    if !duration_s.is_finite() || duration_s < 0.0 {
        return Err(EnergyError::InvalidDuration(duration_s));
    }
    let steps = grid::ticks_ceil(duration_s);
    let rate = drain_rate(model, wind, heading_deg);
    let half_width = model.noise_gain * wind.speed_ms();
    let mut rng = rng::seeded(seed);
    let mut voltages = Vec::with_capacity(steps as usize + 1);
    let mut v = v0;
    voltages.push(v);
    for _ in 0..steps {
        v -= TICK_SECONDS * rate;
        if half_width > 0.0 {
            v += rng::symmetric(&mut rng, half_width);
        }
        voltages.push(v);
    }
    Ok(VoltageTrace::new(voltages))
}

/// Voltage on the recharge curve `ticks` samples after starting from `v0`.
pub fn recharge_voltage_after(model: &EnergyModel, v0: f64, ticks: u64) -> f64 {
    let v_inf = model.recharge_asymptote;
    v_inf - (v_inf - v0) * (-(grid::seconds(ticks)) / model.recharge_tau).exp()
}

/// Number of 0.1 s samples until the recharge curve from `v0` first reaches
/// the departure threshold. Zero when `v0` is already at or above it.
pub fn recharge_ticks(model: &EnergyModel, v0: f64) -> Result<u64, EnergyError> {
    if v0 > model.recharge_asymptote {
        return Err(EnergyError::Unreachable(v0));
    }
    if v0 >= model.v_full {
        return Ok(0);
    }
    let v_inf = model.recharge_asymptote;
    let t_star = model.recharge_tau * ((v_inf - v0) / (v_inf - model.v_full)).ln();
    let mut k = grid::ticks_ceil(t_star).max(1);
    // align exactly with the sampled curve around the analytic root
    while k > 1 && recharge_voltage_after(model, v0, k - 1) >= model.v_full {
        k -= 1;
    }
    while recharge_voltage_after(model, v0, k) < model.v_full {
        k += 1;
    }
    Ok(k)
}

/// Seconds until a drone recharging from `v0` may depart (first 0.1 s sample
/// at or above the threshold).
pub fn recharge_time(model: &EnergyModel, v0: f64) -> Result<f64, EnergyError> {
    Ok(grid::seconds(recharge_ticks(model, v0)?))
}

/// Recharge duration and the exact voltage at the departure sample.
pub fn recharge_end(model: &EnergyModel, v0: f64) -> Result<(u64, f64), EnergyError> {
    let ticks = recharge_ticks(model, v0)?;
    let v_end = if ticks == 0 {
        v0
    } else {
        recharge_voltage_after(model, v0, ticks)
    };
    Ok((ticks, v_end))
}

/// The recharge curve from `v0` sampled every 0.1 s, ending at the first
/// sample at or above the threshold. Strictly increasing.
pub fn recharge_trace(model: &EnergyModel, v0: f64) -> Result<VoltageTrace, EnergyError> {
    let ticks = recharge_ticks(model, v0)?;
    let voltages = (0..=ticks)
        .map(|k| if k == 0 { v0 } else { recharge_voltage_after(model, v0, k) })
        .collect();
    Ok(VoltageTrace::new(voltages))
}

/// A voltage trace with the wind condition it was recorded under. The
/// relative angle is `None` for calm air.
#[derive(Debug, Clone)]
pub struct AnnotatedTrace {
    pub trace: VoltageTrace,
    pub wind_speed_kmh: f64,
    pub rel_wind_angle_deg: Option<f64>,
}

impl AnnotatedTrace {
    fn wind_speed_ms(&self) -> f64 {
        self.wind_speed_kmh / 3.6
    }

    fn cos_theta(&self) -> f64 {
        self.rel_wind_angle_deg
            .map(|a| a.to_radians().cos())
            .unwrap_or(0.0)
    }

    /// Mean drain rate over the trace, volts/s.
    fn mean_rate(&self) -> f64 {
        let n = self.trace.len();
        (self.trace.first() - self.trace.last()) / ((n - 1) as f64 * TICK_SECONDS)
    }
}

/// Drain parameters recovered by [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedParameters {
    pub base_drain: f64,
    pub wind_drag: f64,
    pub direction_gain: f64,
    pub noise_gain: f64,
}

impl CalibratedParameters {
    /// Merge the fitted drain parameters into `base`, keeping its recharge
    /// and kinematic settings.
    pub fn apply_to(&self, base: &EnergyModel) -> EnergyModel {
        EnergyModel {
            base_drain: self.base_drain,
            wind_drag: self.wind_drag,
            direction_gain: self.direction_gain,
            noise_gain: self.noise_gain,
            ..*base
        }
    }
}

/// Solve the 3x3 normal equations by Gaussian elimination with partial
/// pivoting. Returns `None` when the system is singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut sum = b[col];
        for k in col + 1..3 {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Some(x)
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if det.abs() < 1e-12 * scale * scale.max(1.0) {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (b[1] * a[0][0] - b[0] * a[1][0]) / det,
    ])
}

/// Least-squares fit of the drain model to annotated traces.
///
/// Each trace contributes one observation: its mean drain rate against the
/// regressors `[1, w, w*cos(theta)]`. Requires at least 3 traces spanning at
/// least 2 distinct wind conditions, each with at least 10 samples. When the
/// directional term is not identifiable from the design, it is dropped
/// (`direction_gain = 0`) rather than fit arbitrarily; the returned
/// parameters always satisfy `0 <= direction_gain <= wind_drag`.
///
/// The noise gain is estimated from the standard deviation of per-sample
/// voltage steps within each windy trace, rescaled by `sqrt(3) / w` (the
/// inverse of the uniform-noise standard deviation `sigma * w / sqrt(3)`).
pub fn calibrate(traces: &[AnnotatedTrace]) -> Result<CalibratedParameters, EnergyError> {
    if traces.len() < 3 {
        return Err(EnergyError::InsufficientData(format!(
            "need at least 3 traces, got {}",
            traces.len()
        )));
    }
    if let Some(short) = traces.iter().position(|t| t.trace.len() < 10) {
        return Err(EnergyError::InsufficientData(format!(
            "trace {short} has fewer than 10 samples"
        )));
    }
    let mut conditions: Vec<(u64, u64)> = traces
        .iter()
        .map(|t| {
            let speed = t.wind_speed_kmh.to_bits();
            let angle = if t.wind_speed_kmh == 0.0 {
                0
            } else {
                t.rel_wind_angle_deg.unwrap_or(0.0).to_bits()
            };
            (speed, angle)
        })
        .collect();
    conditions.sort_unstable();
    conditions.dedup();
    if conditions.len() < 2 {
        return Err(EnergyError::DegenerateDesign);
    }

    // normal equations for rate_i = r0 + alpha * w_i + beta * w_i cos(theta_i)
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for t in traces {
        let row = [1.0, t.wind_speed_ms(), t.wind_speed_ms() * t.cos_theta()];
        let y = t.mean_rate();
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }

    let (r0, alpha, beta) = match solve3(ata, atb) {
        Some([r0, alpha, beta]) => (r0, alpha, beta),
        None => {
            // directional term unidentifiable; refit without it
            let a2 = [[ata[0][0], ata[0][1]], [ata[1][0], ata[1][1]]];
            let b2 = [atb[0], atb[1]];
            match solve2(a2, b2) {
                Some([r0, alpha]) => (r0, alpha, 0.0),
                // identical regressor rows; only the mean rate is identifiable
                None => {
                    let mean =
                        traces.iter().map(AnnotatedTrace::mean_rate).sum::<f64>() / traces.len() as f64;
                    (mean, 0.0, 0.0)
                }
            }
        }
    };

    let alpha = alpha.max(0.0);
    let beta = beta.clamp(0.0, alpha);

    let mut sigma_sum = 0.0;
    let mut sigma_n = 0usize;
    for t in traces {
        let w = t.wind_speed_ms();
        if w <= 0.0 {
            continue;
        }
        let steps: Vec<f64> = t.trace.voltages().windows(2).map(|p| p[1] - p[0]).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        let var = steps.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (steps.len().saturating_sub(1)).max(1) as f64;
        sigma_sum += var.sqrt() * 3.0f64.sqrt() / w;
        sigma_n += 1;
    }
    let sigma = if sigma_n == 0 { 0.0 } else { sigma_sum / sigma_n as f64 };

    Ok(CalibratedParameters {
        base_drain: r0,
        wind_drag: alpha,
        direction_gain: beta,
        noise_gain: sigma,
    })
}
