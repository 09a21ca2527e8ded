//! Battery energy bookkeeping and endurance/range estimation.
//!
//! Energy in watt-hours is `V * mAh / 1000`. Energy used is the difference
//! between a full pack and the pack as recovered, where the recovered
//! capacity comes from a linear voltage/capacity model between
//! `empty_voltage_v` (zero capacity) and `full_voltage_v` (rated capacity).
//! Flight time is energy used over total electrical power and range is
//! flight time times average speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Zero-capacity voltage of the linear model for a 4-cell pack. Calibrated so
/// that 16.2 V on a 16.8 V / 6500 mAh pack maps to 5300 mAh.
pub const DEFAULT_EMPTY_VOLTAGE_4S: f64 = 13.55;
pub const LIPO_CELL_FULL_V: f64 = 4.2;

pub const IDEAL_CONDITIONS_NOTE: &str = "Estimate assumes ideal conditions; wind, temperature, \
     noise and component wear raise consumption, so actual flight time and range are likely lower.";
pub const PWM_REFINEMENT_NOTE: &str = "Not computed: per-motor power from logged PWM outputs \
     combined with thrust-bench data would refine the power model.";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {reason}")]
pub struct PowerError {
    pub stage: &'static str,
    pub reason: String,
}

fn fail<T>(stage: &'static str, reason: impl Into<String>) -> Result<T, PowerError> {
    Err(PowerError {
        stage,
        reason: reason.into(),
    })
}

fn positive(stage: &'static str, name: &str, v: f64) -> Result<(), PowerError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        fail(stage, format!("{name} must be > 0, got {v}"))
    }
}

fn non_negative(stage: &'static str, name: &str, v: f64) -> Result<(), PowerError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        fail(stage, format!("{name} must be >= 0, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub cell_count: u32,
    pub capacity_mah: f64,
    pub full_voltage_v: f64,
    pub empty_voltage_v: f64,
}

impl BatterySpec {
    /// LiPo pack charged to 4.2 V per cell with the calibrated empty voltage
    /// scaled per cell.
    pub fn lipo(cell_count: u32, capacity_mah: f64) -> Self {
        BatterySpec {
            cell_count,
            capacity_mah,
            full_voltage_v: LIPO_CELL_FULL_V * cell_count as f64,
            empty_voltage_v: DEFAULT_EMPTY_VOLTAGE_4S / 4.0 * cell_count as f64,
        }
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        const S: &str = "battery spec";
        if self.cell_count < 1 {
            return fail(S, "cell_count must be >= 1");
        }
        positive(S, "capacity_mah", self.capacity_mah)?;
        positive(S, "full_voltage_v", self.full_voltage_v)?;
        non_negative(S, "empty_voltage_v", self.empty_voltage_v)?;
        if self.empty_voltage_v >= self.full_voltage_v {
            return fail(S, "empty_voltage_v must be below full_voltage_v");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryObservation {
    pub observed_voltage_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub per_motor_cruise_w: f64,
    pub motor_count: u32,
    pub avionics_w: f64,
    pub cruise_speed_mps: f64,
}

impl PowerModel {
    pub fn total_power_w(&self) -> f64 {
        self.per_motor_cruise_w * self.motor_count as f64 + self.avionics_w
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        const S: &str = "power model";
        positive(S, "per_motor_cruise_w", self.per_motor_cruise_w)?;
        if self.motor_count < 1 {
            return fail(S, "motor_count must be >= 1");
        }
        non_negative(S, "avionics_w", self.avionics_w)?;
        positive(S, "cruise_speed_mps", self.cruise_speed_mps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub e_total_wh: f64,
    pub e_remaining_wh: f64,
    pub e_used_wh: f64,
    pub t_flight_s: f64,
    pub r_max_m: f64,
    pub v_avg_mps: f64,
    pub total_power_w: f64,
    pub remaining_capacity_mah: f64,
    pub assumptions: Vec<String>,
}

/// Stored energy in watt-hours.
pub fn total_energy(voltage_v: f64, capacity_mah: f64) -> Result<f64, PowerError> {
    positive("total energy", "voltage", voltage_v)?;
    positive("total energy", "capacity", capacity_mah)?;
    Ok(voltage_v * capacity_mah / 1000.0)
}

fn check_observation(spec: &BatterySpec, obs: &BatteryObservation) -> Result<(), PowerError> {
    spec.validate()?;
    const S: &str = "battery observation";
    positive(S, "observed_voltage_v", obs.observed_voltage_v)?;
    if obs.observed_voltage_v > spec.full_voltage_v {
        return fail(
            S,
            format!(
                "observed {} V exceeds full-charge voltage {} V",
                obs.observed_voltage_v, spec.full_voltage_v
            ),
        );
    }
    Ok(())
}

/// Remaining capacity in mAh under the linear model; 0 at or below the
/// empty voltage.
pub fn remaining_capacity(spec: &BatterySpec, obs: &BatteryObservation) -> Result<f64, PowerError> {
    check_observation(spec, obs)?;
    if obs.observed_voltage_v <= spec.empty_voltage_v {
        return Ok(0.0);
    }
    if obs.observed_voltage_v == spec.full_voltage_v {
        return Ok(spec.capacity_mah);
    }
    Ok(spec.capacity_mah * (obs.observed_voltage_v - spec.empty_voltage_v)
        / (spec.full_voltage_v - spec.empty_voltage_v))
}

pub fn energy_used(spec: &BatterySpec, obs: &BatteryObservation) -> Result<f64, PowerError> {
    let remaining = remaining_capacity(spec, obs)?;
    let e_total = total_energy(spec.full_voltage_v, spec.capacity_mah)?;
    let e_remaining = obs.observed_voltage_v * remaining / 1000.0;
    Ok((e_total - e_remaining).max(0.0))
}

/// Flight time in seconds.
pub fn flight_time(e_used_wh: f64, model: &PowerModel) -> Result<f64, PowerError> {
    non_negative("flight time", "energy used", e_used_wh)?;
    let p = model.total_power_w();
    if !(p.is_finite() && p > 0.0) {
        return fail("flight time", format!("total power must be > 0, got {p}"));
    }
    Ok(e_used_wh * 3600.0 / p)
}

/// Range in meters.
pub fn max_range(t_flight_s: f64, v_avg_mps: f64) -> Result<f64, PowerError> {
    non_negative("max range", "flight time", t_flight_s)?;
    non_negative("max range", "average speed", v_avg_mps)?;
    Ok(t_flight_s * v_avg_mps)
}

pub fn estimate_range(
    spec: &BatterySpec,
    obs: &BatteryObservation,
    model: &PowerModel,
) -> Result<RangeEstimate, PowerError> {
    model.validate()?;
    let remaining = remaining_capacity(spec, obs)?;
    let e_total = total_energy(spec.full_voltage_v, spec.capacity_mah)?;
    let e_used = energy_used(spec, obs)?;
    let t = flight_time(e_used, model)?;
    let v = model.cruise_speed_mps;
    let r = max_range(t, v)?;

    let mut assumptions = vec![
        IDEAL_CONDITIONS_NOTE.to_string(),
        format!(
            "Linear voltage/capacity model from {} V (0 mAh) to {} V ({} mAh).",
            spec.empty_voltage_v, spec.full_voltage_v, spec.capacity_mah
        ),
        format!(
            "Total power {} W = {} motors x {} W + {} W avionics; average speed {} m/s.",
            model.total_power_w(),
            model.motor_count,
            model.per_motor_cruise_w,
            model.avionics_w,
            v
        ),
    ];
    if obs.observed_voltage_v == spec.full_voltage_v {
        assumptions.push("Battery at full voltage: no energy used, no flight observed.".into());
    }
    if obs.observed_voltage_v <= spec.empty_voltage_v {
        assumptions.push(format!(
            "Battery depleted: observed {} V at or below model empty voltage {} V; remaining capacity taken as 0.",
            obs.observed_voltage_v, spec.empty_voltage_v
        ));
    }
    Ok(RangeEstimate {
        e_total_wh: e_total,
        e_remaining_wh: e_total - e_used,
        e_used_wh: e_used,
        t_flight_s: t,
        r_max_m: r,
        v_avg_mps: v,
        total_power_w: model.total_power_w(),
        remaining_capacity_mah: remaining,
        assumptions,
    })
}

/// Battery evidence document as stored in a case directory. Optional fields
/// fall back to the LiPo defaults and, for speed, to the autopilot's mission
/// cruise speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryDocument {
    pub battery: BatteryDocSpec,
    pub observation: BatteryObservation,
    pub power_model: PowerDocModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryDocSpec {
    pub cell_count: u32,
    pub capacity_mah: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_voltage_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty_voltage_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerDocModel {
    pub per_motor_cruise_w: f64,
    pub motor_count: u32,
    pub avionics_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cruise_speed_mps: Option<f64>,
}

impl BatteryDocument {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn spec(&self) -> BatterySpec {
        let d = BatterySpec::lipo(self.battery.cell_count, self.battery.capacity_mah);
        BatterySpec {
            full_voltage_v: self.battery.full_voltage_v.unwrap_or(d.full_voltage_v),
            empty_voltage_v: self.battery.empty_voltage_v.unwrap_or(d.empty_voltage_v),
            ..d
        }
    }

    /// Power model with `fallback_speed` used when the document gives none.
    pub fn model(&self, fallback_speed: Option<f64>) -> Result<PowerModel, PowerError> {
        let speed = match self.power_model.cruise_speed_mps.or(fallback_speed) {
            Some(v) => v,
            None => return fail("power model", "no cruise speed in the document or parameters"),
        };
        Ok(PowerModel {
            per_motor_cruise_w: self.power_model.per_motor_cruise_w,
            motor_count: self.power_model.motor_count,
            avionics_w: self.power_model.avionics_w,
            cruise_speed_mps: speed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BatterySpec {
        BatterySpec {
            cell_count: 4,
            capacity_mah: 6500.0,
            full_voltage_v: 16.8,
            empty_voltage_v: 13.55,
        }
    }

    fn model() -> PowerModel {
        PowerModel {
            per_motor_cruise_w: 94.0,
            motor_count: 4,
            avionics_w: 5.0,
            cruise_speed_mps: 2.0,
        }
    }

    fn obs(v: f64) -> BatteryObservation {
        BatteryObservation {
            observed_voltage_v: v,
        }
    }

    #[test]
    fn total_energy_values() {
        assert!((total_energy(16.8, 6500.0).unwrap() - 109.2).abs() < 1e-9);
        assert!((total_energy(16.2, 5300.0).unwrap() - 85.86).abs() < 1e-9);
        assert!(total_energy(16.8, 0.0).is_err());
        assert!(total_energy(-1.0, 10.0).is_err());
    }

    #[test]
    fn remaining_capacity_endpoints() {
        assert!((remaining_capacity(&spec(), &obs(16.2)).unwrap() - 5300.0).abs() < 1.0);
        assert_eq!(remaining_capacity(&spec(), &obs(16.8)).unwrap(), 6500.0);
        assert_eq!(remaining_capacity(&spec(), &obs(13.55)).unwrap(), 0.0);
        assert_eq!(remaining_capacity(&spec(), &obs(12.0)).unwrap(), 0.0);
        assert!(remaining_capacity(&spec(), &obs(17.0)).is_err());
        assert!(remaining_capacity(&spec(), &obs(0.0)).is_err());
    }

    #[test]
    fn energy_used_cases() {
        assert!((energy_used(&spec(), &obs(16.2)).unwrap() - 23.34).abs() < 0.01);
        assert_eq!(energy_used(&spec(), &obs(16.8)).unwrap(), 0.0);
        assert!((energy_used(&spec(), &obs(13.55)).unwrap() - 109.2).abs() < 1e-9);
    }

    #[test]
    fn flight_time_cases() {
        assert!((flight_time(23.34, &model()).unwrap() - 220.5).abs() < 0.1);
        assert_eq!(flight_time(0.0, &model()).unwrap(), 0.0);
        let hundred = PowerModel {
            per_motor_cruise_w: 25.0,
            motor_count: 4,
            avionics_w: 0.0,
            cruise_speed_mps: 1.0,
        };
        assert!((flight_time(10.0, &hundred).unwrap() - 360.0).abs() < 1e-12);
        let zero = PowerModel {
            per_motor_cruise_w: 0.0,
            motor_count: 4,
            avionics_w: 0.0,
            cruise_speed_mps: 1.0,
        };
        assert!(flight_time(1.0, &zero).is_err());
    }

    #[test]
    fn max_range_cases() {
        assert!((max_range(220.5, 2.0).unwrap() - 441.0).abs() < 1e-12);
        assert_eq!(max_range(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(max_range(100.0, 5.0).unwrap(), 500.0);
        assert!(max_range(-1.0, 5.0).is_err());
    }

    #[test]
    fn reference_battery_end_to_end() {
        let r = estimate_range(&spec(), &obs(16.2), &model()).unwrap();
        assert!((r.e_used_wh - 23.34).abs() / 23.34 < 0.005);
        assert!((r.t_flight_s - 220.5).abs() / 220.5 < 0.005);
        assert!((r.r_max_m - 441.0).abs() / 441.0 < 0.005);
        assert_eq!(r.assumptions[0], IDEAL_CONDITIONS_NOTE);
        assert!(r.assumptions.iter().any(|a| a.contains("13.55")));
    }

    #[test]
    fn full_battery_means_no_range() {
        let r = estimate_range(&spec(), &obs(16.8), &model()).unwrap();
        assert_eq!(r.r_max_m, 0.0);
        assert!(r.assumptions.iter().any(|a| a.contains("no flight observed")));
    }

    #[test]
    fn errors_name_the_stage() {
        let mut m = model();
        m.cruise_speed_mps = 0.0;
        let e = estimate_range(&spec(), &obs(16.2), &m).unwrap_err();
        assert_eq!(e.stage, "power model");
        let e = estimate_range(&spec(), &obs(18.0), &model()).unwrap_err();
        assert_eq!(e.stage, "battery observation");
    }

    #[test]
    fn lipo_defaults() {
        let s = BatterySpec::lipo(4, 6500.0);
        assert!((s.full_voltage_v - 16.8).abs() < 1e-12);
        assert!((s.empty_voltage_v - 13.55).abs() < 1e-12);
    }
}
