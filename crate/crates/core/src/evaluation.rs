//! Traffic-flow and fuel metrics over completed platoon runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PaccError, Result};
use crate::traffic::{FLEET_SIZE, PAIRS};
use crate::types::VehicleState;

/// Follower speeds below this are excluded from headway statistics (m/s).
pub const HEADWAY_MIN_SPEED: f64 = 1.0;

const GRAVITY: f64 = 9.8066;

/// Time headway `gap / follower_speed`, or `None` at low speed.
pub fn headway(gap: f64, follower_speed: f64) -> Option<f64> {
    (follower_speed >= HEADWAY_MIN_SPEED).then(|| gap / follower_speed)
}

/// VT-CPFM fuel model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub mass_kg: f64,
    pub rotational_mass_factor: f64,
    pub air_density_kgpm3: f64,
    pub drag_coefficient: f64,
    pub altitude_correction: f64,
    pub frontal_area_m2: f64,
    pub rolling_coefficient: f64,
    pub rolling_c1: f64,
    pub rolling_c2: f64,
    pub driveline_efficiency: f64,
    pub grade: f64,
}

const FUEL_DEFAULTS: &str = include_str!("../data/fuel_defaults.toml");

#[derive(Deserialize)]
struct VersionedFuel {
    version: u32,
    #[serde(flatten)]
    params: FuelParams,
}

impl Default for FuelParams {
    fn default() -> Self {
        let v: VersionedFuel =
            toml::from_str(FUEL_DEFAULTS).expect("bundled fuel defaults must parse");
        debug_assert_eq!(v.version, 1);
        v.params
    }
}

impl FuelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) {
            return Err(PaccError::invalid("fuel alpha0 must be > 0"));
        }
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) {
            return Err(PaccError::invalid("fuel alpha1 and alpha2 must be >= 0"));
        }
        if !(self.mass_kg > 0.0) {
            return Err(PaccError::invalid("vehicle mass must be > 0"));
        }
        if !(self.driveline_efficiency > 0.0 && self.driveline_efficiency <= 1.0) {
            return Err(PaccError::invalid("driveline efficiency must be in (0, 1]"));
        }
        Ok(())
    }

    /// Road-load resistance (N) at speed `v` (m/s).
    pub fn resistance(&self, v: f64) -> f64 {
        let aero = 0.5
            * self.air_density_kgpm3
            * self.drag_coefficient
            * self.altitude_correction
            * self.frontal_area_m2
            * v
            * v;
        let rolling = self.mass_kg * GRAVITY * self.rolling_coefficient / 1000.0
            * (self.rolling_c1 * v * 3.6 + self.rolling_c2);
        let grade = self.mass_kg * GRAVITY * self.grade;
        aero + rolling + grade
    }

    /// Tractive power demand (kW).
    pub fn power_kw(&self, s: &VehicleState) -> f64 {
        let force = self.resistance(s.velocity)
            + self.rotational_mass_factor * self.mass_kg * s.acceleration;
        force * s.velocity / (1000.0 * self.driveline_efficiency)
    }

    /// Fuel rate for a given power (L/s).
    pub fn rate_at_power(&self, p_kw: f64) -> f64 {
        if p_kw > 0.0 {
            self.alpha0 + self.alpha1 * p_kw + self.alpha2 * p_kw * p_kw
        } else {
            self.alpha0
        }
    }
}

/// Instantaneous fuel rate (L/s).
pub fn fuel_rate(state: &VehicleState, p: &FuelParams) -> f64 {
    p.rate_at_power(p.power_kw(state))
}

/// One recorded simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// `[PV, SAV, HV1, HV2, HV3]`.
    pub vehicles: [VehicleState; FLEET_SIZE],
    pub fuel_rate: [f64; FLEET_SIZE],
    /// Gap of pair `i` is between vehicle `i` and vehicle `i + 1`.
    pub gaps: [f64; PAIRS],
    pub headways: [Option<f64>; PAIRS],
}

impl TraceRow {
    pub fn new(t: f64, vehicles: [VehicleState; FLEET_SIZE], fuel: &FuelParams) -> Self {
        let fuel_rate = vehicles.map(|v| fuel_rate(&v, fuel));
        let gaps: [f64; PAIRS] =
            std::array::from_fn(|i| vehicles[i].position - vehicles[i + 1].position);
        let headways = std::array::from_fn(|i| headway(gaps[i], vehicles[i + 1].velocity));
        Self {
            t,
            vehicles,
            fuel_rate,
            gaps,
            headways,
        }
    }
}

pub type Trace = Vec<TraceRow>;

/// `(Δx_M, T_M)`: per-pair sample means of gap and headway, averaged over
/// the four pairs.
pub fn average_metrics(trace: &[TraceRow]) -> Result<(f64, f64)> {
    if trace.len() < 2 {
        return Err(PaccError::invalid(format!(
            "trace needs at least 2 steps, got {}",
            trace.len()
        )));
    }
    let mut gap_sum = 0.0;
    let mut headway_sum = 0.0;
    for pair in 0..PAIRS {
        let g: f64 = trace.iter().map(|r| r.gaps[pair]).sum::<f64>() / trace.len() as f64;
        let (hs, hn) = trace
            .iter()
            .filter_map(|r| r.headways[pair])
            .fold((0.0, 0usize), |(s, n), h| (s + h, n + 1));
        if hn == 0 {
            return Err(PaccError::MetricUndefined { pair: pair + 1 });
        }
        gap_sum += g;
        headway_sum += hs / hn as f64;
    }
    Ok((gap_sum / PAIRS as f64, headway_sum / PAIRS as f64))
}

/// Total fuel of all vehicles (L), trapezoidal in time.
pub fn total_fuel(trace: &[TraceRow], p: &FuelParams) -> f64 {
    let rates: Vec<[f64; FLEET_SIZE]> = trace
        .iter()
        .map(|r| r.vehicles.map(|v| fuel_rate(&v, p)))
        .collect();
    trace
        .windows(2)
        .zip(rates.windows(2))
        .map(|(w, r)| {
            let dt = w[1].t - w[0].t;
            (0..FLEET_SIZE)
                .map(|k| 0.5 * (r[0][k] + r[1][k]) * dt)
                .sum::<f64>()
        })
        .sum()
}

fn trace_header() -> String {
    let mut cols = vec!["t".to_string()];
    for field in ["pos", "speed", "accel", "fuelrate"] {
        cols.extend((0..FLEET_SIZE).map(|k| format!("veh{k}_{field}")));
    }
    cols.extend((1..=PAIRS).map(|k| format!("gap{k}")));
    cols.extend((1..=PAIRS).map(|k| format!("headway{k}")));
    cols.join(",")
}

/// Serialize a trace as CSV.
///
/// Floats use the shortest representation that parses back to the same
/// value, so metrics recomputed from the file are bit-identical. Excluded
/// headways are written as empty fields.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut s = trace_header();
    s.push('\n');
    for r in trace {
        s.push_str(&r.t.to_string());
        for v in &r.vehicles {
            let _ = write!(s, ",{}", v.position);
        }
        for v in &r.vehicles {
            let _ = write!(s, ",{}", v.velocity);
        }
        for v in &r.vehicles {
            let _ = write!(s, ",{}", v.acceleration);
        }
        for f in &r.fuel_rate {
            let _ = write!(s, ",{f}");
        }
        for g in &r.gaps {
            let _ = write!(s, ",{g}");
        }
        for h in &r.headways {
            match h {
                Some(h) => {
                    let _ = write!(s, ",{h}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_trace(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_to_csv(trace)).map_err(|e| PaccError::io(path, e))
}

pub fn trace_from_csv_reader<R: std::io::Read>(reader: R) -> Result<Trace> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>().join(",") != trace_header() {
        return Err(PaccError::invalid("unexpected trace header"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse()
                .map_err(|_| PaccError::invalid(format!("cannot parse trace field `{raw}`")))
        };
        let t = num(0)?;
        let mut vehicles = [VehicleState::default(); FLEET_SIZE];
        let mut fuel_rate = [0.0; FLEET_SIZE];
        for k in 0..FLEET_SIZE {
            vehicles[k] = VehicleState::new(
                num(1 + k)?,
                num(1 + FLEET_SIZE + k)?,
                num(1 + 2 * FLEET_SIZE + k)?,
            );
            fuel_rate[k] = num(1 + 3 * FLEET_SIZE + k)?;
        }
        let base = 1 + 4 * FLEET_SIZE;
        let mut gaps = [0.0; PAIRS];
        let mut headways = [None; PAIRS];
        for k in 0..PAIRS {
            gaps[k] = num(base + k)?;
            let raw = rec.get(base + PAIRS + k).unwrap_or("");
            headways[k] = if raw.is_empty() { None } else { Some(num(base + PAIRS + k)?) };
        }
        out.push(TraceRow {
            t,
            vehicles,
            fuel_rate,
            gaps,
            headways,
        });
    }
    Ok(out)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| PaccError::io(path, e))?;
    trace_from_csv_reader(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn platoon(gaps: [f64; PAIRS], v: f64) -> [VehicleState; FLEET_SIZE] {
        let mut x = 1000.0;
        let mut out = [VehicleState::new(x, v, 0.0); FLEET_SIZE];
        for k in 0..PAIRS {
            x -= gaps[k];
            out[k + 1] = VehicleState::new(x, v, 0.0);
        }
        out
    }

    fn steady_trace(gaps: [f64; PAIRS], v: f64, steps: usize, dt: f64) -> Trace {
        let fuel = FuelParams::default();
        (0..steps)
            .map(|i| {
                let mut veh = platoon(gaps, v);
                for s in &mut veh {
                    s.position += v * i as f64 * dt;
                }
                TraceRow::new(i as f64 * dt, veh, &fuel)
            })
            .collect()
    }

    #[test]
    fn headway_examples() {
        assert_eq!(headway(20.0, 10.0), Some(2.0));
        assert_eq!(headway(20.0, 0.5), None);
    }

    #[test]
    fn constant_platoon_metrics() {
        let t = steady_trace([20.0; 4], 10.0, 50, 0.1);
        let (dx, th) = average_metrics(&t).unwrap();
        assert!((dx - 20.0).abs() < 1e-12);
        assert!((th - 2.0).abs() < 1e-12);

        let t = steady_trace([10.0, 20.0, 30.0, 40.0], 10.0, 50, 0.1);
        let (dx, _) = average_metrics(&t).unwrap();
        assert!((dx - 25.0).abs() < 1e-12);
    }

    #[test]
    fn all_excluded_pair_is_undefined() {
        let t = steady_trace([20.0; 4], 0.0, 10, 0.1);
        assert!(matches!(average_metrics(&t), Err(PaccError::MetricUndefined { pair: 1 })));
        assert!(average_metrics(&t[..1]).is_err());
    }

    #[test]
    fn idle_fuel() {
        let p = FuelParams::default();
        let stopped = VehicleState::new(0.0, 0.0, 0.0);
        assert_eq!(fuel_rate(&stopped, &p), p.alpha0);
        let braking = VehicleState::new(0.0, 15.0, -3.0);
        assert!(p.power_kw(&braking) < 0.0);
        assert_eq!(fuel_rate(&braking, &p), p.alpha0);

        let t = steady_trace([20.0; 4], 0.0, 1001, 0.1);
        let total = total_fuel(&t, &p);
        assert!((total - 500.0 * p.alpha0).abs() < 1e-12);
    }

    #[test]
    fn rate_monotone_in_power() {
        let p = FuelParams::default();
        let mut prev = p.rate_at_power(1e-9);
        for i in 1..200 {
            let r = p.rate_at_power(i as f64 * 0.5);
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn cruise_total_matches_constant_rate() {
        let p = FuelParams::default();
        let t = steady_trace([25.0; 4], 20.0, 601, 0.1);
        let rate = fuel_rate(&VehicleState::new(0.0, 20.0, 0.0), &p);
        let expected = 5.0 * rate * 60.0;
        assert!(((total_fuel(&t, &p) - expected) / expected).abs() < 1e-6);

        let t2 = steady_trace([25.0; 4], 20.0, 1201, 0.1);
        assert!((total_fuel(&t2, &p) / total_fuel(&t, &p) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn defaults_are_valid() {
        FuelParams::default().validate().unwrap();
    }

    #[test]
    fn trace_csv_round_trip_is_exact() {
        let mut t = steady_trace([20.0, 17.3, 19.1, 23.7], 7.3, 30, 0.1);
        t[0].headways[2] = None;
        let back = trace_from_csv_reader(trace_to_csv(&t).as_bytes()).unwrap();
        assert_eq!(t, back);
    }
}
