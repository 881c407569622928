//! Leader/follower demonstrations: file ingestion and segmentation.

use std::path::Path;

use crate::cycle::central_differences;
use crate::error::{PaccError, Result};
use crate::evaluation::headway;
use crate::trajectory::SampledProfile;
use crate::types::VehicleState;

const GRID_TOL: f64 = 1e-6;

/// States sampled at a fixed period starting at `start_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub start_time: f64,
    pub period: f64,
    pub states: Vec<VehicleState>,
}

impl SampledTrajectory {
    pub fn duration(&self) -> f64 {
        self.states.len().saturating_sub(1) as f64 * self.period
    }

    pub fn profile(&self) -> SampledProfile<'_> {
        SampledProfile {
            period: self.period,
            samples: &self.states,
        }
    }
}

/// One recorded car-following run: a leader and the demonstrating follower
/// on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub leader: SampledTrajectory,
    pub follower: SampledTrajectory,
}

/// One `T_h`-long slice of a demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationSegment {
    pub duration: f64,
    pub sample_period: f64,
    pub follower_samples: Vec<VehicleState>,
    pub leader_samples: Vec<VehicleState>,
    /// Desired speed: the follower's maximum speed within the segment.
    pub v_d: f64,
}

impl DemonstrationSegment {
    pub fn follower_profile(&self) -> SampledProfile<'_> {
        SampledProfile {
            period: self.sample_period,
            samples: &self.follower_samples,
        }
    }

    pub fn initial_state(&self) -> VehicleState {
        self.follower_samples[0]
    }
}

/// Segments pooled from one driver's demonstrations plus the constants
/// derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationSet {
    pub segments: Vec<DemonstrationSegment>,
    /// Observed minimum time headway over every demonstration sample (s).
    pub tau: f64,
    pub d_s: f64,
    pub segment_length: f64,
}

impl DemonstrationSet {
    pub fn from_demonstrations(demos: &[Demonstration], t_h: f64, d_s: f64) -> Result<Self> {
        if demos.is_empty() {
            return Err(PaccError::invalid("no demonstrations given"));
        }
        let mut segments = Vec::new();
        for d in demos {
            segments.extend(split_demonstration(&d.leader, &d.follower, t_h)?);
        }
        let tau = min_headway(demos).ok_or_else(|| {
            PaccError::Degenerate(
                "no demonstration sample has a follower speed high enough to define a headway"
                    .into(),
            )
        })?;
        Ok(Self {
            segments,
            tau,
            d_s,
            segment_length: t_h,
        })
    }
}

/// Minimum headway over all samples, ignoring low-speed samples.
pub fn min_headway(demos: &[Demonstration]) -> Option<f64> {
    demos
        .iter()
        .flat_map(|d| d.leader.states.iter().zip(&d.follower.states))
        .filter_map(|(l, f)| {
            let gap = l.position - f.position;
            if gap > 0.0 {
                headway(gap, f.velocity)
            } else {
                None
            }
        })
        .reduce(f64::min)
}

/// Split a demonstration into consecutive `t_h`-long segments.
///
/// Adjacent segments share their boundary sample. A trailing remainder
/// shorter than `t_h` is dropped.
pub fn split_demonstration(
    leader: &SampledTrajectory,
    follower: &SampledTrajectory,
    t_h: f64,
) -> Result<Vec<DemonstrationSegment>> {
    if leader.states.len() != follower.states.len() {
        return Err(PaccError::invalid(format!(
            "leader has {} samples, follower has {}",
            leader.states.len(),
            follower.states.len()
        )));
    }
    let period = leader.period;
    if (leader.period - follower.period).abs() > GRID_TOL * period
        || (leader.start_time - follower.start_time).abs() > GRID_TOL * period
    {
        return Err(PaccError::invalid("leader and follower time grids differ"));
    }
    if !(t_h.is_finite() && t_h > 0.0) {
        return Err(PaccError::invalid(format!("segment length must be > 0, got {t_h}")));
    }
    let ratio = t_h / period;
    let step = ratio.round() as usize;
    if step == 0 || (ratio - step as f64).abs() > GRID_TOL * ratio {
        return Err(PaccError::invalid(format!(
            "segment length {t_h} s is not a multiple of the sample period {period} s"
        )));
    }
    let n = leader.states.len();
    if n < step + 1 {
        return Err(PaccError::invalid(format!(
            "demonstration lasts {} s, shorter than one segment of {t_h} s",
            leader.duration()
        )));
    }
    let count = (n - 1) / step;
    Ok((0..count)
        .map(|k| {
            let range = k * step..=(k + 1) * step;
            let follower_samples = follower.states[range.clone()].to_vec();
            let leader_samples = leader.states[range].to_vec();
            let v_d = follower_samples
                .iter()
                .map(|s| s.velocity)
                .fold(f64::NEG_INFINITY, f64::max);
            DemonstrationSegment {
                duration: step as f64 * period,
                sample_period: period,
                follower_samples,
                leader_samples,
                v_d,
            }
        })
        .collect())
}

const REQUIRED_COLUMNS: [&str; 5] = [
    "time_s",
    "leader_pos_m",
    "leader_speed_mps",
    "follower_pos_m",
    "follower_speed_mps",
];
const LEADER_ACCEL: &str = "leader_accel_mps2";
const FOLLOWER_ACCEL: &str = "follower_accel_mps2";

impl Demonstration {
    /// Parse the demonstration CSV format.
    ///
    /// Acceleration columns are optional; when absent they are derived from
    /// the speeds by central differences.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = [0usize; 5];
        for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = col(name)
                .ok_or_else(|| PaccError::invalid(format!("missing column `{name}`")))?;
        }
        let la = col(LEADER_ACCEL);
        let fa = col(FOLLOWER_ACCEL);

        let mut cols: [Vec<f64>; 7] = Default::default();
        for (row_no, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                let raw = rec.get(i).unwrap_or("");
                raw.parse::<f64>().map_err(|_| {
                    PaccError::invalid(format!("row {}: cannot parse `{raw}`", row_no + 2))
                })
            };
            for (c, &i) in cols.iter_mut().zip(&idx) {
                c.push(get(i)?);
            }
            if let Some(i) = la {
                cols[5].push(get(i)?);
            }
            if let Some(i) = fa {
                cols[6].push(get(i)?);
            }
        }
        let [time, lp, lv, fp, fv, lacc, facc] = cols;
        if time.len() < 2 {
            return Err(PaccError::invalid("demonstration needs at least 2 rows"));
        }
        let period = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
        if !(period > 0.0) {
            return Err(PaccError::invalid("time column is not increasing"));
        }
        for (i, w) in time.windows(2).enumerate() {
            // Times are usually printed with a few decimals; allow for that.
            if ((w[1] - w[0]) - period).abs() > 1e-3 * period {
                return Err(PaccError::invalid(format!(
                    "demonstration is not sampled at a fixed rate (row {})",
                    i + 3
                )));
            }
        }
        let lacc = if la.is_some() { lacc } else { central_differences(&lv, period) };
        let facc = if fa.is_some() { facc } else { central_differences(&fv, period) };
        let build = |p: &[f64], v: &[f64], a: &[f64]| -> Result<SampledTrajectory> {
            let states: Vec<VehicleState> = p
                .iter()
                .zip(v)
                .zip(a)
                .map(|((&p, &v), &a)| VehicleState::new(p, v, a))
                .collect();
            for s in &states {
                s.validate()?;
            }
            Ok(SampledTrajectory {
                start_time: time[0],
                period,
                states,
            })
        };
        Ok(Self {
            leader: build(&lp, &lv, &lacc)?,
            follower: build(&fp, &fv, &facc)?,
        })
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| PaccError::io(path, e))?;
        Self::from_csv_reader(f)
    }

    /// Serialize with accelerations included, exact float representation.
    pub fn to_csv_string(&self) -> String {
        let mut s = REQUIRED_COLUMNS.join(",");
        s.push(',');
        s.push_str(LEADER_ACCEL);
        s.push(',');
        s.push_str(FOLLOWER_ACCEL);
        s.push('\n');
        for (i, (l, f)) in self.leader.states.iter().zip(&self.follower.states).enumerate() {
            let t = self.leader.start_time + i as f64 * self.leader.period;
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t, l.position, l.velocity, f.position, f.velocity, l.acceleration, f.acceleration
            ));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| PaccError::io(path, e))
    }
}
