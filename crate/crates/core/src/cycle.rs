//! Speed-vs-time driving cycles (EPA US06, FTP-75, recorded commutes).

use std::path::Path;

use serde::Deserialize;

use crate::error::{PaccError, Result};

/// Relative tolerance used to decide whether a time grid is uniform.
const GRID_TOL: f64 = 1e-6;

/// A speed profile sampled at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingCycle {
    sample_period: f64,
    speeds: Vec<f64>,
}

impl DrivingCycle {
    pub const DEFAULT_PERIOD: f64 = 0.1;

    pub fn new(sample_period: f64, speeds: Vec<f64>) -> Result<Self> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(PaccError::invalid(format!(
                "sample period must be > 0, got {sample_period}"
            )));
        }
        if speeds.len() < 2 {
            return Err(PaccError::invalid(format!(
                "driving cycle needs at least 2 samples, got {}",
                speeds.len()
            )));
        }
        if let Some((i, v)) = speeds
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(PaccError::invalid(format!("cycle speed #{i} is invalid: {v}")));
        }
        Ok(Self {
            sample_period,
            speeds,
        })
    }

    /// Constant-speed cycle lasting `duration` seconds.
    pub fn constant(speed: f64, duration: f64, sample_period: f64) -> Result<Self> {
        let n = (duration / sample_period).round() as usize + 1;
        Self::new(sample_period, vec![speed; n.max(2)])
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.speeds.len() - 1) as f64 * self.sample_period
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }

    /// Linearly interpolated speed; the end speeds are held outside the cycle.
    pub fn speed_at(&self, t: f64) -> f64 {
        interp_uniform(&self.speeds, self.sample_period, t)
    }

    /// Per-sample acceleration by central differences (one-sided at the ends).
    pub fn accelerations(&self) -> Vec<f64> {
        central_differences(&self.speeds, self.sample_period)
    }

    /// Positions by trapezoidal integration of the speeds, starting at `x0`.
    pub fn positions(&self, x0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.speeds.len());
        let mut x = x0;
        out.push(x);
        for w in self.speeds.windows(2) {
            x += 0.5 * (w[0] + w[1]) * self.sample_period;
            out.push(x);
        }
        out
    }

    /// Trapezoidal distance travelled over the whole cycle.
    pub fn distance(&self) -> f64 {
        self.positions(0.0).last().copied().unwrap_or(0.0)
    }

    /// Resample by linear interpolation onto a grid of period `new_period`.
    ///
    /// The grid starts at 0 and extends to the first grid point at or past the
    /// cycle end, holding the final speed there, so both endpoint speeds are
    /// preserved. Speeds are clipped at zero.
    pub fn resample(&self, new_period: f64) -> Result<DrivingCycle> {
        if !(new_period.is_finite() && new_period > 0.0) {
            return Err(PaccError::invalid(format!(
                "new period must be > 0, got {new_period}"
            )));
        }
        if (new_period - self.sample_period).abs() <= GRID_TOL * self.sample_period {
            return Ok(self.clone());
        }
        let steps = (self.duration() / new_period - GRID_TOL).ceil().max(1.0) as usize;
        let speeds = (0..=steps)
            .map(|i| self.speed_at(i as f64 * new_period).max(0.0))
            .collect();
        DrivingCycle::new(new_period, speeds)
    }

    /// Read a `time_s,speed_mps` CSV with a header row.
    ///
    /// Times must be strictly increasing. A uniform grid is kept as is; an
    /// irregular one is interpolated onto [`Self::DEFAULT_PERIOD`].
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            time_s: f64,
            speed_mps: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut times = Vec::new();
        let mut speeds = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            times.push(row.time_s);
            speeds.push(row.speed_mps);
        }
        from_timed_samples(&times, &speeds)
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| PaccError::io(path, e))?;
        Self::from_csv_reader(f)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("time_s,speed_mps\n");
        for (i, v) in self.speeds.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i as f64 * self.sample_period, v));
        }
        s
    }
}

fn from_timed_samples(times: &[f64], speeds: &[f64]) -> Result<DrivingCycle> {
    if times.len() < 2 {
        return Err(PaccError::invalid(format!(
            "driving cycle needs at least 2 samples, got {}",
            times.len()
        )));
    }
    let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = steps.iter().position(|d| !(*d > 0.0)) {
        return Err(PaccError::invalid(format!(
            "time column is not strictly increasing at row {}",
            i + 2
        )));
    }
    let first = steps[0];
    let uniform = steps.iter().all(|d| (d - first).abs() <= GRID_TOL * first);
    if uniform {
        return DrivingCycle::new(first, speeds.to_vec());
    }
    let t0 = times[0];
    let duration = times[times.len() - 1] - t0;
    let period = DrivingCycle::DEFAULT_PERIOD;
    let n = (duration / period - GRID_TOL).ceil() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut k = 0;
    for i in 0..=n {
        let t = (t0 + i as f64 * period).min(times[times.len() - 1]);
        while k + 2 < times.len() && times[k + 1] < t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        out.push((speeds[k] + w * (speeds[k + 1] - speeds[k])).max(0.0));
    }
    DrivingCycle::new(period, out)
}

/// Linear interpolation on a uniform grid starting at 0, clamped at the ends.
pub(crate) fn interp_uniform(values: &[f64], period: f64, t: f64) -> f64 {
    let last = values.len() - 1;
    let x = t / period;
    if x <= 0.0 {
        return values[0];
    }
    let i = x.floor() as usize;
    if i >= last {
        return values[last];
    }
    let w = x - i as f64;
    if w == 0.0 {
        values[i]
    } else {
        values[i] + w * (values[i + 1] - values[i])
    }
}

pub(crate) fn central_differences(values: &[f64], period: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| match i {
            0 => (values[1] - values[0]) / period,
            i if i == n - 1 => (values[n - 1] - values[n - 2]) / period,
            i => (values[i + 1] - values[i - 1]) / (2.0 * period),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resample_midpoint() {
        let c = DrivingCycle::new(1.0, vec![0.0, 10.0]).unwrap();
        let r = c.resample(0.5).unwrap();
        assert_eq!(r.speeds(), &[0.0, 5.0, 10.0]);
        assert_eq!(r.sample_period(), 0.5);
    }

    #[test]
    fn resample_identity() {
        let c = DrivingCycle::new(0.1, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(c.resample(0.1).unwrap(), c);
    }

    #[test]
    fn rejects_short_or_invalid_cycles() {
        assert!(DrivingCycle::new(1.0, vec![]).is_err());
        assert!(DrivingCycle::new(1.0, vec![3.0]).is_err());
        assert!(DrivingCycle::new(0.0, vec![3.0, 4.0]).is_err());
        assert!(DrivingCycle::new(1.0, vec![3.0, -4.0]).is_err());
    }

    #[test]
    fn resample_holds_end_speed_off_grid() {
        let c = DrivingCycle::new(1.0, vec![0.0, 2.0, 4.0]).unwrap();
        let r = c.resample(0.75).unwrap();
        assert_eq!(r.speeds().first(), Some(&0.0));
        assert_eq!(r.speeds().last(), Some(&4.0));
        assert!(r.duration() >= c.duration());
    }

    #[test]
    fn csv_uniform_and_irregular() {
        let c = DrivingCycle::from_csv_reader("time_s,speed_mps\n0,0\n1,2\n2,4\n".as_bytes()).unwrap();
        assert_eq!(c.sample_period(), 1.0);
        assert_eq!(c.speeds(), &[0.0, 2.0, 4.0]);

        let c = DrivingCycle::from_csv_reader("time_s,speed_mps\n0,0\n0.5,1\n2,4\n".as_bytes()).unwrap();
        assert_eq!(c.sample_period(), 0.1);
        assert_eq!(c.len(), 21);
        assert!((c.speed_at(1.0) - 2.0).abs() < 1e-12);
        assert!((c.speeds()[20] - 4.0).abs() < 1e-12);

        assert!(DrivingCycle::from_csv_reader("time_s,speed_mps\n0,0\n0,1\n".as_bytes()).is_err());
        assert!(DrivingCycle::from_csv_reader("time_s,speed_mps\n0,0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn resample_round_trip_exact_on_source_grid(
            speeds in prop::collection::vec(0.0f64..40.0, 2..40),
            factor in 1usize..6,
        ) {
            let c = DrivingCycle::new(1.0, speeds.clone()).unwrap();
            let fine = c.resample(1.0 / factor as f64).unwrap();
            let back = fine.resample(1.0).unwrap();
            prop_assert_eq!(back.len(), speeds.len());
            for (a, b) in back.speeds().iter().zip(&speeds) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            prop_assert!(fine.resample(fine.sample_period()).unwrap() == fine);
        }
    }
}
