use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Wind speed samples with linear interpolation in between and constant
/// extrapolation beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    points: Vec<(f64, f64)>,
}

impl WindSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("wind series is empty".into()));
        }
        for (k, &(t, v)) in points.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::Validation(format!("wind row {} is not finite", k + 1)));
            }
            if !(v > 0.0) {
                return Err(Error::Validation(format!(
                    "wind speed must be positive, row {} has {v}",
                    k + 1
                )));
            }
            if k > 0 && !(t > points[k - 1].0) {
                return Err(Error::Validation(format!(
                    "wind time must increase strictly, row {} has t = {t}",
                    k + 1
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(vec![(0.0, v)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn sample(&self, t: f64) -> f64 {
        let pts = &self.points;
        let k = pts.partition_point(|&(ti, _)| ti <= t);
        if k == 0 {
            return pts[0].1;
        }
        if k == pts.len() {
            return pts[k - 1].1;
        }
        let (t0, v0) = pts[k - 1];
        let (t1, v1) = pts[k];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Read a two-column `time_s,speed_mps` CSV. A header row is optional.
pub fn load_wind(path: &Path) -> Result<WindSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_wind_csv(&text)
}

pub fn parse_wind_csv(text: &str) -> Result<WindSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(t), Ok(v)) => points.push((t, v)),
            _ if k == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("cannot read numbers from '{}', '{}'", &rec[0], &rec[1]),
                })
            }
        }
    }
    WindSeries::new(points)
}

pub fn write_wind(ws: &WindSeries, path: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["time_s", "speed_mps"]).map_err(csv_err)?;
    for &(t, v) in ws.points() {
        w.write_record([super::fmt_sig(t), super::fmt_sig(v)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean-reverting synthetic wind.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWindSpec {
    /// Long-run mean (m/s).
    pub mean: f64,
    /// Relaxation time of deviations from the mean (s).
    pub relaxation: f64,
    /// Diffusion coefficient (m/s per √s).
    pub volatility: f64,
    pub min: f64,
    pub max: f64,
    pub seed: u64,
}

impl Default for SyntheticWindSpec {
    fn default() -> Self {
        Self {
            mean: 10.0,
            relaxation: 600.0,
            volatility: 0.065,
            min: 3.0,
            max: 25.0,
            seed: 1,
        }
    }
}

impl SyntheticWindSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min > 0.0
            && self.min <= self.mean
            && self.mean <= self.max
            && self.relaxation > 0.0
            && self.volatility >= 0.0
            && self.max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "synthetic wind needs 0 < min <= mean <= max, relaxation > 0 and volatility >= 0, got {self:?}"
            )))
        }
    }

    /// Standard deviation of the unclamped process in steady state.
    pub fn stationary_std(&self) -> f64 {
        self.volatility * (0.5 * self.relaxation).sqrt()
    }
}

/// Exact discretisation of an Ornstein–Uhlenbeck process started at the
/// mean, sampled every `dt_sample` seconds and clamped to the bounds.
pub fn gen_wind(spec: &SyntheticWindSpec, duration: f64, dt_sample: f64) -> Result<WindSeries> {
    spec.validate()?;
    if !(dt_sample > 0.0 && duration >= 0.0) {
        return Err(Error::Validation(format!(
            "need dt_sample > 0 and duration >= 0, got {dt_sample} and {duration}"
        )));
    }
    let n = (duration / dt_sample).ceil() as usize;
    let rho = (-dt_sample / spec.relaxation).exp();
    let step_std = spec.stationary_std() * (1.0 - rho * rho).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dev = 0.0;
    let mut points = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let v = (spec.mean + dev).clamp(spec.min, spec.max);
        points.push((k as f64 * dt_sample, v));
        let e: f64 = StandardNormal.sample(&mut rng);
        dev = rho * dev + step_std * e;
    }
    WindSeries::new(points)
}
