//! Scenario files, wind input and result output.
//!
//! A scenario is a UTF-8 text file of `key = value` lines. `#` starts a
//! comment. Schedules are comma separated `t:v` pairs, lists are comma
//! separated numbers. Every key is optional.

mod output;
mod wind;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::controller::GainConfig;
use crate::error::{Error, Result};
use crate::plant::TurbineParams;
use crate::sim::{run_scenario, Inputs, SimConfig, SimLog};

pub use output::{emit_plots, read_results, write_results, PLOT_FILES};
pub use wind::{gen_wind, load_wind, parse_wind_csv, write_wind, SyntheticWindSpec, WindSeries};

/// Spacing of generated wind samples (s).
pub const WIND_SAMPLE_DT: f64 = 1.0;

/// Piecewise-constant schedule of `(t_start, value)` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    steps: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        match steps.first() {
            None => return Err(Error::Validation("schedule is empty".into())),
            Some(&(t0, _)) if t0 != 0.0 => {
                return Err(Error::Validation(format!(
                    "schedule must start at t = 0, starts at {t0}"
                )))
            }
            _ => {}
        }
        if steps.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Validation("schedule entries must be finite".into()));
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Validation("schedule times must increase strictly".into()));
        }
        Ok(Self { steps })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            steps: vec![(0.0, v)],
        }
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.steps.partition_point(|&(ts, _)| ts <= t);
        self.steps[k.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindSource {
    Constant(f64),
    File(PathBuf),
    Synthetic(SyntheticWindSpec),
}

/// How the reactive power demand is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum ReactiveDemand {
    /// Fixed power factor; Q_d follows P_d with a positive sign.
    PowerFactor(f64),
    Schedule(Schedule),
}

/// Reactive demand giving power factor `pf` at active demand `p_d`.
pub fn q_from_power_factor(p_d: f64, pf: f64) -> f64 {
    p_d * (1.0 / (pf * pf) - 1.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub turbine: TurbineParams,
    pub gains: GainConfig,
    pub sim: SimConfig,
    pub wind: WindSource,
    pub pd_schedule: Schedule,
    pub qd: ReactiveDemand,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            turbine: TurbineParams::default(),
            gains: GainConfig::default(),
            sim: SimConfig::default(),
            wind: WindSource::Synthetic(SyntheticWindSpec::default()),
            pd_schedule: Schedule::constant(1.0),
            qd: ReactiveDemand::PowerFactor(0.995),
        }
    }
}

/// Resolved time series driving one run.
#[derive(Debug, Clone)]
pub struct ScenarioInputs {
    pub wind: WindSeries,
    pub pd: Schedule,
    pub qd: ReactiveDemand,
}

impl Inputs for ScenarioInputs {
    fn wind(&self, t: f64) -> f64 {
        self.wind.sample(t)
    }

    fn setpoints(&self, t: f64) -> (f64, f64) {
        let p = self.pd.value(t);
        let q = match &self.qd {
            ReactiveDemand::PowerFactor(pf) => q_from_power_factor(p, *pf),
            ReactiveDemand::Schedule(s) => s.value(t),
        };
        (p, q)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.turbine.validate()?;
        self.gains.validate()?;
        self.sim.validate()?;
        match &self.wind {
            WindSource::Constant(v) if !(*v > 0.0 && v.is_finite()) => {
                return Err(Error::Validation(format!("wind_speed must be positive, got {v}")))
            }
            WindSource::Synthetic(spec) => spec.validate()?,
            _ => {}
        }
        if let ReactiveDemand::PowerFactor(pf) = self.qd {
            if !(pf > 0.0 && pf <= 1.0) {
                return Err(Error::Validation(format!("pf_d must lie in (0, 1], got {pf}")));
            }
        }
        Ok(())
    }

    /// Make a relative wind file path relative to `base` instead of the
    /// working directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let WindSource::File(p) = &mut self.wind {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn wind_series(&self) -> Result<WindSeries> {
        match &self.wind {
            WindSource::Constant(v) => WindSeries::constant(*v),
            WindSource::File(p) => load_wind(p),
            WindSource::Synthetic(spec) => gen_wind(spec, self.sim.duration, WIND_SAMPLE_DT),
        }
    }

    pub fn inputs(&self, wind_override: Option<WindSeries>) -> Result<ScenarioInputs> {
        let wind = match wind_override {
            Some(w) => w,
            None => self.wind_series()?,
        };
        Ok(ScenarioInputs {
            wind,
            pd: self.pd_schedule.clone(),
            qd: self.qd.clone(),
        })
    }

    pub fn run(&self, wind_override: Option<WindSeries>) -> Result<SimLog> {
        let inputs = self.inputs(wind_override)?;
        run_scenario(&self.turbine, &self.gains, &self.sim, &inputs)
    }

    pub fn to_text(&self) -> String {
        serialize_scenario(self)
    }
}

fn turbine_fields(p: &mut TurbineParams) -> Vec<(&'static str, &mut f64)> {
    vec![
        ("omega_s", &mut p.omega_s),
        ("r_s", &mut p.r_s),
        ("r_r", &mut p.r_r),
        ("l_s", &mut p.l_s),
        ("l_r", &mut p.l_r),
        ("l_m", &mut p.l_m),
        ("v_ds", &mut p.v_ds),
        ("v_qs", &mut p.v_qs),
        ("inertia", &mut p.inertia),
        ("friction", &mut p.friction),
        ("swept_area", &mut p.swept_area),
        ("blade_radius", &mut p.blade_radius),
        ("beta_min", &mut p.beta_min),
        ("beta_max", &mut p.beta_max),
        ("p_nom", &mut p.p_nom),
        ("p_wind_base", &mut p.p_wind_base),
        ("p_elec_base", &mut p.p_elec_base),
        ("cp_nom", &mut p.cp_nom),
        ("lambda_nom", &mut p.lambda_nom),
        ("omega_r_base", &mut p.omega_r_base),
        ("omega_r_nom", &mut p.omega_r_nom),
        ("v_w_base", &mut p.v_w_base),
        ("p_rated", &mut p.p_rated),
    ]
}

fn gain_fields(g: &mut GainConfig) -> Vec<(&'static str, &mut f64)> {
    vec![
        ("alpha", &mut g.alpha),
        ("h", &mut g.h),
        ("w_p", &mut g.w_p),
        ("w_q", &mut g.w_q),
        ("w_pq", &mut g.w_pq),
        ("eps1", &mut g.eps1),
        ("eps2", &mut g.eps2),
        ("eps3", &mut g.eps3),
        ("t0", &mut g.t0),
        ("t1", &mut g.t1),
        ("t2", &mut g.t2),
        ("delta_omega_rd_init", &mut g.delta_omega_rd_init),
        ("omega_rd_min", &mut g.omega_rd_min),
        ("omega_rd_max", &mut g.omega_rd_max),
        ("omega_rd_0", &mut g.omega_rd_0),
        ("theta_slew", &mut g.theta_slew),
    ]
}

fn sim_fields(s: &mut SimConfig) -> Vec<(&'static str, &mut f64)> {
    vec![
        ("dt", &mut s.dt),
        ("duration", &mut s.duration),
        ("omega_r0", &mut s.initial.omega_r),
        ("beta0", &mut s.initial.beta),
    ]
}

fn synthetic_fields(w: &mut SyntheticWindSpec) -> Vec<(&'static str, &mut f64)> {
    vec![
        ("wind_mean", &mut w.mean),
        ("wind_relaxation", &mut w.relaxation),
        ("wind_volatility", &mut w.volatility),
        ("wind_min", &mut w.min),
        ("wind_max", &mut w.max),
    ]
}

fn parse_number(line: usize, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a number, found '{}'", v.trim()),
    })
}

fn parse_integer(line: usize, v: &str) -> Result<u64> {
    v.trim().parse::<u64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a nonnegative integer, found '{}'", v.trim()),
    })
}

fn parse_list<const N: usize>(line: usize, v: &str) -> Result<[f64; N]> {
    let items: Vec<f64> = v
        .split(',')
        .map(|s| parse_number(line, s))
        .collect::<Result<_>>()?;
    items.try_into().map_err(|items: Vec<f64>| Error::Parse {
        line,
        msg: format!("expected {N} values, found {}", items.len()),
    })
}

fn parse_schedule(line: usize, v: &str) -> Result<Vec<(f64, f64)>> {
    v.split(',')
        .map(|pair| {
            let (t, x) = pair.split_once(':').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected 't:v', found '{}'", pair.trim()),
            })?;
            Ok((parse_number(line, t)?, parse_number(line, x)?))
        })
        .collect()
}

/// Parse a scenario; omitted keys keep their defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected 'key = value', found '{content}'"),
        })?;
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate key '{key}'"),
            });
        }
        entries.insert(key, (line, value.trim().to_string()));
    }

    let mut sc = Scenario::default();
    let mut synth = SyntheticWindSpec::default();
    let mut wind_choices: Vec<WindSource> = Vec::new();
    let mut synthetic_set = false;
    let mut pf: Option<f64> = None;
    let mut qd_steps: Option<Vec<(f64, f64)>> = None;
    let mut pd_steps: Option<(usize, Vec<(f64, f64)>)> = None;

    for (key, (line, value)) in &entries {
        let (line, value) = (*line, value.as_str());
        let k = key.as_str();
        let mut done = false;
        for (name, slot) in turbine_fields(&mut sc.turbine)
            .into_iter()
            .chain(gain_fields(&mut sc.gains))
            .chain(sim_fields(&mut sc.sim))
        {
            if name == k {
                *slot = parse_number(line, value)?;
                done = true;
                break;
            }
        }
        if done {
            continue;
        }
        for (name, slot) in synthetic_fields(&mut synth) {
            if name == k {
                *slot = parse_number(line, value)?;
                synthetic_set = true;
                done = true;
                break;
            }
        }
        if done {
            continue;
        }
        match k {
            "cp_coeffs" => sc.turbine.cp_coeffs = parse_list(line, value)?,
            "k1" => sc.gains.k[0] = parse_list(line, value)?,
            "k2" => sc.gains.k[1] = parse_list(line, value)?,
            "phi0" => sc.sim.initial.phi = Some(parse_list(line, value)?),
            "g_hat0" => sc.sim.initial.g_hat = Some(parse_number(line, value)?),
            "log_stride" => {
                sc.sim.log_stride = usize::try_from(parse_integer(line, value)?).map_err(|_| {
                    Error::Parse {
                        line,
                        msg: "log_stride out of range".into(),
                    }
                })?
            }
            "seed" => sc.sim.seed = parse_integer(line, value)?,
            "wind_seed" => {
                synth.seed = parse_integer(line, value)?;
                synthetic_set = true;
            }
            "wind_speed" => wind_choices.push(WindSource::Constant(parse_number(line, value)?)),
            "wind_file" => wind_choices.push(WindSource::File(PathBuf::from(value))),
            "pd_schedule" => pd_steps = Some((line, parse_schedule(line, value)?)),
            "qd_schedule" => qd_steps = Some(parse_schedule(line, value)?),
            "pf_d" => pf = Some(parse_number(line, value)?),
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key '{k}'"),
                })
            }
        }
    }

    if synthetic_set {
        wind_choices.push(WindSource::Synthetic(synth));
    }
    match wind_choices.len() {
        0 => {}
        1 => sc.wind = wind_choices.pop().expect("one wind source"),
        _ => {
            return Err(Error::Validation(
                "wind_speed, wind_file and synthetic wind keys are mutually exclusive".into(),
            ))
        }
    }
    if let Some((_, steps)) = pd_steps {
        sc.pd_schedule = Schedule::new(steps)?;
    }
    sc.qd = match (pf, qd_steps) {
        (Some(_), Some(_)) => {
            return Err(Error::Validation(
                "pf_d and qd_schedule are mutually exclusive".into(),
            ))
        }
        (Some(pf), None) => ReactiveDemand::PowerFactor(pf),
        (None, Some(steps)) => ReactiveDemand::Schedule(Schedule::new(steps)?),
        (None, None) => sc.qd,
    };
    sc.validate()?;
    Ok(sc)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn fmt_schedule(s: &Schedule) -> String {
    s.steps()
        .iter()
        .map(|(t, v)| format!("{t:?}:{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Write every key of a scenario. Numbers use the shortest exact
/// representation so that parsing the text gives the same scenario back.
pub fn serialize_scenario(sc: &Scenario) -> String {
    let mut sc = sc.clone();
    let mut out = String::new();
    let section = |out: &mut String, title: &str, fields: Vec<(&'static str, &mut f64)>| {
        let _ = writeln!(out, "# {title}");
        for (name, v) in fields {
            let _ = writeln!(out, "{name} = {:?}", *v);
        }
    };
    section(&mut out, "turbine", turbine_fields(&mut sc.turbine));
    let _ = writeln!(out, "cp_coeffs = {}", fmt_list(&sc.turbine.cp_coeffs));
    let _ = writeln!(out);
    section(&mut out, "controller", gain_fields(&mut sc.gains));
    let _ = writeln!(out, "k1 = {}", fmt_list(&sc.gains.k[0]));
    let _ = writeln!(out, "k2 = {}", fmt_list(&sc.gains.k[1]));
    let _ = writeln!(out);
    section(&mut out, "simulation", sim_fields(&mut sc.sim));
    let _ = writeln!(out, "log_stride = {}", sc.sim.log_stride);
    let _ = writeln!(out, "seed = {}", sc.sim.seed);
    if let Some(phi) = sc.sim.initial.phi {
        let _ = writeln!(out, "phi0 = {}", fmt_list(&phi));
    }
    if let Some(g) = sc.sim.initial.g_hat {
        let _ = writeln!(out, "g_hat0 = {g:?}");
    }
    let _ = writeln!(out);
    match &mut sc.wind {
        WindSource::Constant(v) => {
            let _ = writeln!(out, "# wind\nwind_speed = {v:?}");
        }
        WindSource::File(p) => {
            let _ = writeln!(out, "# wind\nwind_file = {}", p.display());
        }
        WindSource::Synthetic(spec) => {
            let seed = spec.seed;
            section(&mut out, "wind", synthetic_fields(spec));
            let _ = writeln!(out, "wind_seed = {seed}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "# demand");
    let _ = writeln!(out, "pd_schedule = {}", fmt_schedule(&sc.pd_schedule));
    match &sc.qd {
        ReactiveDemand::PowerFactor(pf) => {
            let _ = writeln!(out, "pf_d = {pf:?}");
        }
        ReactiveDemand::Schedule(s) => {
            let _ = writeln!(out, "qd_schedule = {}", fmt_schedule(s));
        }
    }
    out
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut sc = parse_scenario(&text)?;
    if let Some(dir) = path.parent() {
        sc.resolve_paths(dir);
    }
    Ok(sc)
}

/// Format with nine significant digits, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.8e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}
