//! Driving cycles, WLTC stages, synthetic profiles and DC-link load derivation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::interp::interp1;
use crate::powertrain::{drive_power, load_power, VehicleParams};

const WLTC_CLASS3B: &str = include_str!("../data/wltc_class3b.csv");

/// Sample period used when a file has non-uniform timestamps.
pub const DEFAULT_DT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DrivingCycle {
    pub name: String,
    pub dt: f64,
    /// m/s, one per sample.
    pub v: Vec<f64>,
    /// Road grade, rad.
    pub theta: Option<Vec<f64>>,
}

impl DrivingCycle {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.v.len().saturating_sub(1) as f64
    }

    /// Trapezoidal distance, m.
    pub fn distance(&self) -> f64 {
        self.v.windows(2).map(|w| 0.5 * (w[0] + w[1]) * self.dt).sum()
    }

    /// Acceleration by central differences, one-sided at the ends.
    pub fn acceleration(&self) -> Vec<f64> {
        let n = self.v.len();
        let v = &self.v;
        (0..n)
            .map(|k| match (k, n) {
                (_, 0 | 1) => 0.0,
                (0, _) => (v[1] - v[0]) / self.dt,
                (k, n) if k == n - 1 => (v[k] - v[k - 1]) / self.dt,
                (k, _) => (v[k + 1] - v[k - 1]) / (2.0 * self.dt),
            })
            .collect()
    }

    fn slice(&self, name: String, lo: usize, hi: usize) -> Self {
        Self {
            name,
            dt: self.dt,
            v: self.v[lo..=hi].to_vec(),
            theta: self.theta.as_ref().map(|t| t[lo..=hi].to_vec()),
        }
    }

    /// Builds a cycle from timestamped samples, resampling onto `dt` when the
    /// input spacing is not uniform.
    pub fn from_samples(
        name: impl Into<String>,
        t: &[f64],
        v: &[f64],
        theta: Option<&[f64]>,
        dt: f64,
    ) -> Result<Self> {
        let name = name.into();
        if t.len() < 2 {
            return Err(Error::Parse {
                location: name,
                message: "a cycle needs at least two samples".into(),
            });
        }
        if let Some(row) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicTime { row: row + 1 });
        }
        if let Some(k) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Parse {
                location: format!("{name} sample {k}"),
                message: format!("speed {} must be finite and non-negative", v[k]),
            });
        }
        let h = t[1] - t[0];
        let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        if uniform {
            return Ok(Self {
                name,
                dt: h,
                v: v.to_vec(),
                theta: theta.map(<[f64]>::to_vec),
            });
        }
        let n = ((t[t.len() - 1] - t[0]) / dt).floor() as usize + 1;
        let grid: Vec<f64> = (0..n).map(|k| t[0] + k as f64 * dt).collect();
        Ok(Self {
            name,
            dt,
            v: grid.iter().map(|&x| interp1(t, v, x)).collect(),
            theta: theta.map(|th| grid.iter().map(|&x| interp1(t, th, x)).collect()),
        })
    }
}

#[derive(Deserialize)]
struct CycleRow {
    t_s: f64,
    v_mps: f64,
    theta_rad: Option<f64>,
}

/// Reads a `t_s,v_mps[,theta_rad]` CSV. `#` lines are ignored.
pub fn load_cycle(path: &Path) -> Result<DrivingCycle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cycle".into());
    parse_cycle(&text, &name, &path.display().to_string())
}

pub(crate) fn parse_cycle(text: &str, name: &str, origin: &str) -> Result<DrivingCycle> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let (mut t, mut v, mut th) = (Vec::new(), Vec::new(), Vec::new());
    let mut has_theta = None;
    for (i, row) in rdr.deserialize::<CycleRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            location: format!("{origin}:{}", i + 2),
            message: e.to_string(),
        })?;
        let this = row.theta_rad.is_some();
        if *has_theta.get_or_insert(this) != this {
            return Err(Error::Parse {
                location: format!("{origin}:{}", i + 2),
                message: "slope column present on some rows only".into(),
            });
        }
        t.push(row.t_s);
        v.push(row.v_mps);
        th.push(row.theta_rad.unwrap_or(0.0));
    }
    let theta = has_theta.unwrap_or(false).then_some(th.as_slice());
    DrivingCycle::from_samples(name, &t, &v, theta, DEFAULT_DT).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            location: origin.to_string(),
            message,
        },
        other => other,
    })
}

/// The full WLTC Class 3b trace at 1 Hz (t = 0..1800 s).
pub fn wltc_class3b() -> DrivingCycle {
    parse_cycle(WLTC_CLASS3B, "WLTC", "wltc_class3b.csv").expect("embedded cycle parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WltpStage {
    Low,
    Medium,
    High,
    ExtraHigh,
}

impl WltpStage {
    pub const ALL: [WltpStage; 4] = [Self::Low, Self::Medium, Self::High, Self::ExtraHigh];

    /// First and last sample of the stage; neighbouring stages share the
    /// standstill sample at their boundary.
    pub fn bounds(self) -> (usize, usize) {
        match self {
            Self::Low => (0, 589),
            Self::Medium => (589, 1022),
            Self::High => (1022, 1477),
            Self::ExtraHigh => (1477, 1800),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::Low => "L",
            Self::Medium => "M",
            Self::High => "H",
            Self::ExtraHigh => "E",
        }
    }
}

impl fmt::Display for WltpStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WL-{}", self.code())
    }
}

impl FromStr for WltpStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let code = s.strip_prefix("WL-").unwrap_or(s);
        match code.to_ascii_uppercase().as_str() {
            "L" | "LOW" => Ok(Self::Low),
            "M" | "MEDIUM" => Ok(Self::Medium),
            "H" | "HIGH" => Ok(Self::High),
            "E" | "EXTRA-HIGH" | "EXTRAHIGH" => Ok(Self::ExtraHigh),
            _ => Err(Error::UnknownStage(s.to_string())),
        }
    }
}

/// Sub-trace of a full 1 Hz WLTC trace.
pub fn wltp_stage(cycle: &DrivingCycle, stage: WltpStage) -> Result<DrivingCycle> {
    if cycle.len() != 1801 || (cycle.dt - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidCycle(format!(
            "expected the full 1 Hz WLTC trace (1801 samples), got {} samples at {} s",
            cycle.len(),
            cycle.dt
        )));
    }
    let (lo, hi) = stage.bounds();
    Ok(cycle.slice(stage.to_string(), lo, hi))
}

/// DC-link load demanded by a cycle; step `k` spans `[k·dt, (k+1)·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub name: String,
    pub dt: f64,
    /// W
    pub p_pl: Vec<f64>,
}

impl LoadProfile {
    pub fn new(name: impl Into<String>, dt: f64, p_pl: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            dt,
            p_pl,
        }
    }

    pub fn len(&self) -> usize {
        self.p_pl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_pl.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.p_pl.len() as f64
    }

    /// Steps with non-negative load.
    pub fn propulsion_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.p_pl[k] >= 0.0)
    }

    /// Steps with negative (regenerative) load.
    pub fn regen_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.p_pl[k] < 0.0)
    }

    pub fn sub_profile(&self, lo: usize, hi: usize) -> Self {
        Self {
            name: format!("{}[{lo}..{hi}]", self.name),
            dt: self.dt,
            p_pl: self.p_pl[lo..hi].to_vec(),
        }
    }

    /// Piecewise-constant profile from `(power W, steps)` pairs.
    pub fn staircase(name: impl Into<String>, dt: f64, levels: &[(f64, usize)]) -> Self {
        let p_pl = levels
            .iter()
            .flat_map(|&(p, n)| std::iter::repeat_n(p, n))
            .collect();
        Self::new(name, dt, p_pl)
    }
}

pub fn derive_load(cycle: &DrivingCycle, p: &VehicleParams) -> LoadProfile {
    let acc = cycle.acceleration();
    let p_pl = (0..cycle.len())
        .map(|k| {
            let theta = cycle.theta.as_ref().map_or(0.0, |t| t[k]);
            let v = cycle.v[k];
            load_power(drive_power(v, acc[k], theta, p), v, p)
        })
        .collect();
    LoadProfile::new(cycle.name.clone(), cycle.dt, p_pl)
}

/// Load profile of one WLTC stage.
pub fn wltp_load(stage: WltpStage, p: &VehicleParams) -> LoadProfile {
    let cycle = wltp_stage(&wltc_class3b(), stage).expect("embedded trace is a full WLTC");
    derive_load(&cycle, p)
}

/// 70-s test staircase: three rising propulsion levels, then full regeneration.
pub fn pulse_profile() -> LoadProfile {
    LoadProfile::staircase(
        "pulse",
        1.0,
        &[(8e3, 14), (20e3, 14), (35e3, 14), (-15e3, 28)],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Pulse,
    MixedRural,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pulse" => Ok(Self::Pulse),
            "mixed-rural" => Ok(Self::MixedRural),
            _ => Err(Error::InvalidCycle(format!(
                "unknown synthetic cycle `{s}` (expected pulse or mixed-rural)"
            ))),
        }
    }
}

/// Load profile for a synthetic cycle. The pulse is defined directly as a load.
pub fn synth_load(kind: SynthKind, seed: u64, p: &VehicleParams) -> LoadProfile {
    match kind {
        SynthKind::Pulse => pulse_profile(),
        SynthKind::MixedRural => derive_load(&mixed_rural(seed), p),
    }
}

/// Seeded urban/rural blend of 1201 one-second samples that starts and ends
/// at standstill and never exceeds 27 m/s.
pub fn mixed_rural(seed: u64) -> DrivingCycle {
    const N: usize = 1201;
    const A_UP: f64 = 1.0;
    const A_DOWN: f64 = 1.5;
    const RAMP: f64 = 30.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut targets: Vec<(f64, usize)> = Vec::new();
    let mut planned = 0;
    let mut urban = rng.gen_bool(0.5);
    while planned < N {
        let legs = rng.gen_range(2..=4);
        for _ in 0..legs {
            if urban {
                targets.push((rng.gen_range(8.0..14.0), rng.gen_range(15..40)));
                targets.push((0.0, rng.gen_range(5..20)));
            } else {
                targets.push((rng.gen_range(17.0..25.0), rng.gen_range(40..120)));
            }
        }
        planned += targets[targets.len() - legs..]
            .iter()
            .map(|t| t.1 + 20)
            .sum::<usize>();
        urban = !urban;
    }

    let mut v = Vec::with_capacity(N);
    let mut cur = 0.0f64;
    let mut phase = 0.0f64;
    'outer: for &(target, hold) in &targets {
        loop {
            if v.len() == N {
                break 'outer;
            }
            v.push(cur);
            let gap = target - cur;
            if gap.abs() < 1e-9 {
                break;
            }
            cur += gap.clamp(-A_DOWN, A_UP);
        }
        for _ in 0..hold {
            if v.len() == N {
                break 'outer;
            }
            phase += rng.gen_range(0.05..0.15);
            let wobble = if target > 0.0 { 0.4 * phase.sin() } else { 0.0 };
            v.push((cur + wobble).max(0.0));
        }
    }
    while v.len() < N {
        v.push(cur);
    }
    // Taper both ends so the trace starts and ends at rest.
    for (k, x) in v.iter_mut().enumerate() {
        let edge = k.min(N - 1 - k) as f64;
        *x = (*x * (edge / RAMP).min(1.0)).min(27.0);
    }
    DrivingCycle {
        name: format!("mixed-rural-{seed}"),
        dt: 1.0,
        v,
        theta: None,
    }
}
