//! Forward simulation of rule-based controllers: the hysteresis power
//! threshold strategy (HPTS), the exclusive operation baseline (XOS) and a
//! pointwise ECMS used to show its degeneracy under an affine fuel map.

use serde::{Deserialize, Serialize};

use crate::analytic_pmp::engine_on_box;
use crate::cycles::LoadProfile;
use crate::error::{Error, Result};
use crate::powertrain::{p_ss_for_soc_rate, soc_rate, FuelModel, VehicleParams};
use crate::trajectory::{Control, Recorder, Trajectory};

/// HPTS tuning knobs, all in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HptsParams {
    /// Engine switches on above this load.
    pub p_high: f64,
    /// Engine switches off at or below this load.
    pub p_low: f64,
    /// Extra engine power beyond the load while on; charges the battery.
    pub dp: f64,
}

impl HptsParams {
    pub fn new(p_high: f64, p_low: f64, dp: f64) -> Self {
        Self { p_high, p_low, dp }
    }

    /// The single-threshold XOS law expressed as an HPTS.
    pub fn xos(threshold: f64) -> Self {
        Self::new(threshold, threshold, 0.0)
    }

    pub fn validate(&self, p: &VehicleParams) -> Result<()> {
        let ok = self.p_low >= 0.0
            && self.p_low <= self.p_high
            && self.p_high <= p.p_ps_max
            && self.dp.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "HPTS thresholds need 0 <= low ({:.1} W) <= high ({:.1} W) <= {:.1} W",
                self.p_low, self.p_high, p.p_ps_max
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Hpts(HptsParams),
    /// Engine alone carries any load above the threshold.
    Xos { threshold: f64 },
    /// Pointwise minimiser of ṁ_f + S·P_SS/q_HV with S = `s_d` while
    /// discharging and `s_c` while charging.
    Ecms { s_d: f64, s_c: f64 },
}

impl Controller {
    pub fn label(&self) -> String {
        match self {
            Controller::Hpts(h) => format!(
                "HPTS({:.2},{:.2},{:.2} kW)",
                h.p_high / 1e3,
                h.p_low / 1e3,
                h.dp / 1e3
            ),
            Controller::Xos { threshold } => format!("XOS({:.2} kW)", threshold / 1e3),
            Controller::Ecms { s_d, s_c } => format!("ECMS({s_d:.4},{s_c:.4})"),
        }
    }
}

/// Engine-on control that sends `p_ss` through the battery and leaves the
/// rest of the load to the engine; any excess over the engine rating is
/// reported as a deficit.
fn engine_on(p_pl: f64, p_ss: f64, p: &VehicleParams) -> Control {
    let demand = p_pl - p_ss;
    let deficit = (demand - p.p_ps_max).max(0.0);
    Control {
        p_ps: demand.clamp(0.0, p.p_ps_max),
        p_ss,
        engine_on: true,
        emergency: deficit > 0.0,
        deficit,
    }
}

fn electric(p_pl: f64) -> Control {
    Control {
        p_ss: p_pl,
        ..Control::default()
    }
}

/// SOC-limit override, if `soc` is at or beyond a limit.
fn emergency(p_pl: f64, soc: f64, p: &VehicleParams) -> Option<Control> {
    if soc >= p.soc_max {
        if p_pl < 0.0 {
            // Battery full while braking: friction brakes absorb the surplus.
            return Some(Control {
                emergency: true,
                deficit: p_pl,
                ..Control::default()
            });
        }
        let p_ss = p.p_ss_max.min(p_pl);
        return Some(if p_pl - p_ss > 0.0 {
            engine_on(p_pl, p_ss, p)
        } else {
            electric(p_pl)
        });
    }
    if soc <= p.soc_min {
        let p_ss = (p_pl - p.p_ps_max).max(p.p_ss_min);
        return Some(if p_pl - p_ss > 0.0 {
            engine_on(p_pl, p_ss, p)
        } else {
            electric(p_pl)
        });
    }
    None
}

/// One HPTS decision. Inside the SOC window the engine follows the
/// hysteresis band and, while on, runs at `P_PL + ΔP` clipped to the boxes.
pub fn hpts_step(p_pl: f64, soc: f64, s_prev: bool, hp: &HptsParams, p: &VehicleParams) -> Control {
    if let Some(c) = emergency(p_pl, soc, p) {
        return c;
    }
    let mut s = if p_pl <= hp.p_low {
        false
    } else if p_pl > hp.p_high {
        true
    } else {
        s_prev
    };
    // The battery alone cannot carry this load.
    if !s && !(p.p_ss_min..=p.p_ss_max).contains(&p_pl) {
        s = p_pl > 0.0;
    }
    if !s {
        // Regeneration beyond the battery limit is left to the brakes.
        let p_ss = p_pl.max(p.p_ss_min);
        return Control {
            p_ss,
            emergency: p_ss != p_pl,
            deficit: p_pl - p_ss,
            ..Control::default()
        };
    }
    let (lo, hi) = engine_on_box(p_pl, p);
    engine_on(p_pl, (-hp.dp).clamp(lo, hi), p)
}

const ECMS_GRID: usize = 101;

/// Engine-on P_SS interval for ECMS: the power box intersected with the
/// controls whose next SOC stays inside the window. `None` when empty.
pub fn ecms_box(p_pl: f64, soc: f64, dt: f64, p: &VehicleParams) -> Option<(f64, f64)> {
    let (lo, hi) = engine_on_box(p_pl, p);
    // Discharge is capped where the SOC would hit its floor; current is
    // bounded by the open-circuit limit V/(2R) so the inversion stays valid.
    let i_max = p.v_oc / (2.0 * p.r_b);
    let floor = (p.soc_min - soc).max(-i_max * dt / p.q_max);
    let to_p = |dsoc: f64| p_ss_for_soc_rate(dsoc / dt, p).expect("current bounded above");
    let lo = lo.max(to_p(p.soc_max - soc));
    let hi = hi.min(to_p(floor));
    (lo <= hi).then_some((lo, hi))
}

/// Pointwise ECMS decision restricted to controls whose next SOC stays in
/// the window; falls back to the SOC-limit override when none does.
pub fn ecms_step(
    p_pl: f64,
    soc: f64,
    dt: f64,
    s_d: f64,
    s_c: f64,
    p: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Control> {
    let mut options = Vec::with_capacity(ECMS_GRID + 3);
    if (p.p_ss_min..=p.p_ss_max).contains(&p_pl) {
        let next = soc + soc_rate(p_pl, p)? * dt;
        if (p.soc_min..=p.soc_max).contains(&next) {
            options.push(electric(p_pl));
        }
    }
    if let Some((lo, hi)) = ecms_box(p_pl, soc, dt, p) {
        let mut grid: Vec<f64> = (0..ECMS_GRID)
            .map(|j| lo + (hi - lo) * j as f64 / (ECMS_GRID - 1) as f64)
            .collect();
        grid.extend([hi, 0.0, p_pl].into_iter().filter(|x| (lo..=hi).contains(x)));
        options.extend(grid.into_iter().map(|p_ss| engine_on(p_pl, p_ss, p)));
    }

    let mut best: Option<(f64, Control)> = None;
    for c in options {
        let fuel = if c.engine_on {
            fcm.running_rate(c.p_ps, p)
        } else {
            0.0
        };
        let s = if c.p_ss >= 0.0 { s_d } else { s_c };
        let cost = fuel + s * c.p_ss / p.q_hv;
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, c));
        }
    }
    match best {
        Some((_, c)) => Ok(c),
        None => Ok(emergency(p_pl, soc, p).unwrap_or_else(|| {
            // No step keeps SOC inside the window: hold it as well as possible.
            if p_pl > 0.0 {
                engine_on(p_pl, 0.0, p)
            } else {
                electric(p_pl.max(p.p_ss_min))
            }
        })),
    }
}

/// Runs `controller` over the whole profile from `soc0` with the engine off.
pub fn simulate(
    profile: &LoadProfile,
    controller: &Controller,
    soc0: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Trajectory> {
    let hp = match controller {
        Controller::Hpts(h) => Some(*h),
        Controller::Xos { threshold } => Some(HptsParams::xos(*threshold)),
        Controller::Ecms { .. } => None,
    };
    let mut rec = Recorder::new(soc0, profile.dt, params, fcm);
    for (k, &p_pl) in profile.p_pl.iter().enumerate() {
        let st = *rec.state();
        let c = match (controller, &hp) {
            (Controller::Ecms { s_d, s_c }, _) => {
                ecms_step(p_pl, st.soc, profile.dt, *s_d, *s_c, params, fcm)
                    .map_err(|e| e.at_step(k))?
            }
            (_, Some(h)) => hpts_step(p_pl, st.soc, st.engine_on, h, params),
            (_, None) => unreachable!("threshold controllers always carry parameters"),
        };
        rec.push(p_pl, c, None)?;
    }
    Ok(rec.finish())
}

/// Lowest XOS threshold, among 0 and the distinct positive loads of the
/// profile, whose run ends closest to charge sustaining.
pub fn xos_cs_threshold(
    profile: &LoadProfile,
    soc0: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<(f64, Trajectory)> {
    use rayon::prelude::*;

    let mut levels: Vec<f64> = profile
        .p_pl
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x <= params.p_ps_max)
        .collect();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let runs: Vec<(f64, Trajectory)> = levels
        .par_iter()
        .map(|&th| {
            simulate(profile, &Controller::Xos { threshold: th }, soc0, params, fcm)
                .map(|t| (th, t))
        })
        .collect::<Result<_>>()?;
    let mut best = None::<(f64, Trajectory)>;
    for (th, t) in runs {
        if best
            .as_ref()
            .is_none_or(|(_, b)| t.dsoc().abs() < b.dsoc().abs())
        {
            best = Some((th, t));
        }
    }
    best.ok_or(Error::AllInfeasible)
}
