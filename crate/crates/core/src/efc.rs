//! Equivalent fuel consumption: fuel corrected for the net SOC change by
//! two equivalence factors identified from a power-sharing sweep.

use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::LoadProfile;
use crate::dp::{dp_solve, DpGrid, DpMode};
use crate::error::{Error, Result};
use crate::powertrain::{battery_current, step, FuelModel, PowertrainState, VehicleParams};
use crate::trajectory::Trajectory;

/// Values of u on each side of 1, including 1 itself.
pub const SWEEP_POINTS: usize = 21;
const DU_START: f64 = 0.3;
const DU_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceFactors {
    /// Applied when the battery ends discharged.
    pub s_d: f64,
    /// Applied when the battery ends charged.
    pub s_c: f64,
    /// Half-width of the u sweep that kept SOC inside its window.
    pub du: f64,
    pub r2_d: f64,
    pub r2_c: f64,
}

impl EquivalenceFactors {
    /// α_f·q_HV, the engine's marginal fuel energy per unit of shaft energy.
    pub fn engine_factor(p: &VehicleParams) -> f64 {
        p.alpha_f * p.q_hv
    }

    /// Bounds as stated for the factors: S_d above α_f·q_HV/η_dc² and S_c
    /// below η_dc²·α_f·q_HV.
    pub fn squared_bounds(p: &VehicleParams) -> (f64, f64) {
        let e = Self::engine_factor(p);
        (e / (p.eta_dc * p.eta_dc), p.eta_dc * p.eta_dc * e)
    }

    /// Bounds that follow from one DC/DC pass per direction: S_d above
    /// α_f·q_HV/η_dc and S_c below η_dc·α_f·q_HV.
    pub fn single_pass_bounds(p: &VehicleParams) -> (f64, f64) {
        let e = Self::engine_factor(p);
        (e / p.eta_dc, p.eta_dc * e)
    }
}

/// One point of the identification sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub u: f64,
    /// ∫ i_b·V_oc dt, J.
    pub e_e: f64,
    /// ∫ ṁ_f·q_HV dt without restart penalties, J.
    pub e_f: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

/// Runs the plant with P_PS = u·P_PL whenever the load is positive and the
/// engine off otherwise.
pub fn sweep_point(
    profile: &LoadProfile,
    u: f64,
    soc0: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<SweepPoint> {
    let p = params.with_k(0.0);
    let mut st = PowertrainState::new(soc0);
    let (mut e_e, mut lo, mut hi) = (0.0, soc0, soc0);
    for (k, &p_pl) in profile.p_pl.iter().enumerate() {
        let on = p_pl > 0.0;
        let (p_ps, p_ss) = if on {
            let p_ss = (p_pl - (u * p_pl).clamp(0.0, p.p_ps_max)).clamp(p.p_ss_min, p.p_ss_max);
            ((p_pl - p_ss).clamp(0.0, p.p_ps_max), p_ss)
        } else {
            (0.0, p_pl.max(p.p_ss_min))
        };
        e_e += battery_current(p_ss, &p).map_err(|e| e.at_step(k))? * p.v_oc * profile.dt;
        st = step(&st, p_ps, p_ss, on, profile.dt, fcm, &p).map_err(|e| e.at_step(k))?;
        lo = lo.min(st.soc);
        hi = hi.max(st.soc);
    }
    Ok(SweepPoint {
        u,
        e_e,
        e_f: st.m_f * p.q_hv,
        soc_min: lo,
        soc_max: hi,
    })
}

/// Least-squares slope and R² of y on x.
fn fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Sweep ladder of one side: `SWEEP_POINTS` values from 1 to `1 + sign·du`.
fn ladder(du: f64, sign: f64) -> Vec<f64> {
    (0..SWEEP_POINTS)
        .map(|i| 1.0 + sign * du * i as f64 / (SWEEP_POINTS - 1) as f64)
        .collect()
}

/// Identifies S_d from the charging side (u ≥ 1) and S_c from the
/// discharging side (u ≤ 1) as the negated slopes of E_f against E_e.
/// The sweep half-width starts at 0.3 and halves until neither side leaves
/// the SOC window.
pub fn identify_factors(
    profile: &LoadProfile,
    soc0: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<(EquivalenceFactors, Vec<SweepPoint>)> {
    if !profile.p_pl.iter().any(|&x| x > 0.0) {
        return Err(Error::DegenerateSweep(format!(
            "`{}` has no positive load to share",
            profile.name
        )));
    }
    let mut du = DU_START;
    loop {
        let us: Vec<f64> = ladder(du, 1.0)
            .into_iter()
            .chain(ladder(du, -1.0).into_iter().skip(1))
            .collect();
        let pts: Vec<SweepPoint> = us
            .par_iter()
            .map(|&u| sweep_point(profile, u, soc0, params, fcm))
            .collect::<Result<_>>()?;
        let inside = pts
            .iter()
            .all(|p| p.soc_min >= params.soc_min && p.soc_max <= params.soc_max);
        if inside {
            let side = |lo: usize, hi: usize| -> Vec<(f64, f64)> {
                let mut v: Vec<_> = pts[lo..hi].iter().map(|p| (p.e_e, p.e_f)).collect();
                if lo > 0 {
                    v.push((pts[0].e_e, pts[0].e_f));
                }
                v
            };
            let (slope_d, r2_d) = fit(&side(0, SWEEP_POINTS));
            let (slope_c, r2_c) = fit(&side(SWEEP_POINTS, pts.len()));
            if !(slope_d.is_finite() && slope_c.is_finite()) {
                return Err(Error::DegenerateSweep(
                    "electrical energy does not vary with u".into(),
                ));
            }
            let f = EquivalenceFactors {
                s_d: -slope_d,
                s_c: -slope_c,
                du,
                r2_d,
                r2_c,
            };
            return Ok((f, pts));
        }
        du *= 0.5;
        if du < DU_MIN {
            return Err(Error::DegenerateSweep(format!(
                "SOC window violated even at Δu = {du:.1e}"
            )));
        }
    }
}

/// m_f + S·ΔSOC·Q_max·V_oc/q_HV, with S = S_d for net discharge and S_c
/// otherwise; continuous at ΔSOC = 0. Takes ΔSOC = SOC(0) − SOC(T).
pub fn efc_from(m_f: f64, dsoc: f64, f: &EquivalenceFactors, p: &VehicleParams) -> f64 {
    let s = if dsoc >= 0.0 { f.s_d } else { f.s_c };
    m_f + s * dsoc * p.q_max * p.v_oc / p.q_hv
}

/// Equivalent fuel of a trajectory, kg.
pub fn efc_of(traj: &Trajectory, f: &EquivalenceFactors, p: &VehicleParams) -> f64 {
    efc_from(traj.fuel(), traj.dsoc(), f, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub soc_t: f64,
    /// SOC(0) − SOC(T) realised by the optimum.
    pub dsoc: f64,
    pub fuel_g: f64,
    pub efc_g: f64,
}

/// DP optimum and its equivalent fuel for each terminal target
/// `soc0 + offset`. Targets outside the SOC window are skipped.
#[allow(clippy::too_many_arguments)]
pub fn cs_necessity_scan(
    profile: &LoadProfile,
    soc0: f64,
    offsets: &[f64],
    factors: &EquivalenceFactors,
    grid: DpGrid,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Vec<ScanRow>> {
    let mode = DpMode::Penalized { k: params.k };
    let mut rows = Vec::with_capacity(offsets.len());
    for &d in offsets {
        let soc_t = soc0 + d;
        if !(params.soc_min..=params.soc_max).contains(&soc_t) {
            continue;
        }
        let t = match dp_solve(profile, soc0, soc_t, mode, grid, params, fcm) {
            Ok(t) => t,
            Err(e) if matches!(e.root(), Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        rows.push(ScanRow {
            soc_t,
            dsoc: t.dsoc(),
            fuel_g: t.fuel() * 1e3,
            efc_g: efc_of(&t, factors, params) * 1e3,
        });
    }
    Ok(rows)
}

/// Symmetric ladder `−n·step ..= n·step`.
pub fn symmetric_offsets(step: f64, n: usize) -> Vec<f64> {
    let n = n as i64;
    (-n..=n).map(|i| i as f64 * step).collect()
}

/// Row with the least equivalent fuel; the first one on ties.
pub fn scan_argmin(rows: &[ScanRow]) -> Option<&ScanRow> {
    rows.iter()
        .fold(None, |best: Option<&ScanRow>, r| match best {
            Some(b) if b.efc_g <= r.efc_g => Some(b),
            _ => Some(r),
        })
}
