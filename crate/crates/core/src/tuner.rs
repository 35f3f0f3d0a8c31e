//! Charge-sustaining HPTS tuning: a threshold grid where each cell solves
//! for the engine-on offset that returns the battery to its initial SOC.

use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::LoadProfile;
use crate::error::{Error, Result};
use crate::powertrain::{FuelModel, VehicleParams};
use crate::rulebased::{simulate, Controller, HptsParams};
use crate::trajectory::Trajectory;

/// Bisection stops once |ΔSOC| falls below this or the bracket below 1 W.
const ROOT_TOL: f64 = 1e-7;
const BRACKET_TOL: f64 = 1.0;
const MAX_BISECT: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sweep {
    /// Root-find ΔP per threshold pair.
    Shoot,
    /// Evaluate every ΔP on a uniform ladder and keep charge-sustaining runs.
    Full { dp_step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSpec {
    /// (P̄, P̲) pairs in W, in tie-break order.
    pub pairs: Vec<(f64, f64)>,
    /// Search interval for ΔP, W.
    pub dp_bracket: (f64, f64),
    /// Largest accepted |ΔSOC|.
    pub cs_tol: f64,
    pub sweep: Sweep,
}

impl Default for TuneSpec {
    /// P̄ from 5 to 40 kW and P̲ from 0 to P̄, both on a 1.25 kW step.
    fn default() -> Self {
        Self::stepped(5e3, 40e3, 1.25e3)
    }
}

impl TuneSpec {
    fn with_pairs(pairs: Vec<(f64, f64)>) -> Self {
        Self {
            pairs,
            dp_bracket: (-10e3, 30e3),
            cs_tol: 1e-3,
            sweep: Sweep::Shoot,
        }
    }

    /// P̄ on `[hi_min, hi_max]` and P̲ on `[0, P̄]`, both spaced by `step`.
    pub fn stepped(hi_min: f64, hi_max: f64, step: f64) -> Self {
        let n_hi = ((hi_max - hi_min) / step).round() as usize + 1;
        let mut pairs = Vec::new();
        for i in 0..n_hi {
            let hi = hi_min + step * i as f64;
            let n_lo = (hi / step + 1e-9).floor() as usize + 1;
            pairs.extend((0..n_lo).map(|j| (hi, step * j as f64)));
        }
        Self::with_pairs(pairs)
    }

    /// `n` values of P̄ on [5, 40] kW times `n` values of P̲ on [0, 40] kW,
    /// keeping the pairs with P̲ ≤ P̄.
    pub fn square(n: usize) -> Self {
        let ladder = |lo: f64, hi: f64| -> Vec<f64> {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64)
                .collect()
        };
        let pairs = ladder(5e3, 40e3)
            .into_iter()
            .flat_map(|hi| {
                ladder(0.0, 40e3)
                    .into_iter()
                    .filter(move |&lo| lo <= hi)
                    .map(move |lo| (hi, lo))
            })
            .collect();
        Self::with_pairs(pairs)
    }

    pub fn single(p_high: f64, p_low: f64) -> Self {
        Self::with_pairs(vec![(p_high, p_low)])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.pairs.is_empty() {
            return bad("tuning grid is empty".into());
        }
        if let Some(&(hi, lo)) = self.pairs.iter().find(|(hi, lo)| !(0.0 <= *lo && lo <= hi)) {
            return bad(format!("grid pair P̄ = {hi} W, P̲ = {lo} W violates 0 <= P̲ <= P̄"));
        }
        if !(self.cs_tol > 0.0) {
            return bad(format!("CS tolerance {} must be positive", self.cs_tol));
        }
        if !(self.dp_bracket.0 < self.dp_bracket.1) {
            return bad("ΔP bracket must be increasing".into());
        }
        if let Sweep::Full { dp_step } = self.sweep {
            if !(dp_step > 0.0) {
                return bad(format!("ΔP step {dp_step} must be positive"));
            }
        }
        Ok(())
    }
}

/// A charge-sustaining offset and the run it produces.
#[derive(Debug, Clone)]
pub struct Shot {
    pub dp: f64,
    pub trajectory: Trajectory,
}

/// Solves ΔSOC(ΔP) = 0 for fixed thresholds. ΔSOC is non-increasing in ΔP;
/// a violation seen during bisection is reported as non-convergence.
#[allow(clippy::too_many_arguments)]
pub fn cs_shoot(
    profile: &LoadProfile,
    p_high: f64,
    p_low: f64,
    soc0: f64,
    bracket: (f64, f64),
    cs_tol: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Shot> {
    let run = |dp: f64| -> Result<Trajectory> {
        simulate(
            profile,
            &Controller::Hpts(HptsParams::new(p_high, p_low, dp)),
            soc0,
            params,
            fcm,
        )
    };
    let accept = |dp: f64, t: Trajectory| -> Result<Shot> {
        if t.dsoc().abs() <= cs_tol {
            Ok(Shot { dp, trajectory: t })
        } else {
            Err(Error::NotChargeSustaining {
                dsoc_lo: t.dsoc(),
                dsoc_hi: t.dsoc(),
            })
        }
    };

    // Smallest-magnitude root first: no offset at all.
    let t0 = run(0.0)?;
    if t0.dsoc().abs() <= ROOT_TOL {
        return Ok(Shot { dp: 0.0, trajectory: t0 });
    }
    let (mut a, mut b) = bracket;
    let (mut ta, mut tb) = (run(a)?, run(b)?);
    let (fa, fb) = (ta.dsoc(), tb.dsoc());
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::NotChargeSustaining {
            dsoc_lo: fa,
            dsoc_hi: fb,
        });
    }
    // Tighten with the ΔP = 0 run when it lies inside the bracket.
    if a < 0.0 && 0.0 < b {
        if t0.dsoc() > 0.0 {
            (a, ta) = (0.0, t0);
        } else {
            (b, tb) = (0.0, t0);
        }
    }
    for _ in 0..MAX_BISECT {
        if ta.dsoc().abs() <= ROOT_TOL {
            return accept(a, ta);
        }
        if tb.dsoc().abs() <= ROOT_TOL || b - a < BRACKET_TOL {
            break;
        }
        let m = 0.5 * (a + b);
        let tm = run(m)?;
        let fm = tm.dsoc();
        if fm > ta.dsoc() + 1e-12 || fm < tb.dsoc() - 1e-12 {
            return Err(Error::NoConvergence(format!(
                "ΔSOC not monotone in ΔP near {m:.1} W (thresholds {p_high:.1}/{p_low:.1} W)"
            )));
        }
        if fm > 0.0 {
            (a, ta) = (m, tm);
        } else {
            (b, tb) = (m, tm);
        }
    }
    if ta.dsoc().abs() < tb.dsoc().abs() {
        accept(a, ta)
    } else {
        accept(b, tb)
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub p_high: f64,
    pub p_low: f64,
    /// Offset used; `None` when shooting found no charge-sustaining value.
    pub dp: Option<f64>,
    pub fuel_g: Option<f64>,
    pub dsoc: Option<f64>,
    pub cs: bool,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: HptsParams,
    pub trajectory: Trajectory,
    pub surface: Vec<Cell>,
}

impl TuneResult {
    pub fn fuel(&self) -> f64 {
        self.trajectory.fuel()
    }
}

struct Eval {
    cell: Cell,
    traj: Option<Trajectory>,
}

fn eval_full(
    profile: &LoadProfile,
    pair: (f64, f64),
    dp: f64,
    spec: &TuneSpec,
    soc0: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Eval> {
    let hp = HptsParams::new(pair.0, pair.1, dp);
    let t = simulate(profile, &Controller::Hpts(hp), soc0, params, fcm)?;
    let cs = t.dsoc().abs() <= spec.cs_tol;
    Ok(Eval {
        cell: Cell {
            p_high: pair.0,
            p_low: pair.1,
            dp: Some(dp),
            fuel_g: Some(t.fuel() * 1e3),
            dsoc: Some(t.dsoc()),
            cs,
        },
        traj: cs.then_some(t),
    })
}

/// Minimum-fuel charge-sustaining HPTS over the grid. Ties go to the
/// smallest P̄, then the smallest P̲, independent of evaluation order.
pub fn tune(
    profile: &LoadProfile,
    spec: &TuneSpec,
    soc0: f64,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<TuneResult> {
    spec.validate()?;
    let mut pairs = spec.pairs.clone();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let evals: Vec<Eval> = match spec.sweep {
        Sweep::Shoot => pairs
            .par_iter()
            .map(|&(hi, lo)| {
                match cs_shoot(profile, hi, lo, soc0, spec.dp_bracket, spec.cs_tol, params, fcm) {
                    Ok(shot) => Ok(Eval {
                        cell: Cell {
                            p_high: hi,
                            p_low: lo,
                            dp: Some(shot.dp),
                            fuel_g: Some(shot.trajectory.fuel() * 1e3),
                            dsoc: Some(shot.trajectory.dsoc()),
                            cs: true,
                        },
                        traj: Some(shot.trajectory),
                    }),
                    Err(Error::NotChargeSustaining { .. } | Error::NoConvergence(_)) => Ok(Eval {
                        cell: Cell {
                            p_high: hi,
                            p_low: lo,
                            dp: None,
                            fuel_g: None,
                            dsoc: None,
                            cs: false,
                        },
                        traj: None,
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?,
        Sweep::Full { dp_step } => {
            let (a, b) = spec.dp_bracket;
            let n = ((b - a) / dp_step).floor() as usize + 1;
            let jobs: Vec<((f64, f64), f64)> = pairs
                .iter()
                .flat_map(|&pair| (0..n).map(move |i| (pair, a + dp_step * i as f64)))
                .collect();
            jobs.par_iter()
                .map(|&(pair, dp)| eval_full(profile, pair, dp, spec, soc0, params, fcm))
                .collect::<Result<_>>()?
        }
    };

    let mut best: Option<&Eval> = None;
    for e in &evals {
        if e.traj.is_none() {
            continue;
        }
        if best.is_none_or(|b| e.cell.fuel_g < b.cell.fuel_g) {
            best = Some(e);
        }
    }
    let best = best.ok_or(Error::AllInfeasible)?;
    let c = best.cell;
    Ok(TuneResult {
        best: HptsParams::new(c.p_high, c.p_low, c.dp.unwrap_or(0.0)),
        trajectory: best.traj.clone().expect("selected cells carry a run"),
        surface: evals.iter().map(|e| e.cell).collect(),
    })
}
