//! Closed-form minimum-principle power split for the linear fuel model.
//!
//! The costate λ (kg per unit SOC) is constant on arcs where the SOC bounds
//! are inactive, so an arc is solved by a scalar search on λ. State bounds
//! are handled by splitting the horizon where the bound is violated most.

use std::fmt;

use crate::cycles::LoadProfile;
use crate::error::{Error, Result};
use crate::powertrain::{soc_rate, FuelModel, VehicleParams};
use crate::trajectory::{Control, Recorder, Trajectory};

/// SOC tolerance for hitting a terminal target.
pub const TOL_SOC: f64 = 1e-4;
const MAX_BISECTIONS: usize = 200;
const MAX_EXPANSIONS: usize = 60;
pub const MAX_DEPTH: usize = 32;
/// SOC excursion beyond a bound that triggers a split.
const VIOLATION_TOL: f64 = 1e-9;

/// Engine model the closed-form law is derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SssModel {
    /// Engine always on.
    Off,
    /// Engine may stop, restarts are free.
    Lossless,
}

impl fmt::Display for SssModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SssModel::Off => "off",
            SssModel::Lossless => "lossless",
        })
    }
}

/// Costate boundaries separating the four regimes of the power-split law.
pub fn regime_bounds(p: &VehicleParams) -> (f64, f64) {
    let base = p.alpha_f * p.q_max * p.v_oc;
    (-base * p.eta_dc, -base / p.eta_dc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// λ ≥ 0: battery use is free, discharge as much as allowed.
    R1,
    /// B1 < λ < 0: interior discharge optimum.
    R2,
    /// B2 ≤ λ ≤ B1: battery idle during propulsion.
    R3,
    /// λ < B2: interior charge optimum.
    R4,
}

/// The unconstrained minimiser of the engine-on Hamiltonian for a given λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLaw {
    pub lambda: f64,
    pub regime: Regime,
    pub b1: f64,
    pub b2: f64,
    /// Discharge-side stationary point, W.
    pub p_plus: f64,
    /// Charge-side stationary point, W.
    pub p_minus: f64,
}

impl RegimeLaw {
    pub fn new(lambda: f64, p: &VehicleParams) -> Self {
        let (b1, b2) = regime_bounds(p);
        let aq = p.alpha_f * p.q_max;
        let l2 = lambda * lambda;
        let p_plus = (p.eta_dc * p.v_oc * p.v_oc - l2 / (aq * aq * p.eta_dc)) / (4.0 * p.r_b);
        let p_minus = (p.v_oc * p.v_oc / p.eta_dc - l2 * p.eta_dc / (aq * aq)) / (4.0 * p.r_b);
        let regime = if lambda >= 0.0 {
            Regime::R1
        } else if lambda > b1 {
            Regime::R2
        } else if lambda >= b2 {
            Regime::R3
        } else {
            Regime::R4
        };
        Self {
            lambda,
            regime,
            b1,
            b2,
            p_plus,
            p_minus,
        }
    }

    /// Unconstrained optimal P_SS, W (infinite in R1).
    pub fn optimum(&self) -> f64 {
        match self.regime {
            Regime::R1 => f64::INFINITY,
            Regime::R2 => self.p_plus,
            Regime::R3 => 0.0,
            Regime::R4 => self.p_minus,
        }
    }
}

/// Feasible P_SS box with the engine on for load `p_pl`.
pub fn engine_on_box(p_pl: f64, p: &VehicleParams) -> (f64, f64) {
    let lo = (p_pl - p.p_ps_max).max(p.p_ss_min);
    let hi = p.p_ss_max.min(p_pl);
    (lo.min(hi), hi)
}

/// Optimal P_SS with the engine on.
pub fn regime_control(lambda: f64, p_pl: f64, p: &VehicleParams) -> f64 {
    let (lo, hi) = engine_on_box(p_pl, p);
    RegimeLaw::new(lambda, p).optimum().clamp(lo, hi)
}

/// Hamiltonian ṁ_f + λ·dSOC/dt for the linear fuel model, kg/s.
pub fn hamiltonian(lambda: f64, p_pl: f64, p_ss: f64, engine_on: bool, p: &VehicleParams) -> Result<f64> {
    let fuel = if engine_on {
        p.q_f0 + p.alpha_f * (p_pl - p_ss)
    } else {
        0.0
    };
    Ok(fuel + lambda * soc_rate(p_ss, p)?)
}

/// Load interval on which stopping the engine is optimal for a given λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectricRegion {
    /// Lowest electric load, W (inclusive).
    pub lo: f64,
    /// Highest electric load, W.
    pub hi: f64,
    /// Whether `hi` itself is electric (false at an engine-on tie).
    pub hi_inclusive: bool,
    /// Roots of the engine-on/engine-off Hamiltonian gap around the
    /// unconstrained optimum, when they exist.
    pub roots: Option<(f64, f64)>,
}

impl ElectricRegion {
    pub fn contains(&self, p_pl: f64) -> bool {
        p_pl >= self.lo && (p_pl < self.hi || (self.hi_inclusive && p_pl == self.hi))
    }

    /// Width of the non-negative part of the region, W.
    pub fn propulsion_width(&self) -> f64 {
        (self.hi - self.lo.max(0.0)).max(0.0)
    }
}

/// Electric-mode region of the lossless start-stop law.
pub fn sss_thresholds(lambda: f64, p: &VehicleParams) -> ElectricRegion {
    if lambda >= 0.0 {
        return ElectricRegion {
            lo: p.p_ss_min,
            hi: p.p_ss_max,
            hi_inclusive: true,
            roots: None,
        };
    }
    let law = RegimeLaw::new(lambda, p);
    let u_star = law.optimum();
    // g(u) = −α·u + λ·r(u) is convex with its minimum at u*.
    let g = |u: f64| -p.alpha_f * u + lambda * soc_rate(u, p).unwrap_or(f64::NAN);
    let p_top = p.battery_power_limit() * p.eta_dc * (1.0 - 1e-12);
    let target_at = |u: f64| g(u) + p.q_f0;

    let upper_root = |anchor: f64| -> f64 {
        let target = target_at(anchor);
        if g(p_top) <= target {
            return f64::INFINITY;
        }
        bisect_increasing(&g, target, anchor, p_top)
    };
    let lower_root = || -> Option<f64> {
        let target = target_at(u_star);
        let mut step = 1e3;
        let mut a = u_star - step;
        for _ in 0..MAX_EXPANSIONS {
            if g(a) > target {
                return Some(bisect_decreasing(&g, target, a, u_star));
            }
            step *= 2.0;
            a = u_star - step;
        }
        None
    };

    let roots = Some((lower_root().unwrap_or(f64::NEG_INFINITY), upper_root(u_star)));
    let anchor = u_star.max(p.p_ss_min);
    let p_up = upper_root(anchor);
    let (hi, hi_inclusive) = if p_up > p.p_ss_max {
        (p.p_ss_max, true)
    } else {
        (p_up, false)
    };
    ElectricRegion {
        lo: p.p_ss_min,
        hi,
        hi_inclusive,
        roots,
    }
}

fn bisect_increasing(f: &impl Fn(f64) -> f64, target: f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

fn bisect_decreasing(f: &impl Fn(f64) -> f64, target: f64, mut a: f64, mut b: f64) -> f64 {
    // f(a) > target >= f(b), f decreasing on [a, b]
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) > target {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Optimal control for one step given λ and the engine model.
pub fn pmp_control(lambda: f64, p_pl: f64, model: SssModel, p: &VehicleParams) -> Control {
    if model == SssModel::Lossless && sss_thresholds(lambda, p).contains(p_pl) {
        return Control {
            p_ps: 0.0,
            p_ss: p_pl,
            engine_on: false,
            ..Control::default()
        };
    }
    engine_on_control(lambda, p_pl, p)
}

fn engine_on_control(lambda: f64, p_pl: f64, p: &VehicleParams) -> Control {
    let p_ss = regime_control(lambda, p_pl, p);
    let p_ps = p_pl - p_ss;
    let deficit = (p_ps - p.p_ps_max).max(0.0);
    Control {
        p_ps: p_ps.min(p.p_ps_max),
        p_ss,
        engine_on: true,
        emergency: deficit > 0.0,
        deficit,
    }
}

/// One constant-costate arc of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostateArc {
    /// First step of the arc.
    pub k0: usize,
    /// One past the last step.
    pub k1: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    /// Step boundary where the SOC is pinned.
    pub k: usize,
    pub t: f64,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostateSolution {
    pub model: SssModel,
    pub arcs: Vec<CostateArc>,
    pub junctions: Vec<Junction>,
    pub trajectory: Trajectory,
}

impl CostateSolution {
    /// λ of the first arc.
    pub fn lambda(&self) -> f64 {
        self.arcs[0].lambda
    }

    pub fn fuel(&self) -> f64 {
        self.trajectory.fuel()
    }
}

/// Terminal SOC window an arc must land in.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    lo: f64,
    hi: f64,
    target: f64,
}

impl Window {
    fn around(target: f64) -> Self {
        Self {
            lo: target - TOL_SOC,
            hi: target + TOL_SOC,
            target,
        }
    }

    fn pinned(bound: Bound, p: &VehicleParams) -> Self {
        match bound {
            Bound::Upper => Self {
                lo: p.soc_max - TOL_SOC,
                hi: p.soc_max,
                target: p.soc_max,
            },
            Bound::Lower => Self {
                lo: p.soc_min,
                hi: p.soc_min + TOL_SOC,
                target: p.soc_min,
            },
        }
    }

    fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

/// Per-step plan for one arc: λ plus the engine decision at each step.
#[derive(Debug, Clone)]
struct ArcPlan {
    lambda: f64,
    controls: Vec<Control>,
    soc: Vec<f64>,
}

impl ArcPlan {
    fn soc_end(&self) -> f64 {
        *self.soc.last().expect("soc series is never empty")
    }
}

struct ArcProblem<'a> {
    loads: &'a [f64],
    dt: f64,
    soc0: f64,
    model: SssModel,
    p: &'a VehicleParams,
}

impl ArcProblem<'_> {
    fn simulate(&self, controls: Vec<Control>, lambda: f64) -> Result<ArcPlan> {
        let mut soc = Vec::with_capacity(controls.len() + 1);
        let mut x = self.soc0;
        soc.push(x);
        for (k, c) in controls.iter().enumerate() {
            x += soc_rate(c.p_ss, self.p).map_err(|e| e.at_step(k))? * self.dt;
            soc.push(x);
        }
        Ok(ArcPlan {
            lambda,
            controls,
            soc,
        })
    }

    fn plan(&self, lambda: f64) -> Result<ArcPlan> {
        let controls = self
            .loads
            .iter()
            .map(|&pl| pmp_control(lambda, pl, self.model, self.p))
            .collect();
        self.simulate(controls, lambda)
    }

    fn shoot(&self, w: Window) -> Result<ArcPlan> {
        let (b1, b2) = regime_bounds(self.p);
        let mut checker = Monotone::default();
        let mut eval = |lambda: f64| -> Result<ArcPlan> {
            let plan = self.plan(lambda)?;
            checker.record(lambda, plan.soc_end())?;
            Ok(plan)
        };

        let mid = 0.5 * (b1 + b2);
        let first = eval(mid)?;
        if w.contains(first.soc_end()) {
            return Ok(first);
        }
        // (λ with SOC_T above the window, λ with SOC_T below it)
        let (mut a, mut b, mut plan_a, mut plan_b);
        if first.soc_end() > w.hi {
            let top = eval(0.0)?;
            if top.soc_end() > w.hi {
                return Err(Error::TargetUnreachable {
                    target: w.target,
                    lo: top.soc_end(),
                    hi: first.soc_end().max(top.soc_end()),
                });
            }
            if w.contains(top.soc_end()) {
                return Ok(top);
            }
            (a, b, plan_a, plan_b) = (mid, 0.0, first, top);
        } else {
            let mut prev = (mid, first);
            let mut step = 0.05 * b2.abs();
            let mut found = None;
            for _ in 0..MAX_EXPANSIONS {
                let lam = b2 - step;
                let plan = eval(lam)?;
                if w.contains(plan.soc_end()) {
                    return Ok(plan);
                }
                if plan.soc_end() > w.hi {
                    found = Some((lam, plan));
                    break;
                }
                prev = (lam, plan);
                step *= 2.0;
            }
            let Some((lam, plan)) = found else {
                return Err(Error::TargetUnreachable {
                    target: w.target,
                    lo: prev.1.soc_end(),
                    hi: prev.1.soc_end(),
                });
            };
            (a, b, plan_a, plan_b) = (lam, prev.0, plan, prev.1);
        }

        for _ in 0..MAX_BISECTIONS {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                return self.resolve_tie(w, plan_a, plan_b, m);
            }
            let plan = eval(m)?;
            if w.contains(plan.soc_end()) {
                return Ok(plan);
            }
            if plan.soc_end() > w.hi {
                (a, plan_a) = (m, plan);
            } else {
                (b, plan_b) = (m, plan);
            }
        }
        Err(Error::NoConvergence(format!(
            "costate bracket [{a:.9}, {b:.9}] after {MAX_BISECTIONS} bisections, \
             SOC(T) in [{:.6}, {:.6}], target {:.6}",
            plan_b.soc_end(),
            plan_a.soc_end(),
            w.target
        )))
    }

    /// The terminal SOC jumps across the window at a single λ. With a free
    /// engine stop, steps whose load sits exactly on the electric-region edge
    /// are indifferent; running a prefix of them electric interpolates the
    /// jump. Without start-stop the law is continuous, so a jump is an error.
    fn resolve_tie(&self, w: Window, charge: ArcPlan, discharge: ArcPlan, lambda: f64) -> Result<ArcPlan> {
        let fail = || {
            Error::NoConvergence(format!(
                "SOC(T) jumps from {:.6} to {:.6} at λ = {lambda:.12}, target window [{:.6}, {:.6}]",
                charge.soc_end(),
                discharge.soc_end(),
                w.lo,
                w.hi
            ))
        };
        if self.model != SssModel::Lossless {
            return Err(fail());
        }
        let flips: Vec<usize> = (0..self.loads.len())
            .filter(|&k| charge.controls[k].engine_on && !discharge.controls[k].engine_on)
            .collect();
        let others_match = (0..self.loads.len()).all(|k| {
            flips.contains(&k) || charge.controls[k].engine_on == discharge.controls[k].engine_on
        });
        if flips.is_empty() || !others_match {
            return Err(fail());
        }
        let mixed = |j: usize| -> Result<ArcPlan> {
            let mut controls = charge.controls.clone();
            for &k in &flips[..j] {
                controls[k] = discharge.controls[k];
            }
            self.simulate(controls, lambda)
        };
        // SOC(T) decreases with every extra electric step.
        let (mut lo, mut hi) = (0usize, flips.len());
        while hi - lo > 1 {
            let m = (lo + hi) / 2;
            let plan = mixed(m)?;
            if w.contains(plan.soc_end()) {
                return Ok(plan);
            }
            if plan.soc_end() > w.hi {
                lo = m;
            } else {
                hi = m;
            }
        }
        for j in [lo, hi] {
            let plan = mixed(j)?;
            if w.contains(plan.soc_end()) {
                return Ok(plan);
            }
        }
        // A single step carries more SOC than the window is wide: run it with
        // the engine on and the battery share set to land on the target.
        let base = mixed(lo)?;
        let k = flips[lo];
        let blended = |p_ss: f64| -> Result<ArcPlan> {
            let mut controls = base.controls.clone();
            controls[k] = Control {
                p_ps: self.loads[k] - p_ss,
                p_ss,
                engine_on: true,
                ..Control::default()
            };
            self.simulate(controls, lambda)
        };
        let (mut a, mut b) = (base.controls[k].p_ss, self.loads[k]);
        for _ in 0..MAX_BISECTIONS {
            let m = 0.5 * (a + b);
            if m <= a.min(b) || m >= a.max(b) {
                break;
            }
            let plan = blended(m)?;
            if w.contains(plan.soc_end()) {
                return Ok(plan);
            }
            if plan.soc_end() > w.hi {
                a = m;
            } else {
                b = m;
            }
        }
        Err(fail())
    }
}

/// Run-time check that SOC(T) is non-increasing in λ.
#[derive(Default)]
struct Monotone {
    seen: Vec<(f64, f64)>,
}

impl Monotone {
    fn record(&mut self, lambda: f64, soc_t: f64) -> Result<()> {
        for &(l, s) in &self.seen {
            let bad = (l < lambda && s < soc_t - 1e-12) || (l > lambda && s > soc_t + 1e-12);
            if bad {
                return Err(Error::NoConvergence(format!(
                    "SOC(T) not monotone in λ: SOC(T; {l:.9}) = {s:.9}, SOC(T; {lambda:.9}) = {soc_t:.9}"
                )));
            }
        }
        self.seen.push((lambda, soc_t));
        Ok(())
    }
}

/// Single-arc costate search ignoring the SOC bounds along the way.
pub fn shoot_costate(
    profile: &LoadProfile,
    soc0: f64,
    soc_t: f64,
    model: SssModel,
    p: &VehicleParams,
) -> Result<CostateSolution> {
    let arc = ArcProblem {
        loads: &profile.p_pl,
        dt: profile.dt,
        soc0,
        model,
        p,
    };
    let plan = arc.shoot(Window::around(soc_t))?;
    assemble(profile, soc0, model, p, vec![(0, plan)], Vec::new())
}

/// Costate solution honouring the SOC bounds by recursive arc splitting.
pub fn solve_constrained(
    profile: &LoadProfile,
    soc0: f64,
    soc_t: f64,
    model: SssModel,
    p: &VehicleParams,
) -> Result<CostateSolution> {
    let mut plans = Vec::new();
    let mut junctions = Vec::new();
    split(
        profile,
        (0, profile.len()),
        soc0,
        Window::around(soc_t),
        model,
        p,
        0,
        &mut plans,
        &mut junctions,
    )?;
    assemble(profile, soc0, model, p, plans, junctions)
}

#[allow(clippy::too_many_arguments)]
fn split(
    profile: &LoadProfile,
    (k0, k1): (usize, usize),
    soc_start: f64,
    w: Window,
    model: SssModel,
    p: &VehicleParams,
    depth: usize,
    plans: &mut Vec<(usize, ArcPlan)>,
    junctions: &mut Vec<Junction>,
) -> Result<f64> {
    if depth > MAX_DEPTH {
        return Err(Error::RecursionLimit(MAX_DEPTH));
    }
    let arc = ArcProblem {
        loads: &profile.p_pl[k0..k1],
        dt: profile.dt,
        soc0: soc_start,
        model,
        p,
    };
    let plan = arc.shoot(w)?;

    let mut worst: Option<(usize, f64, Bound)> = None;
    for (j, &x) in plan.soc.iter().enumerate().take(plan.soc.len() - 1).skip(1) {
        let (excess, bound) = if x > p.soc_max {
            (x - p.soc_max, Bound::Upper)
        } else if x < p.soc_min {
            (p.soc_min - x, Bound::Lower)
        } else {
            continue;
        };
        if excess > VIOLATION_TOL && worst.is_none_or(|(_, e, _)| excess > e) {
            worst = Some((j, excess, bound));
        }
    }
    let Some((j, _, bound)) = worst else {
        let end = plan.soc_end();
        plans.push((k0, plan));
        return Ok(end);
    };
    let kp = k0 + j;
    let mid = split(
        profile,
        (k0, kp),
        soc_start,
        Window::pinned(bound, p),
        model,
        p,
        depth + 1,
        plans,
        junctions,
    )?;
    junctions.push(Junction {
        k: kp,
        t: kp as f64 * profile.dt,
        bound,
    });
    split(profile, (kp, k1), mid, w, model, p, depth + 1, plans, junctions)
}

fn assemble(
    profile: &LoadProfile,
    soc0: f64,
    model: SssModel,
    p: &VehicleParams,
    mut plans: Vec<(usize, ArcPlan)>,
    mut junctions: Vec<Junction>,
) -> Result<CostateSolution> {
    plans.sort_by_key(|(k0, _)| *k0);
    junctions.sort_by_key(|j| j.k);
    // Neither model carries a restart penalty.
    let lossless = p.with_k(0.0);
    let fcm = FuelModel::Linear;
    let mut rec = Recorder::new(soc0, profile.dt, &lossless, &fcm);
    let mut arcs = Vec::with_capacity(plans.len());
    for (k0, plan) in &plans {
        let k1 = k0 + plan.controls.len();
        for (c, &pl) in plan.controls.iter().zip(&profile.p_pl[*k0..k1]) {
            rec.push(pl, *c, Some(plan.lambda))?;
        }
        arcs.push(CostateArc {
            k0: *k0,
            k1,
            t_start: *k0 as f64 * profile.dt,
            t_end: k1 as f64 * profile.dt,
            lambda: plan.lambda,
        });
    }
    Ok(CostateSolution {
        model,
        arcs,
        junctions,
        trajectory: rec.finish(),
    })
}
