//! Backward dynamic programming over (SOC, previous engine state).
//!
//! The value function `V[k][s_prev][i]` is the least fuel from step `k` at SOC
//! node `i` given the engine state before step `k`. Restart penalties are
//! charged on the step where the engine goes from off to on.
//!
//! Between nodes the value is interpolated linearly. Two devices keep that
//! interpolation from biasing the policy: each step's lattice is shifted by
//! the engine-off SOC change so those transitions land on nodes, and cells
//! cut by the edge of the reachable set use the exact cost along that edge
//! instead of an infeasible neighbour.

use std::fmt;

use rayon::prelude::*;

use crate::analytic_pmp::engine_on_box;
use crate::cycles::LoadProfile;
use crate::error::{Error, Result};
use crate::powertrain::{p_ss_for_soc_rate, soc_rate, FuelModel, VehicleParams};
use crate::trajectory::{Control, Recorder, Trajectory};

/// Start-stop treatment in the benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DpMode {
    /// Engine always on.
    Off,
    /// Engine may stop, restarts are free.
    Lossless,
    /// Engine may stop, each restart costs `k·q_f0` of fuel.
    Penalized { k: f64 },
}

impl DpMode {
    pub fn penalty(&self, p: &VehicleParams) -> f64 {
        match *self {
            DpMode::Off | DpMode::Lossless => 0.0,
            DpMode::Penalized { k } => k * p.q_f0,
        }
    }

    fn k(&self) -> f64 {
        match *self {
            DpMode::Off | DpMode::Lossless => 0.0,
            DpMode::Penalized { k } => k,
        }
    }

    fn allows_stop(&self) -> bool {
        !matches!(self, DpMode::Off)
    }
}

impl fmt::Display for DpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DpMode::Off => f.write_str("off"),
            DpMode::Lossless => f.write_str("lossless"),
            DpMode::Penalized { k } => write!(f, "penalized(K={k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// Linear in SOC inside the reachable set.
    Linear,
    /// Value of the nearest node.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpGrid {
    pub n_soc: usize,
    pub n_u: usize,
    /// Half-width of the terminal SOC band; half a cell when `None`.
    pub band: Option<f64>,
    pub interp: Interp,
    /// Also offer the engine-on controls that move SOC by a whole number of
    /// cells, so engine-on transitions between nodes need no interpolation.
    pub align: bool,
}

impl Default for DpGrid {
    fn default() -> Self {
        Self {
            n_soc: 601,
            n_u: 301,
            band: None,
            interp: Interp::Linear,
            align: true,
        }
    }
}

/// Uniform SOC nodes `min + offset + i·h`, `h = (max − min)/(n − 1)`.
/// With a non-zero offset the last node lies above `max` and is infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    /// Shift of the lattice, in `[0, h)`.
    pub offset: f64,
}

impl SocGrid {
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n - 1 && self.offset == 0.0 {
            self.max
        } else {
            self.min + self.offset + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn nearest_index(&self, x: f64) -> usize {
        let r = ((x - self.min - self.offset) / self.step()).round();
        r.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// One admissible control at a step, with its precomputed effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub control: Control,
    /// Fuel burnt over the step excluding any restart penalty, kg.
    pub fuel: f64,
    /// SOC change over the step.
    pub dsoc: f64,
}

/// Control candidates for load `p_pl`: a uniform P_SS grid over the engine-on
/// box plus 0 and `p_pl` when inside it, and the electric option when the
/// battery alone can carry the load.
pub fn candidates(
    p_pl: f64,
    dt: f64,
    mode: DpMode,
    n_u: usize,
    p: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::with_capacity(n_u + 3);
    if mode.allows_stop() && (p.p_ss_min..=p.p_ss_max).contains(&p_pl) {
        out.push(Candidate {
            control: Control {
                p_ps: 0.0,
                p_ss: p_pl,
                engine_on: false,
                ..Control::default()
            },
            fuel: 0.0,
            dsoc: soc_rate(p_pl, p)? * dt,
        });
    }
    let (lo, hi) = engine_on_box(p_pl, p);
    let mut grid: Vec<f64> = if hi > lo && n_u > 1 {
        (0..n_u)
            .map(|j| {
                if j == n_u - 1 {
                    hi
                } else {
                    lo + (hi - lo) * j as f64 / (n_u - 1) as f64
                }
            })
            .collect()
    } else {
        vec![hi]
    };
    for extra in [0.0, p_pl] {
        if (lo..=hi).contains(&extra) {
            grid.push(extra);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    for p_ss in grid {
        out.push(engine_candidate(p_pl, p_ss, dt, p, fcm)?);
    }
    Ok(out)
}

fn engine_candidate(
    p_pl: f64,
    p_ss: f64,
    dt: f64,
    p: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Candidate> {
    let demand = p_pl - p_ss;
    let deficit = (demand - p.p_ps_max).max(0.0);
    let p_ps = demand.min(p.p_ps_max).max(0.0);
    Ok(Candidate {
        control: Control {
            p_ps,
            p_ss,
            engine_on: true,
            emergency: deficit > 0.0,
            deficit,
        },
        fuel: fcm.running_rate(p_ps, p) * dt,
        dsoc: soc_rate(p_ss, p)? * dt,
    })
}

/// Engine-on candidates whose SOC change is `base` plus a whole number of
/// cells `h`.
fn aligned_candidates(
    p_pl: f64,
    dt: f64,
    base: f64,
    h: f64,
    p: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Vec<Candidate>> {
    let (lo, hi) = engine_on_box(p_pl, p);
    let d_lo = soc_rate(hi, p)? * dt;
    let d_hi = soc_rate(lo, p)? * dt;
    let m_lo = ((d_lo - base) / h).ceil() as i64;
    let m_hi = ((d_hi - base) / h).floor() as i64;
    let mut out = Vec::new();
    for m in m_lo..=m_hi {
        let d = base + m as f64 * h;
        let Some(p_ss) = p_ss_for_soc_rate(d / dt, p) else {
            continue;
        };
        if (lo..=hi).contains(&p_ss) {
            let mut c = engine_candidate(p_pl, p_ss, dt, p, fcm)?;
            // Exact lattice step, so the next state is a node.
            c.dsoc = d;
            out.push(c);
        }
    }
    Ok(out)
}

/// Cost-to-go on the two edges of the reachable set, per previous engine state.
#[derive(Debug, Clone, Copy, Default)]
struct Edges {
    lo: Option<[f64; 2]>,
    hi: Option<[f64; 2]>,
}

/// Stateful solver so the value function can be inspected after a solve.
pub struct DpSolver<'a> {
    profile: &'a LoadProfile,
    soc_t: f64,
    mode: DpMode,
    grid: DpGrid,
    params: &'a VehicleParams,
    fcm: &'a FuelModel,
    /// SOC lattice of each step, `k = 0..=N`.
    grids: Vec<SocGrid>,
    band: f64,
    cands: Vec<Vec<Candidate>>,
    /// Hull of the SOC values from which the terminal band is reachable,
    /// `k = 0..=N`.
    reach: Vec<(f64, f64)>,
    edges: Vec<Edges>,
    /// `values[k][s_prev][i]`, `k = 0..=N`.
    values: Option<Vec<[Vec<f64>; 2]>>,
}

/// Value function at one step for both previous engine states.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSlice {
    pub k: usize,
    pub soc: Vec<f64>,
    /// Engine off before the step.
    pub v_off: Vec<f64>,
    /// Engine on before the step.
    pub v_on: Vec<f64>,
}

impl<'a> DpSolver<'a> {
    pub fn new(
        profile: &'a LoadProfile,
        soc_t: f64,
        mode: DpMode,
        grid: DpGrid,
        params: &'a VehicleParams,
        fcm: &'a FuelModel,
    ) -> Result<Self> {
        if grid.n_soc < 2 || grid.n_u < 1 {
            return Err(Error::InvalidParams(format!(
                "DP grid needs n_soc >= 2 and n_u >= 1, got {} and {}",
                grid.n_soc, grid.n_u
            )));
        }
        let base = SocGrid {
            min: params.soc_min,
            max: params.soc_max,
            n: grid.n_soc,
            offset: 0.0,
        };
        let h = base.step();
        let band = grid.band.unwrap_or(0.5 * h);
        if !(params.soc_min..=params.soc_max).contains(&soc_t) {
            return Err(Error::Infeasible { step: profile.len() });
        }
        let n = profile.len();
        let mut cands = profile
            .p_pl
            .iter()
            .enumerate()
            .map(|(k, &pl)| {
                candidates(pl, profile.dt, mode, grid.n_u, params, fcm).map_err(|e| e.at_step(k))
            })
            .collect::<Result<Vec<_>>>()?;

        // Aligned mode shifts each step's lattice by the engine-off SOC change,
        // so engine-off transitions map nodes onto nodes, and adds engine-on
        // controls that do the same.
        let mut grids = vec![base; n + 1];
        if grid.align {
            grids[n].offset = (soc_t - base.min).rem_euclid(h);
            for k in (0..n).rev() {
                let shift = cands[k]
                    .iter()
                    .find(|c| !c.control.engine_on)
                    .map_or(0.0, |c| c.dsoc);
                let off = (grids[k + 1].offset - shift).rem_euclid(h);
                grids[k].offset = if off >= h - 1e-15 { 0.0 } else { off };
                let extra = aligned_candidates(profile.p_pl[k], profile.dt, shift, h, params, fcm)
                    .map_err(|e| e.at_step(k))?;
                cands[k].extend(extra);
            }
        }
        let mut reach = vec![(0.0, 0.0); n + 1];
        reach[n] = (
            (soc_t - band).max(params.soc_min),
            (soc_t + band).min(params.soc_max),
        );
        // Exact cost along each edge of the reachable set: the lower edge
        // charges as hard as possible every step, the upper edge discharges.
        // `None` once an edge has been clipped by the SOC window.
        let mut edges = vec![Edges::default(); n + 1];
        edges[n] = Edges {
            lo: Some([0.0; 2]),
            hi: Some([0.0; 2]),
        };
        let pen = mode.penalty(params);
        let edge_cost = |k: usize, d: f64, next: [f64; 2]| -> [f64; 2] {
            let mut out = [f64::INFINITY; 2];
            for (s_prev, o) in out.iter_mut().enumerate() {
                for c in cands[k].iter().filter(|c| (c.dsoc - d).abs() <= 1e-15) {
                    let on = c.control.engine_on;
                    let start = if on && s_prev == 0 { pen } else { 0.0 };
                    *o = o.min((c.fuel + start) + next[usize::from(on)]);
                }
            }
            out
        };
        for k in (0..n).rev() {
            let (lo, hi) = reach[k + 1];
            let dmin = cands[k].iter().map(|c| c.dsoc).fold(f64::INFINITY, f64::min);
            let dmax = cands[k].iter().map(|c| c.dsoc).fold(f64::NEG_INFINITY, f64::max);
            let (raw_lo, raw_hi) = (lo - dmax, hi - dmin);
            reach[k] = (raw_lo.max(params.soc_min), raw_hi.min(params.soc_max));
            edges[k] = Edges {
                lo: edges[k + 1]
                    .lo
                    .filter(|_| raw_lo >= params.soc_min)
                    .map(|v| edge_cost(k, dmax, v)),
                hi: edges[k + 1]
                    .hi
                    .filter(|_| raw_hi <= params.soc_max)
                    .map(|v| edge_cost(k, dmin, v)),
            };
        }
        Ok(Self {
            profile,
            soc_t,
            mode,
            grid,
            params,
            fcm,
            grids,
            band,
            cands,
            reach,
            edges,
            values: None,
        })
    }

    /// SOC lattice at step `k`.
    pub fn soc_grid(&self, k: usize) -> SocGrid {
        self.grids[k]
    }

    fn terminal(&self, x: f64) -> f64 {
        let inside = x >= self.params.soc_min - 1e-12 && x <= self.params.soc_max + 1e-12;
        if inside && (x - self.soc_t).abs() <= self.band + 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Value at `x` from the node values `v` of step `k` and previous engine
    /// state `s`.
    ///
    /// Linear mode interpolates between the nearest finite anchors: lattice
    /// nodes, or the exact edge values of the reachable set when a neighbour
    /// node is infeasible. A clipped edge falls back to the finite neighbour.
    fn interpolate(&self, v: &[f64], k: usize, s: usize, x: f64) -> f64 {
        if x < self.params.soc_min - 1e-12 || x > self.params.soc_max + 1e-12 {
            return f64::INFINITY;
        }
        let g = &self.grids[k];
        match self.grid.interp {
            Interp::Nearest => v[g.nearest_index(x)],
            Interp::Linear => {
                let (lo, hi) = self.reach[k];
                if x < lo - 1e-12 || x > hi + 1e-12 {
                    return f64::INFINITY;
                }
                let h = g.step();
                let r = (x - g.min - g.offset) / h;
                let nearest = r.round();
                if (r - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < g.n {
                    let vi = v[nearest as usize];
                    if vi.is_finite() {
                        return vi;
                    }
                }
                let i = r.floor() as i64;
                let node = |j: i64| -> Option<(f64, f64)> {
                    (j >= 0 && (j as usize) < g.n && v[j as usize].is_finite())
                        .then(|| (g.node(j as usize), v[j as usize]))
                };
                let edges = self.edges[k];
                let left = node(i).or_else(|| edges.lo.map(|c| (lo, c[s])));
                let right = node(i + 1).or_else(|| edges.hi.map(|c| (hi, c[s])));
                match (left, right) {
                    (Some((xa, va)), Some((xb, vb))) if xb - xa > 1e-15 => {
                        va + (x - xa) / (xb - xa) * (vb - va)
                    }
                    (Some((_, va)), Some((_, vb))) => va.min(vb),
                    (None, Some((xb, vb))) if i < 0 && v.len() > 1 && v[1].is_finite() => {
                        // Below the first node of a shifted lattice: extend
                        // the first cell's slope.
                        vb + (x - xb) / h * (v[1] - vb)
                    }
                    (Some((_, va)), None) => va,
                    (None, Some((_, vb))) => vb,
                    (None, None) => f64::INFINITY,
                }
            }
        }
    }

    /// Cost-to-go of candidate `c` from SOC `x` at step `k`.
    fn cost(&self, next: Option<&[Vec<f64>; 2]>, k: usize, x: f64, s_prev: bool, c: &Candidate) -> f64 {
        let pen = if c.control.engine_on && !s_prev {
            self.mode.penalty(self.params)
        } else {
            0.0
        };
        let x1 = x + c.dsoc;
        let rest = match next {
            None => self.terminal(x1),
            Some(v) => {
                let s = usize::from(c.control.engine_on);
                self.interpolate(&v[s], k + 1, s, x1)
            }
        };
        debug_assert!(k < self.profile.len());
        (c.fuel + pen) + rest
    }

    pub fn solve(&mut self) -> Result<()> {
        let n = self.profile.len();
        let term: Vec<f64> = self.grids[n].nodes().iter().map(|&x| self.terminal(x)).collect();
        let mut values: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; n + 1];
        values[n] = [term.clone(), term];
        for k in (0..n).rev() {
            let next = (k + 1 < n).then(|| &values[k + 1]);
            let nodes = self.grids[k].nodes();
            let this = &*self;
            let rows: Vec<(f64, f64)> = nodes
                .par_iter()
                .map(|&x| {
                    if x > this.params.soc_max + 1e-12 {
                        return (f64::INFINITY, f64::INFINITY);
                    }
                    let best = |s_prev: bool| {
                        this.cands[k]
                            .iter()
                            .map(|c| this.cost(next, k, x, s_prev, c))
                            .fold(f64::INFINITY, f64::min)
                    };
                    (best(false), best(true))
                })
                .collect();
            let (off, on): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            values[k] = [off, on];
        }
        self.values = Some(values);
        Ok(())
    }

    pub fn value_slice(&self, k: usize) -> Result<ValueSlice> {
        let values = self.values.as_ref().ok_or(Error::NotSolved)?;
        let v = values.get(k).ok_or(Error::InvalidParams(format!(
            "step {k} beyond horizon {}",
            self.profile.len()
        )))?;
        Ok(ValueSlice {
            k,
            soc: self.grids[k].nodes(),
            v_off: v[0].clone(),
            v_on: v[1].clone(),
        })
    }

    /// Interpolated cost-to-go at step `k` from SOC `x` with previous engine
    /// state `s_prev`.
    pub fn value_at(&self, k: usize, x: f64, s_prev: bool) -> Result<f64> {
        let values = self.values.as_ref().ok_or(Error::NotSolved)?;
        let v = values.get(k).ok_or(Error::InvalidParams(format!(
            "step {k} beyond horizon {}",
            self.profile.len()
        )))?;
        Ok(self.interpolate(&v[usize::from(s_prev)], k, usize::from(s_prev), x))
    }

    /// Optimal cost from `soc0` with the engine initially off.
    pub fn optimal_cost(&self, soc0: f64) -> Result<f64> {
        let values = self.values.as_ref().ok_or(Error::NotSolved)?;
        Ok(self.interpolate(&values[0][0], 0, 0, soc0))
    }

    /// Forward pass from `soc0`, engine initially off. Ties go to the first
    /// candidate in the candidate order.
    pub fn rollout(&self, soc0: f64) -> Result<Trajectory> {
        let values = self.values.as_ref().ok_or(Error::NotSolved)?;
        let n = self.profile.len();
        let params = self.params.with_k(self.mode.k());
        let mut rec = Recorder::new(soc0, self.profile.dt, &params, self.fcm);
        let mut x = soc0;
        let mut s_prev = false;
        for k in 0..n {
            let next = (k + 1 < n).then(|| &values[k + 1]);
            // Controls that put an off-lattice state back onto the lattice.
            let snap = if self.grid.align {
                let g = &self.grids[k + 1];
                let base = g.min + g.offset - x;
                aligned_candidates(self.profile.p_pl[k], self.profile.dt, base, g.step(), self.params, self.fcm)
                    .map_err(|e| e.at_step(k))?
            } else {
                Vec::new()
            };
            let mut best: Option<(f64, &Candidate)> = None;
            for c in self.cands[k].iter().chain(&snap) {
                let cost = self.cost(next, k, x, s_prev, c);
                if cost.is_finite() && best.is_none_or(|(b, _)| cost < b) {
                    best = Some((cost, c));
                }
            }
            let (_, c) = best.ok_or(Error::Infeasible { step: k })?;
            rec.push(self.profile.p_pl[k], c.control, None)?;
            x = rec.state().soc;
            s_prev = c.control.engine_on;
        }
        Ok(rec.finish())
    }
}

/// Solves and rolls out in one call.
pub fn dp_solve(
    profile: &LoadProfile,
    soc0: f64,
    soc_t: f64,
    mode: DpMode,
    grid: DpGrid,
    params: &VehicleParams,
    fcm: &FuelModel,
) -> Result<Trajectory> {
    let mut solver = DpSolver::new(profile, soc_t, mode, grid, params, fcm)?;
    solver.solve()?;
    solver.rollout(soc0)
}
