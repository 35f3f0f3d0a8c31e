//! Per-step simulation record shared by every controller and solver.

use serde::Serialize;

use crate::error::Result;
use crate::powertrain::{step, FuelModel, PowertrainState, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub p_pl: f64,
    pub p_ps: f64,
    pub p_ss: f64,
    pub engine_on: bool,
    /// SOC at the start of the step.
    pub soc: f64,
    /// Cumulative fuel at the end of the step, kg.
    pub m_f: f64,
    /// Restarts up to and including this step.
    pub n_restarts: u32,
    /// Costate of the arc containing this step, when the solver has one.
    pub lambda: Option<f64>,
    /// Set when an SOC-limit override broke exact power balance.
    pub emergency: bool,
    /// Unserved load, W. Positive when demand exceeded both sources.
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub soc0: f64,
    /// Engine state before the first step.
    pub engine_init: bool,
    pub steps: Vec<StepRecord>,
    pub soc_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub fuel_g: f64,
    /// SOC(0) − SOC(T): positive for net discharge.
    pub dsoc: f64,
    pub n_restarts: u32,
    pub engine_on_s: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total fuel including restart penalties, kg.
    pub fn fuel(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.m_f)
    }

    /// SOC(0) − SOC(T).
    pub fn dsoc(&self) -> f64 {
        self.soc0 - self.soc_final
    }

    /// SOC at every step boundary, `len() + 1` values.
    pub fn soc_series(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.soc)
            .chain(std::iter::once(self.soc_final))
            .collect()
    }

    pub fn summary(&self) -> Summary {
        let (n_restarts, duty) = count_switches(self);
        Summary {
            fuel_g: self.fuel() * 1e3,
            dsoc: self.dsoc(),
            n_restarts,
            engine_on_s: duty * self.dt * self.len() as f64,
        }
    }

    /// Largest |P_PL − (s·P_PS + P_SS)| over steps not flagged as emergency.
    pub fn max_balance_error(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| !s.emergency)
            .map(|s| {
                let ps = if s.engine_on { s.p_ps } else { 0.0 };
                (s.p_pl - (ps + s.p_ss)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn engine_states(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.engine_on).collect()
    }
}

/// Number of 0→1 engine transitions (counted from `engine_init`) and the
/// engine-on fraction of the horizon.
pub fn count_switches(traj: &Trajectory) -> (u32, f64) {
    let mut prev = traj.engine_init;
    let mut starts = 0;
    let mut on = 0usize;
    for s in &traj.steps {
        if s.engine_on && !prev {
            starts += 1;
        }
        on += usize::from(s.engine_on);
        prev = s.engine_on;
    }
    let duty = if traj.steps.is_empty() {
        0.0
    } else {
        on as f64 / traj.steps.len() as f64
    };
    (starts, duty)
}

/// Per-step control as produced by a controller or solver.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Control {
    pub p_ps: f64,
    pub p_ss: f64,
    pub engine_on: bool,
    pub emergency: bool,
    pub deficit: f64,
}

/// Forward-Euler integrator that turns a control sequence into a [`Trajectory`].
pub struct Recorder<'a> {
    params: &'a VehicleParams,
    fcm: &'a FuelModel,
    state: PowertrainState,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    pub fn new(soc0: f64, dt: f64, params: &'a VehicleParams, fcm: &'a FuelModel) -> Self {
        let state = PowertrainState::new(soc0);
        Self {
            params,
            fcm,
            state,
            traj: Trajectory {
                dt,
                soc0,
                engine_init: state.engine_on,
                steps: Vec::new(),
                soc_final: soc0,
            },
        }
    }

    pub fn state(&self) -> &PowertrainState {
        &self.state
    }

    pub fn push(&mut self, p_pl: f64, c: Control, lambda: Option<f64>) -> Result<()> {
        let k = self.traj.steps.len();
        let p_ps = if c.engine_on { c.p_ps } else { 0.0 };
        let next = step(
            &self.state,
            p_ps,
            c.p_ss,
            c.engine_on,
            self.traj.dt,
            self.fcm,
            self.params,
        )
        .map_err(|e| e.at_step(k))?;
        self.traj.steps.push(StepRecord {
            p_pl,
            p_ps,
            p_ss: c.p_ss,
            engine_on: c.engine_on,
            soc: self.state.soc,
            m_f: next.m_f,
            n_restarts: next.n_restarts,
            lambda,
            emergency: c.emergency,
            deficit: c.deficit,
        });
        self.state = next;
        self.traj.soc_final = next.soc;
        Ok(())
    }

    pub fn finish(self) -> Trajectory {
        self.traj
    }
}
