//! Quasi-static series-hybrid powertrain: road load, DC-link load power,
//! battery branch and the start-stop fuel model.

mod config;
mod fuel;
mod motor;

use std::sync::Arc;

pub use config::{parse_config, ConfigKey};
pub use fuel::{FuelModel, FuelTable};
pub use motor::MotorMap;

use crate::error::{Error, Result};

/// Slack allowed when checking primary-source power against its box.
pub const POWER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum MotorEfficiency {
    Constant(f64),
    Map(Arc<MotorMap>),
}

/// Vehicle, battery and engine constants in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub m: f64,
    pub f_t: f64,
    pub f_d: f64,
    pub g: f64,
    pub eta_t: f64,
    pub eta_i: f64,
    pub eta_r: f64,
    pub eta_dc: f64,
    pub eta_m: MotorEfficiency,
    /// Idle fuel rate, kg/s.
    pub q_f0: f64,
    /// Fuel per unit of engine-branch energy, kg/J.
    pub alpha_f: f64,
    /// Battery capacity, C.
    pub q_max: f64,
    pub r_b: f64,
    pub v_oc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_ss_min: f64,
    pub p_ss_max: f64,
    pub p_ps_max: f64,
    /// Restart penalty expressed as seconds of idling.
    pub k: f64,
    /// Fuel lower heating value, J/kg.
    pub q_hv: f64,
    pub g_t: f64,
    /// Wheel radius, m. Only consulted by a motor efficiency map.
    pub r_w: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1500.0,
            f_t: 0.01,
            f_d: 0.47,
            g: 9.81,
            eta_t: 0.96,
            eta_i: 0.96,
            eta_r: 0.96,
            eta_dc: 0.96,
            eta_m: MotorEfficiency::Constant(0.9),
            q_f0: 0.12e-3,
            alpha_f: 0.059e-6,
            q_max: 5.0 * 3600.0,
            r_b: 0.2056,
            v_oc: 300.0,
            soc_min: 0.5,
            soc_max: 0.8,
            p_ss_min: -15e3,
            p_ss_max: 30e3,
            p_ps_max: 70e3,
            k: 0.8,
            q_hv: 42.5e6,
            g_t: 10.0,
            r_w: 0.3,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let mut etas = vec![
            ("eta_t", self.eta_t),
            ("eta_i", self.eta_i),
            ("eta_r", self.eta_r),
            ("eta_dc", self.eta_dc),
        ];
        if let MotorEfficiency::Constant(e) = self.eta_m {
            etas.push(("eta_m", e));
        }
        for (name, e) in etas {
            if !(e > 0.0 && e <= 1.0) {
                return bad(format!("{name} = {e} must lie in (0, 1]"));
            }
        }
        for (name, x) in [
            ("m", self.m),
            ("g", self.g),
            ("q_f0", self.q_f0),
            ("alpha_f", self.alpha_f),
            ("Q_max", self.q_max),
            ("R_b", self.r_b),
            ("V_oc", self.v_oc),
            ("P_PS_max", self.p_ps_max),
            ("q_HV", self.q_hv),
            ("g_t", self.g_t),
            ("r_w", self.r_w),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("{name} = {x} must be positive"));
            }
        }
        if !(self.f_t >= 0.0 && self.f_d >= 0.0) {
            return bad("resistance coefficients must be non-negative".into());
        }
        if !(0.0 < self.soc_min && self.soc_min < self.soc_max && self.soc_max < 1.0) {
            return bad(format!(
                "SOC limits [{}, {}] must satisfy 0 < min < max < 1",
                self.soc_min, self.soc_max
            ));
        }
        if !(self.p_ss_min < 0.0 && self.p_ss_max > 0.0) {
            return bad("P_SS_min < 0 < P_SS_max violated".into());
        }
        let cap = self.v_oc * self.v_oc * self.eta_dc / (4.0 * self.r_b);
        if self.p_ss_max >= cap {
            return bad(format!(
                "P_SS_max = {} W is beyond the battery's deliverable {cap:.1} W",
                self.p_ss_max
            ));
        }
        if !(self.k >= 0.0) {
            return bad(format!("K = {} must be non-negative", self.k));
        }
        Ok(())
    }

    /// Restart fuel penalty m_p = K·q_f0, kg.
    pub fn restart_penalty(&self) -> f64 {
        self.k * self.q_f0
    }

    /// Same vehicle with a different restart coefficient.
    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..self.clone() }
    }

    /// Motor efficiency at road speed `v` delivering `p_drive` at the wheels.
    pub fn motor_efficiency(&self, v: f64, p_drive: f64) -> f64 {
        match &self.eta_m {
            MotorEfficiency::Constant(e) => *e,
            MotorEfficiency::Map(map) => {
                let omega = v * self.g_t / self.r_w;
                let p_shaft = if p_drive >= 0.0 {
                    p_drive / self.eta_t
                } else {
                    p_drive * self.eta_t
                };
                let torque = if omega > 0.0 { p_shaft.abs() / omega } else { 0.0 };
                map.efficiency(omega, torque)
            }
        }
    }

    /// Battery-side power for a DC-link power `p_ss`, W.
    pub fn battery_power(&self, p_ss: f64) -> f64 {
        if p_ss >= 0.0 {
            p_ss / self.eta_dc
        } else {
            p_ss * self.eta_dc
        }
    }

    /// Largest battery-side power the cell can deliver, V²/(4R).
    pub fn battery_power_limit(&self) -> f64 {
        self.v_oc * self.v_oc / (4.0 * self.r_b)
    }
}

/// Wheel power demanded by the road, W.
pub fn drive_power(v: f64, a: f64, theta: f64, p: &VehicleParams) -> f64 {
    v * (p.m * a + p.f_t * p.m * p.g + p.f_d * v * v + p.m * p.g * theta.sin())
}

/// DC-link power requested by the propulsion branch, W.
///
/// Regenerated power is capped by what the battery branch can accept.
pub fn load_power(p_drive: f64, v: f64, p: &VehicleParams) -> f64 {
    let chain = p.eta_i * p.motor_efficiency(v, p_drive) * p.eta_t;
    if p_drive >= 0.0 {
        p_drive / chain
    } else {
        (p_drive * chain).max(p.p_ss_min)
    }
}

/// Battery current for DC-link power `p_ss`, positive on discharge, A.
pub fn battery_current(p_ss: f64, p: &VehicleParams) -> Result<f64> {
    let p_b = p.battery_power(p_ss);
    let disc = p.v_oc * p.v_oc - 4.0 * p_b * p.r_b;
    if disc < 0.0 {
        return Err(Error::DiscriminantNegative {
            p_b,
            p_max: p.battery_power_limit(),
        });
    }
    // Rationalised root: exact at p_b = 0 and free of cancellation.
    Ok(2.0 * p_b / (p.v_oc + disc.sqrt()))
}

/// dSOC/dt, 1/s.
pub fn soc_rate(p_ss: f64, p: &VehicleParams) -> Result<f64> {
    Ok(-battery_current(p_ss, p)? / p.q_max)
}

/// DC-link power producing the SOC rate `rate`, or `None` when the required
/// discharge current exceeds the V/(2R) maximum-power point.
pub fn p_ss_for_soc_rate(rate: f64, p: &VehicleParams) -> Option<f64> {
    let i = -rate * p.q_max;
    if i > p.v_oc / (2.0 * p.r_b) {
        return None;
    }
    let p_b = p.v_oc * i - p.r_b * i * i;
    Some(if p_b >= 0.0 {
        p_b * p.eta_dc
    } else {
        p_b / p.eta_dc
    })
}

/// Engine fuel mass rate, kg/s.
pub fn fuel_rate(p_ps: f64, engine_on: bool, fcm: &FuelModel, p: &VehicleParams) -> Result<f64> {
    if !engine_on {
        if p_ps.abs() > POWER_TOL {
            return Err(Error::EngineOffWithPower { p_ps });
        }
        return Ok(0.0);
    }
    if !(-POWER_TOL..=p.p_ps_max + POWER_TOL).contains(&p_ps) {
        return Err(Error::PowerOutOfRange {
            p_ps,
            p_max: p.p_ps_max,
        });
    }
    Ok(fcm.running_rate(p_ps.clamp(0.0, p.p_ps_max), p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowertrainState {
    pub soc: f64,
    pub engine_on: bool,
    /// Cumulative fuel, kg.
    pub m_f: f64,
    pub n_restarts: u32,
}

impl PowertrainState {
    pub fn new(soc: f64) -> Self {
        Self {
            soc,
            engine_on: false,
            m_f: 0.0,
            n_restarts: 0,
        }
    }
}

/// Advances one sample: the engine jump (with restart penalty on 0→1)
/// happens first, then SOC and fuel flow over `dt` by explicit Euler.
pub fn step(
    state: &PowertrainState,
    p_ps: f64,
    p_ss: f64,
    engine_on: bool,
    dt: f64,
    fcm: &FuelModel,
    p: &VehicleParams,
) -> Result<PowertrainState> {
    debug_assert!(dt > 0.0);
    let mut next = *state;
    if engine_on && !state.engine_on {
        next.m_f += p.restart_penalty();
        next.n_restarts += 1;
    }
    next.engine_on = engine_on;
    next.m_f += fuel_rate(p_ps, engine_on, fcm, p)? * dt;
    next.soc += soc_rate(p_ss, p)? * dt;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tp() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn soc_rate_inverse_round_trips() {
        let p = tp();
        for p_ss in [-15e3, -3e3, 0.0, 1.0, 12e3, 30e3] {
            let r = soc_rate(p_ss, &p).unwrap();
            let back = p_ss_for_soc_rate(r, &p).unwrap();
            assert!((back - p_ss).abs() < 1e-6, "{p_ss} -> {back}");
        }
        assert!(p_ss_for_soc_rate(-1.0, &p).is_none());
    }

    #[test]
    fn defaults_validate() {
        tp().validate().unwrap();
    }

    #[test]
    fn drive_power_hand_values() {
        let p = tp();
        assert_eq!(drive_power(0.0, 0.0, 0.0, &p), 0.0);
        // rolling 0.01·1500·9.81 = 147.15 N, drag 0.47·100 = 47 N
        assert_relative_eq!(drive_power(10.0, 0.0, 0.0, &p), 1941.5, epsilon = 1e-9);
        assert_relative_eq!(drive_power(10.0, 1.0, 0.0, &p), 16941.5, epsilon = 1e-9);
    }

    #[test]
    fn drive_power_mass_terms_scale_exactly() {
        let p = tp();
        let p2 = VehicleParams { m: 2.0 * p.m, ..p.clone() };
        let (v, a, th) = (12.0, 0.7, 0.02);
        let drag = p.f_d * v * v * v;
        let mass = drive_power(v, a, th, &p) - drag;
        let mass2 = drive_power(v, a, th, &p2) - drag;
        assert_relative_eq!(mass2, 2.0 * mass, max_relative = 1e-12);
    }

    #[test]
    fn load_power_hand_values() {
        let p = tp();
        assert_eq!(load_power(0.0, 0.0, &p), 0.0);
        let chain = 0.96 * 0.9 * 0.96;
        assert_relative_eq!(load_power(1941.5, 10.0, &p), 1941.5 / chain, epsilon = 1e-9);
        assert_relative_eq!(load_power(1941.5, 10.0, &p), 2340.735, epsilon = 1e-3);
        assert_eq!(load_power(-40_000.0, 10.0, &p), -15_000.0);
        assert_relative_eq!(load_power(-1000.0, 10.0, &p), -1000.0 * chain, epsilon = 1e-12);
    }

    #[test]
    fn battery_current_satisfies_terminal_power() {
        let p = tp();
        assert_eq!(battery_current(0.0, &p).unwrap(), 0.0);
        // 30 kW at the cell: (300 - sqrt(65328)) / 0.4112
        let p_ss = 30_000.0 * p.eta_dc;
        let i = battery_current(p_ss, &p).unwrap();
        let textbook = (300.0 - (300.0f64 * 300.0 - 4.0 * 30_000.0 * 0.2056).sqrt()) / 0.4112;
        assert_relative_eq!(i, textbook, max_relative = 1e-12);
        assert_relative_eq!(i, 108.0, epsilon = 0.05);
        let v_b = p.v_oc - i * p.r_b;
        assert_relative_eq!(v_b * i, 30_000.0, max_relative = 1e-12);
    }

    #[test]
    fn battery_current_rejects_excess_demand() {
        let p = tp();
        let limit = p.battery_power_limit();
        assert_relative_eq!(limit, 109_435.8, epsilon = 0.1);
        let err = battery_current((limit + 1.0) * p.eta_dc, &p).unwrap_err();
        assert!(matches!(err, Error::DiscriminantNegative { .. }));
    }

    #[test]
    fn soc_rate_hand_values() {
        let p = tp();
        assert_eq!(soc_rate(0.0, &p).unwrap(), 0.0);
        let r = soc_rate(28_800.0, &p).unwrap();
        assert_relative_eq!(r, -108.0 / 18_000.0, max_relative = 5e-4);
        assert!(soc_rate(-5000.0, &p).unwrap() > 0.0);
    }

    #[test]
    fn fuel_rate_hand_values() {
        let p = tp();
        let lin = FuelModel::Linear;
        assert_eq!(fuel_rate(0.0, false, &lin, &p).unwrap(), 0.0);
        assert_relative_eq!(fuel_rate(0.0, true, &lin, &p).unwrap(), 1.2e-4, max_relative = 1e-12);
        assert_relative_eq!(
            fuel_rate(50e3, true, &lin, &p).unwrap(),
            3.07e-3,
            max_relative = 1e-12
        );
        assert!(matches!(
            fuel_rate(80e3, true, &lin, &p),
            Err(Error::PowerOutOfRange { .. })
        ));
        assert!(matches!(
            fuel_rate(1.0, false, &lin, &p),
            Err(Error::EngineOffWithPower { .. })
        ));
    }

    #[test]
    fn step_restart_penalty() {
        let p = tp();
        let lin = FuelModel::Linear;
        let s0 = PowertrainState::new(0.65);
        let idle = step(&s0, 0.0, 0.0, false, 1.0, &lin, &p).unwrap();
        assert_eq!(idle, s0);

        let on = step(&s0, 0.0, 0.0, true, 1.0, &lin, &p).unwrap();
        assert_eq!(on.n_restarts, 1);
        assert_relative_eq!(on.m_f, 9.6e-5 + 1.2e-4, max_relative = 1e-12);

        let off = step(&on, 0.0, 0.0, false, 1.0, &lin, &p).unwrap();
        assert_eq!(off.n_restarts, 1);
        assert_eq!(off.m_f, on.m_f);
    }

    #[test]
    fn round_trip_through_battery_loses_energy() {
        let p = tp();
        // Charge at -10 kW for 10 s, then discharge until the SOC is restored.
        let gained = soc_rate(-10e3, &p).unwrap() * 10.0;
        let d_rate = soc_rate(10e3, &p).unwrap();
        let t_back = gained / -d_rate;
        let delivered = 10e3 * t_back;
        assert!(delivered < 10e3 * 10.0);
    }

    proptest! {
        #[test]
        fn soc_rate_strictly_decreasing(a in -15e3f64..30e3, b in -15e3f64..30e3) {
            prop_assume!((a - b).abs() > 1e-3);
            let p = tp();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(soc_rate(lo, &p).unwrap() > soc_rate(hi, &p).unwrap());
        }

        #[test]
        fn current_matches_quadratic(p_ss in -15e3f64..30e3) {
            let p = tp();
            let i = battery_current(p_ss, &p).unwrap();
            let p_b = p.battery_power(p_ss);
            prop_assert!((i * (p.v_oc - i * p.r_b) - p_b).abs() < 1e-6);
            prop_assert_eq!(i.signum() == p_ss.signum() || p_ss == 0.0, true);
        }

        #[test]
        fn load_chain_is_pure(v in 0.0f64..40.0, a in -3.0f64..3.0) {
            let p = tp();
            let x = load_power(drive_power(v, a, 0.0, &p), v, &p);
            let y = load_power(drive_power(v, a, 0.0, &p), v, &p);
            prop_assert_eq!(x.to_bits(), y.to_bits());
            prop_assert!(x >= p.p_ss_min);
        }

        #[test]
        fn fuel_never_decreases(
            steps in proptest::collection::vec((0.0f64..70e3, -15e3f64..30e3, any::<bool>()), 1..40)
        ) {
            let p = tp();
            let lin = FuelModel::Linear;
            let mut st = PowertrainState::new(0.65);
            for (p_ps, p_ss, on) in steps {
                let p_ps = if on { p_ps } else { 0.0 };
                let next = step(&st, p_ps, p_ss, on, 1.0, &lin, &p).unwrap();
                prop_assert!(next.m_f >= st.m_f);
                st = next;
            }
        }
    }
}
