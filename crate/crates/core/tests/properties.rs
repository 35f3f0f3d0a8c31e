//! Toolkit-wide invariants checked on randomised inputs.

use hevem::analytic_pmp::{solve_constrained, SssModel};
use hevem::cycles::{mixed_rural, derive_load, pulse_profile, LoadProfile};
use hevem::dp::{dp_solve, DpGrid, DpMode};
use hevem::efc::{efc_from, EquivalenceFactors};
use hevem::powertrain::{FuelModel, VehicleParams};
use hevem::rulebased::{simulate, Controller, HptsParams};
use hevem::trajectory::{count_switches, Trajectory};
use hevem::tuner::{tune, TuneSpec};
use proptest::prelude::*;

fn check_trajectory(t: &Trajectory, label: &str) {
    assert!(t.max_balance_error() < 1e-9, "{label}: balance {}", t.max_balance_error());
    let mut prev = 0.0;
    for (k, s) in t.steps.iter().enumerate() {
        assert!(s.m_f >= prev, "{label}: fuel fell at step {k}");
        prev = s.m_f;
    }
}

fn coarse() -> DpGrid {
    DpGrid {
        n_soc: 121,
        n_u: 41,
        ..DpGrid::default()
    }
}

fn short_load() -> impl Strategy<Value = LoadProfile> {
    prop::collection::vec(-15e3f64..45e3, 5..60).prop_map(|p| LoadProfile::new("rand", 1.0, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_controller_balances_power_and_burns_monotonically(
        seed in 0u64..1000,
        hi in 5e3f64..40e3,
        frac in 0.0f64..1.0,
        dp in -10e3f64..30e3,
        s in 2.0f64..3.0,
        soc0 in 0.5f64..0.8,
    ) {
        let p = VehicleParams::default();
        let prof = derive_load(&mixed_rural(seed), &p);
        for fcm in [FuelModel::Linear, FuelModel::synthetic_quasilinear(&p)] {
            let ctrls = [
                Controller::Hpts(HptsParams::new(hi, hi * frac, dp)),
                Controller::Xos { threshold: hi },
                Controller::Ecms { s_d: s, s_c: s },
            ];
            for c in &ctrls {
                let t = simulate(&prof, c, soc0, &p, &fcm).unwrap();
                check_trajectory(&t, c.label().as_str());
                prop_assert!(t.soc_series().iter().all(|&x| (0.45..=0.85).contains(&x)));
            }
        }
    }

    #[test]
    fn dp_and_costate_trajectories_are_consistent(prof in short_load(), soc0 in 0.6f64..0.7) {
        let p = VehicleParams::default();
        let fcm = FuelModel::Linear;
        for mode in [DpMode::Off, DpMode::Lossless, DpMode::Penalized { k: 0.8 }] {
            if let Ok(t) = dp_solve(&prof, soc0, soc0, mode, coarse(), &p, &fcm) {
                check_trajectory(&t, &format!("dp {mode}"));
            }
        }
        for model in [SssModel::Off, SssModel::Lossless] {
            if let Ok(sol) = solve_constrained(&prof, soc0, soc0, model, &p) {
                check_trajectory(&sol.trajectory, &format!("pmp {model}"));
            }
        }
    }

    #[test]
    fn equivalent_fuel_is_continuous_at_zero(
        m_f in 0.0f64..1.0,
        s_d in 2.0f64..3.0,
        s_c in 2.0f64..3.0,
    ) {
        let p = VehicleParams::default();
        let f = EquivalenceFactors { s_d, s_c, du: 0.3, r2_d: 1.0, r2_c: 1.0 };
        let jump = efc_from(m_f, 1e-12, &f, &p) - efc_from(m_f, -1e-12, &f, &p);
        prop_assert!(jump.abs() < 1e-12);
        prop_assert_eq!(efc_from(m_f, 0.0, &f, &p), m_f);
    }

    #[test]
    fn tuned_optimum_is_charge_sustaining(seed in 0u64..1000) {
        let p = VehicleParams::default();
        let prof = derive_load(&mixed_rural(seed), &p);
        let spec = TuneSpec::square(6);
        if let Ok(r) = tune(&prof, &spec, 0.65, &p, &FuelModel::Linear) {
            prop_assert!(r.trajectory.dsoc().abs() <= spec.cs_tol);
            check_trajectory(&r.trajectory, "tuned");
        }
    }
}

#[test]
fn grid_refinement_moves_pulse_fuel_little() {
    let p = VehicleParams::default();
    let fcm = FuelModel::Linear;
    let prof = pulse_profile();
    for mode in [DpMode::Off, DpMode::Lossless] {
        let base = DpGrid { n_soc: 301, n_u: 151, ..DpGrid::default() };
        let fine = DpGrid { n_soc: 601, n_u: 301, ..base };
        let a = dp_solve(&prof, 0.64, 0.65, mode, base, &p, &fcm).unwrap().fuel();
        let b = dp_solve(&prof, 0.64, 0.65, mode, fine, &p, &fcm).unwrap().fuel();
        assert!((a - b).abs() / b < 5e-3, "{mode}: {a} vs {b}");
    }
}

#[test]
fn restart_count_does_not_grow_with_the_penalty() {
    let p = VehicleParams::default();
    let fcm = FuelModel::Linear;
    let prof = derive_load(&mixed_rural(3), &p).sub_profile(0, 400);
    let mut last = u32::MAX;
    for k in [0.0, 0.4, 0.8, 1.6, 2.0] {
        let t = dp_solve(&prof, 0.65, 0.65, DpMode::Penalized { k }, coarse(), &p, &fcm).unwrap();
        let (n, _) = count_switches(&t);
        assert!(n <= last, "K = {k}: {n} restarts after {last}");
        last = n;
    }
}
