//! Shared fixtures: a brute-force enumerator over DP control sequences.
#![allow(dead_code)]

use hevem::cycles::LoadProfile;
use hevem::dp::{candidates, Candidate, DpGrid, DpMode, Interp, SocGrid};
use hevem::powertrain::{FuelModel, VehicleParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub profile: LoadProfile,
    pub soc0: f64,
    pub soc_t: f64,
    pub mode: DpMode,
    pub grid: DpGrid,
}

/// Short random instance: 1 to 8 steps, 11 SOC nodes, 5 grid controls.
pub fn random_instance(seed: u64, interp: Interp) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let dt = [1.0, 5.0, 10.0][rng.gen_range(0..3)];
    let p_pl = (0..n).map(|_| rng.gen_range(-20e3..50e3)).collect();
    let mode = match rng.gen_range(0..3) {
        0 => DpMode::Off,
        1 => DpMode::Lossless,
        _ => DpMode::Penalized { k: rng.gen_range(0.0..2.0) },
    };
    let soc_t: f64 = rng.gen_range(0.52..0.78);
    let soc0 = (soc_t + rng.gen_range(-0.04..0.04_f64)).clamp(0.5, 0.8);
    Instance {
        profile: LoadProfile::new(format!("rand{seed}"), dt, p_pl),
        soc0,
        soc_t,
        mode,
        grid: DpGrid {
            n_soc: 11,
            n_u: 5,
            band: None,
            interp,
            align: false,
        },
    }
}

struct Enum<'a> {
    cands: Vec<Vec<Candidate>>,
    params: &'a VehicleParams,
    lattice: SocGrid,
    soc_t: f64,
    band: f64,
    pen: f64,
    snap: bool,
}

impl Enum<'_> {
    fn inside(&self, x: f64) -> bool {
        x >= self.params.soc_min - 1e-12 && x <= self.params.soc_max + 1e-12
    }

    fn snap_to_node(&self, x: f64) -> f64 {
        let h = (self.lattice.max - self.lattice.min) / (self.lattice.n - 1) as f64;
        let i = ((x - self.lattice.min) / h).round().clamp(0.0, (self.lattice.n - 1) as f64) as usize;
        self.lattice.node(i)
    }

    /// Least cost over every candidate sequence from step `k`, summed from
    /// the last step backwards.
    fn best(&self, k: usize, x: f64, s_prev: bool) -> f64 {
        let mut best = f64::INFINITY;
        for c in &self.cands[k] {
            let pen = if c.control.engine_on && !s_prev { self.pen } else { 0.0 };
            let x1 = x + c.dsoc;
            if !self.inside(x1) {
                continue;
            }
            let rest = if k + 1 == self.cands.len() {
                if (x1 - self.soc_t).abs() <= self.band + 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                let x1 = if self.snap { self.snap_to_node(x1) } else { x1 };
                self.best(k + 1, x1, c.control.engine_on)
            };
            best = best.min((c.fuel + pen) + rest);
        }
        best
    }
}

/// Minimum fuel over all candidate sequences. With `snap` every
/// intermediate SOC is moved to its nearest lattice node, which is the
/// problem a nearest-node DP solves; without it the dynamics are exact.
pub fn brute_force(inst: &Instance, params: &VehicleParams, fcm: &FuelModel, snap: bool) -> f64 {
    let cands = inst
        .profile
        .p_pl
        .iter()
        .map(|&pl| candidates(pl, inst.profile.dt, inst.mode, inst.grid.n_u, params, fcm).unwrap())
        .collect();
    let lattice = SocGrid {
        min: params.soc_min,
        max: params.soc_max,
        n: inst.grid.n_soc,
        offset: 0.0,
    };
    let e = Enum {
        cands,
        params,
        lattice,
        soc_t: inst.soc_t,
        band: inst.grid.band.unwrap_or(0.5 * lattice.step()),
        pen: inst.mode.penalty(params),
        snap,
    };
    let x0 = if snap { e.snap_to_node(inst.soc0) } else { inst.soc0 };
    e.best(0, x0, false)
}
