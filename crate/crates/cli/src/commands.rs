//! Subcommand implementations. Each writes its artifacts under `--out`.

use std::path::Path;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use hevem::analytic_pmp::{solve_constrained, SssModel};
use hevem::dp::{DpGrid, DpMode, DpSolver};
use hevem::efc::{
    cs_necessity_scan, identify_factors, scan_argmin, symmetric_offsets, EquivalenceFactors,
};
use hevem::io::{self, Provenance};
use hevem::rulebased::{simulate as run_controller, xos_cs_threshold, Controller, HptsParams};
use hevem::trajectory::Trajectory;
use hevem::tuner::{tune as run_tune, TuneSpec};

use crate::experiment::{check_soc, resolve_fcm, resolve_params, CommonArgs, CycleArgs, CycleSource, Experiment};
use crate::{CliError, CliResult};

#[derive(Args, Debug, Clone)]
pub struct DpGridArgs {
    /// SOC nodes of the DP lattice.
    #[arg(long, default_value_t = DpGrid::default().n_soc)]
    pub n_soc: usize,
    /// Engine-on control samples per step.
    #[arg(long, default_value_t = DpGrid::default().n_u)]
    pub n_u: usize,
}

impl DpGridArgs {
    fn grid(&self) -> DpGrid {
        DpGrid {
            n_soc: self.n_soc,
            n_u: self.n_u,
            ..DpGrid::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartStop {
    /// Engine always on.
    Off,
    /// Free restarts.
    Lossless,
    /// Each restart costs K·q_f0.
    Penalized,
}

fn dp_mode(s: StartStop, k: f64) -> DpMode {
    match s {
        StartStop::Off => DpMode::Off,
        StartStop::Lossless => DpMode::Lossless,
        StartStop::Penalized => DpMode::Penalized { k },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    Hpts,
    Xos,
    Ecms,
    Dp,
    Pmp,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cycle: CycleArgs,
    /// Seed for synthetic cycles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub controller: ControllerKind,
    /// HPTS upper threshold, kW.
    #[arg(long)]
    pub p_high: Option<f64>,
    /// HPTS lower threshold, kW.
    #[arg(long)]
    pub p_low: Option<f64>,
    /// HPTS engine-on battery offset, kW.
    #[arg(long)]
    pub dpps: Option<f64>,
    /// XOS threshold, kW; searched for charge sustenance when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// ECMS discharge equivalence factor.
    #[arg(long)]
    pub s_d: Option<f64>,
    /// ECMS charge equivalence factor; defaults to the discharge factor.
    #[arg(long)]
    pub s_c: Option<f64>,
    /// Terminal SOC for DP and PMP; defaults to soc0.
    #[arg(long)]
    pub soc_t: Option<f64>,
    /// Start-stop treatment for DP (penalized) and PMP (off or lossless).
    #[arg(long, value_enum)]
    pub sss: Option<StartStop>,
    #[command(flatten)]
    pub grid: DpGridArgs,
}

fn need(v: Option<f64>, flag: &str, ctrl: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::Usage(format!("{ctrl} needs --{flag}")))
}

fn write_run(e: &Experiment, prov: &Provenance, t: &Trajectory) -> CliResult<()> {
    io::write_trajectory_csv(&e.path("trajectory.csv"), prov, t)?;
    io::write_summary_json(&e.path("summary.json"), prov, t)?;
    let s = t.summary();
    println!(
        "fuel {:.3} g, ΔSOC {:+.5}, restarts {}, engine on {:.0} s -> {}",
        s.fuel_g,
        s.dsoc,
        s.n_restarts,
        s.engine_on_s,
        e.out.display()
    );
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let e = Experiment::resolve(&a.common, &a.cycle, a.seed)?;
    let p = &e.params;
    let soc_t = a.soc_t.unwrap_or(e.soc0);
    check_soc("soc-t", soc_t, p)?;
    let mut prov = e.provenance("simulate");
    let t = match a.controller {
        ControllerKind::Hpts => {
            let hp = HptsParams::new(
                need(a.p_high, "p-high", "hpts")? * 1e3,
                need(a.p_low, "p-low", "hpts")? * 1e3,
                need(a.dpps, "dpps", "hpts")? * 1e3,
            );
            hp.validate(p)?;
            let c = Controller::Hpts(hp);
            prov = prov.with("controller", c.label());
            run_controller(&e.profile, &c, e.soc0, p, &e.fcm)?
        }
        ControllerKind::Xos => {
            let (threshold, t) = match a.threshold {
                Some(th) => {
                    let c = Controller::Xos { threshold: th * 1e3 };
                    (th * 1e3, run_controller(&e.profile, &c, e.soc0, p, &e.fcm)?)
                }
                None => xos_cs_threshold(&e.profile, e.soc0, p, &e.fcm)?,
            };
            prov = prov.with("controller", Controller::Xos { threshold }.label());
            t
        }
        ControllerKind::Ecms => {
            let s_d = need(a.s_d, "s-d", "ecms")?;
            let c = Controller::Ecms {
                s_d,
                s_c: a.s_c.unwrap_or(s_d),
            };
            prov = prov.with("controller", c.label());
            run_controller(&e.profile, &c, e.soc0, p, &e.fcm)?
        }
        ControllerKind::Dp => {
            let mode = dp_mode(a.sss.unwrap_or(StartStop::Penalized), p.k);
            prov = prov
                .with("controller", format!("DP {mode}"))
                .with("soc_t", soc_t)
                .with("grid", format!("{}x{}", a.grid.n_soc, a.grid.n_u));
            hevem::dp::dp_solve(&e.profile, e.soc0, soc_t, mode, a.grid.grid(), p, &e.fcm)?
        }
        ControllerKind::Pmp => {
            if !e.fcm.is_linear() {
                return Err(CliError::Usage("the closed-form law needs --fcm linear".into()));
            }
            let model = match a.sss.unwrap_or(StartStop::Off) {
                StartStop::Off => SssModel::Off,
                StartStop::Lossless => SssModel::Lossless,
                StartStop::Penalized => {
                    return Err(CliError::Usage("pmp supports --sss off or lossless".into()))
                }
            };
            let sol = solve_constrained(&e.profile, e.soc0, soc_t, model, p)?;
            let lambdas: Vec<String> = sol.arcs.iter().map(|a| format!("{:.6}", a.lambda)).collect();
            prov = prov
                .with("controller", format!("PMP {model}"))
                .with("soc_t", soc_t)
                .with("lambda", lambdas.join(" "));
            sol.trajectory
        }
    };
    write_run(&e, &prov, &t)
}

#[derive(Args, Debug)]
pub struct DpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Terminal SOC; defaults to soc0.
    #[arg(long)]
    pub soc_t: Option<f64>,
    #[arg(long, value_enum, default_value = "penalized")]
    pub sss: StartStop,
    #[command(flatten)]
    pub grid: DpGridArgs,
    /// Steps whose value function is exported, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub slices: Vec<usize>,
}

pub fn dp(a: &DpArgs) -> CliResult<()> {
    let e = Experiment::resolve(&a.common, &a.cycle, a.seed)?;
    let p = &e.params;
    let soc_t = a.soc_t.unwrap_or(e.soc0);
    check_soc("soc-t", soc_t, p)?;
    if let Some(&k) = a.slices.iter().find(|&&k| k > e.profile.len()) {
        return Err(CliError::Usage(format!(
            "slice {k} beyond the horizon of {} steps",
            e.profile.len()
        )));
    }
    let mode = dp_mode(a.sss, p.k);
    let prov = e
        .provenance("dp")
        .with("mode", mode)
        .with("soc_t", soc_t)
        .with("grid", format!("{}x{}", a.grid.n_soc, a.grid.n_u));
    let mut solver = DpSolver::new(&e.profile, soc_t, mode, a.grid.grid(), p, &e.fcm)?;
    solver.solve()?;
    for &k in &a.slices {
        io::write_value_slice_csv(&e.path(&format!("value_{k}.csv")), &prov, &solver.value_slice(k)?)?;
    }
    let t = solver.rollout(e.soc0)?;
    write_run(&e, &prov, &t)
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threshold grid spacing, kW.
    #[arg(long, default_value_t = 1.25)]
    pub grid_step: f64,
    /// Use an n×n square grid instead of the stepped one.
    #[arg(long)]
    pub square: Option<usize>,
    /// Largest accepted |ΔSOC|.
    #[arg(long, default_value_t = 1e-3)]
    pub cs_tol: f64,
}

#[derive(Serialize)]
struct Optimum {
    p_high_kw: f64,
    p_low_kw: f64,
    dpps_kw: f64,
    fuel_g: f64,
    dsoc: f64,
    cells: usize,
    charge_sustaining_cells: usize,
}

pub fn tune(a: &TuneArgs) -> CliResult<()> {
    let e = Experiment::resolve(&a.common, &a.cycle, a.seed)?;
    let mut spec = match a.square {
        Some(n) if n >= 2 => TuneSpec::square(n),
        Some(n) => return Err(CliError::Usage(format!("--square {n} needs at least 2"))),
        None if a.grid_step > 0.0 => TuneSpec::stepped(5e3, 40e3, a.grid_step * 1e3),
        None => return Err(CliError::Usage("--grid-step must be positive".into())),
    };
    spec.cs_tol = a.cs_tol;
    let prov = e
        .provenance("tune")
        .with("grid", a.square.map_or(format!("step {} kW", a.grid_step), |n| format!("square {n}")))
        .with("cs_tol", a.cs_tol);
    let r = run_tune(&e.profile, &spec, e.soc0, &e.params, &e.fcm)?;
    io::write_surface_csv(&e.path("surface.csv"), &prov, &r.surface)?;
    let best = Optimum {
        p_high_kw: r.best.p_high / 1e3,
        p_low_kw: r.best.p_low / 1e3,
        dpps_kw: r.best.dp / 1e3,
        fuel_g: r.fuel() * 1e3,
        dsoc: r.trajectory.dsoc(),
        cells: r.surface.len(),
        charge_sustaining_cells: r.surface.iter().filter(|c| c.cs).count(),
    };
    io::write_json(&e.path("optimum.json"), &prov, &best)?;
    io::write_trajectory_csv(&e.path("trajectory.csv"), &prov, &r.trajectory)?;
    println!(
        "HPTS ({:.2}, {:.2}, {:.3}) kW: {:.3} g, ΔSOC {:+.2e} -> {}",
        best.p_high_kw,
        best.p_low_kw,
        best.dpps_kw,
        best.fuel_g,
        best.dsoc,
        e.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EfcArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct BoundCheck {
    s_d_min: f64,
    s_c_max: f64,
    holds: bool,
}

#[derive(Serialize)]
struct FactorsOut {
    cycle: String,
    #[serde(rename = "S_d")]
    s_d: f64,
    #[serde(rename = "S_c")]
    s_c: f64,
    du: f64,
    r2_d: f64,
    r2_c: f64,
    squared_bounds: BoundCheck,
    single_pass_bounds: BoundCheck,
}

fn check(f: &EquivalenceFactors, (d, c): (f64, f64)) -> BoundCheck {
    BoundCheck {
        s_d_min: d,
        s_c_max: c,
        holds: f.s_d > d && f.s_c < c,
    }
}

fn factors_out(label: String, f: &EquivalenceFactors, e: &Experiment) -> FactorsOut {
    FactorsOut {
        cycle: label,
        s_d: f.s_d,
        s_c: f.s_c,
        du: f.du,
        r2_d: f.r2_d,
        r2_c: f.r2_c,
        squared_bounds: check(f, EquivalenceFactors::squared_bounds(&e.params)),
        single_pass_bounds: check(f, EquivalenceFactors::single_pass_bounds(&e.params)),
    }
}

pub fn efc(a: &EfcArgs) -> CliResult<()> {
    let e = Experiment::resolve(&a.common, &a.cycle, a.seed)?;
    let prov = e.provenance("efc");
    let (f, sweep) = identify_factors(&e.profile, e.soc0, &e.params, &e.fcm)?;
    let out = factors_out(e.cycle.label(), &f, &e);
    io::write_json(&e.path("factors.json"), &prov, &out)?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|s| vec![s.u.to_string(), s.e_e.to_string(), s.e_f.to_string()])
        .collect();
    io::write_csv(&e.path("sweep.csv"), &prov, &["u", "E_e_J", "E_f_J"], &rows)?;
    println!(
        "S_d {:.4} (R² {:.6}), S_c {:.4} (R² {:.6}), Δu {}; squared bounds {}, single-pass bounds {} -> {}",
        f.s_d,
        f.r2_d,
        f.s_c,
        f.r2_c,
        f.du,
        if out.squared_bounds.holds { "hold" } else { "violated" },
        if out.single_pass_bounds.holds { "hold" } else { "violated" },
        e.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct CsScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ladder spacing in SOC.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// Rungs on each side of soc0.
    #[arg(long, default_value_t = 4)]
    pub rungs: usize,
    #[command(flatten)]
    pub grid: DpGridArgs,
}

pub fn cs_scan(a: &CsScanArgs) -> CliResult<()> {
    let e = Experiment::resolve(&a.common, &a.cycle, a.seed)?;
    if !(a.step > 0.0) {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    let (f, _) = identify_factors(&e.profile, e.soc0, &e.params, &e.fcm)?;
    let prov = e
        .provenance("cs-scan")
        .with("S_d", f.s_d)
        .with("S_c", f.s_c)
        .with("step", a.step)
        .with("grid", format!("{}x{}", a.grid.n_soc, a.grid.n_u));
    let rows = cs_necessity_scan(
        &e.profile,
        e.soc0,
        &symmetric_offsets(a.step, a.rungs),
        &f,
        a.grid.grid(),
        &e.params,
        &e.fcm,
    )?;
    let best = scan_argmin(&rows).ok_or(hevem::Error::AllInfeasible)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.soc_t.to_string(),
                r.dsoc.to_string(),
                r.fuel_g.to_string(),
                r.efc_g.to_string(),
                u8::from(std::ptr::eq(r, best)).to_string(),
            ]
        })
        .collect();
    io::write_csv(
        &e.path("cs_scan.csv"),
        &prov,
        &["soc_t", "dsoc", "fuel_g", "efc_g", "argmin"],
        &table,
    )?;
    let at_cs = best.dsoc.abs() <= a.step;
    println!(
        "minimum m_efc {:.3} g at ΔSOC {:+.4}: {} -> {}",
        best.efc_g,
        best.dsoc,
        if at_cs {
            "charge sustaining within one rung"
        } else {
            "NOT at ΔSOC = 0"
        },
        e.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchController {
    Dp,
    Hpts,
    Xos,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cycles: wltp:M, synth:pulse, synth:mixed-rural[:seed] or file:PATH.
    #[arg(long, value_delimiter = ',', default_value = "wltp:L,wltp:M,wltp:H,wltp:E")]
    pub cycles: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dp,hpts,xos")]
    pub controllers: Vec<BenchController>,
    /// Fuel models, as for --fcm.
    #[arg(long, value_delimiter = ',')]
    pub fcms: Vec<String>,
    /// Restart-penalty sweep `start:stop:step`; writes k_sweep.csv.
    #[arg(long)]
    pub k_sweep: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: DpGridArgs,
}

fn parse_sweep(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("K sweep `{s}` must be start:stop:step"));
    let v: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [a, b, h] = v[..] else { return Err(bad()) };
    if !(h > 0.0 && a >= 0.0 && b >= a) {
        return Err(bad());
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + h * i as f64).collect())
}

struct Job {
    cycle: usize,
    fcm: usize,
    k: f64,
    ctrl: BenchController,
}

struct JobResult {
    traj: Option<Trajectory>,
    status: String,
}

pub fn benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    let params = resolve_params(&a.common)?;
    check_soc("soc0", a.common.soc0, &params)?;
    let cycles: Vec<CycleSource> = a
        .cycles
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| CycleSource::parse_spec(s.trim(), a.seed))
        .collect::<CliResult<_>>()?;
    let fcm_specs: Vec<String> = if a.fcms.is_empty() {
        vec![a.common.fcm.clone()]
    } else {
        a.fcms.clone()
    };
    let fcms = fcm_specs
        .iter()
        .map(|s| resolve_fcm(s, &params))
        .collect::<CliResult<Vec<_>>>()?;
    if cycles.is_empty() || a.controllers.is_empty() || fcms.is_empty() {
        return Err(CliError::Usage("benchmark matrix is empty".into()));
    }
    let ks = match &a.k_sweep {
        Some(s) => parse_sweep(s)?,
        None => vec![params.k],
    };
    let profiles = cycles
        .iter()
        .map(|c| c.load(&params))
        .collect::<CliResult<Vec<_>>>()?;
    let soc0 = a.common.soc0;
    let grid = a.grid.grid();

    let mut jobs = Vec::new();
    for cycle in 0..cycles.len() {
        for fcm in 0..fcms.len() {
            for &k in &ks {
                for &ctrl in &a.controllers {
                    jobs.push(Job { cycle, fcm, k, ctrl });
                }
            }
        }
    }
    // Results keep matrix order regardless of completion order.
    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|j| {
            let p = params.with_k(j.k);
            let (prof, fcm) = (&profiles[j.cycle], &fcms[j.fcm]);
            let run = match j.ctrl {
                BenchController::Dp => {
                    hevem::dp::dp_solve(prof, soc0, soc0, DpMode::Penalized { k: j.k }, grid, &p, fcm)
                        .map(|t| (t, "DP".to_string()))
                }
                BenchController::Hpts => run_tune(prof, &TuneSpec::default(), soc0, &p, fcm).map(|r| {
                    let label = Controller::Hpts(r.best).label();
                    (r.trajectory, label)
                }),
                BenchController::Xos => xos_cs_threshold(prof, soc0, &p, fcm)
                    .map(|(th, t)| (t, Controller::Xos { threshold: th }.label())),
            };
            match run {
                Ok((t, label)) => JobResult {
                    traj: Some(t),
                    status: format!("ok {label}"),
                },
                Err(e) => JobResult {
                    traj: None,
                    status: format!("failed: {e}"),
                },
            }
        })
        .collect();

    let dp_fuel = |j: &Job| -> Option<f64> {
        jobs.iter().zip(&results).find_map(|(o, r)| {
            (o.cycle == j.cycle && o.fcm == j.fcm && o.k == j.k && o.ctrl == BenchController::Dp)
                .then(|| r.traj.as_ref().map(|t| t.fuel()))
                .flatten()
        })
    };
    let name = |c: BenchController| match c {
        BenchController::Dp => "DP",
        BenchController::Hpts => "HPTS",
        BenchController::Xos => "XOS",
    };
    let mut rows = Vec::new();
    let mut failures = 0;
    for (j, r) in jobs.iter().zip(&results) {
        let (fuel, dsoc, restarts) = match &r.traj {
            Some(t) => {
                let s = t.summary();
                (s.fuel_g.to_string(), s.dsoc.to_string(), s.n_restarts.to_string())
            }
            None => {
                failures += 1;
                Default::default()
            }
        };
        let pct = match (&r.traj, dp_fuel(j)) {
            (Some(t), Some(d)) => ((t.fuel() - d) / d * 100.0).to_string(),
            _ => String::new(),
        };
        rows.push(vec![
            cycles[j.cycle].label(),
            fcm_specs[j.fcm].clone(),
            name(j.ctrl).to_string(),
            j.k.to_string(),
            fuel,
            dsoc,
            restarts,
            pct,
            r.status.clone(),
        ]);
    }
    let prov = Provenance::new(&params)
        .with("command", "benchmark")
        .with("soc0", soc0)
        .with("cycles", cycles.iter().map(|c| c.label()).collect::<Vec<_>>().join(" "))
        .with("fcms", fcm_specs.join(" "))
        .with("grid", format!("{}x{}", a.grid.n_soc, a.grid.n_u));
    let out = &a.common.out;
    io::write_csv(
        &out.join("benchmark.csv"),
        &prov,
        &["cycle", "fcm", "controller", "K", "fuel_g", "dsoc", "n_restarts", "pct_vs_dp", "status"],
        &rows,
    )?;
    if a.k_sweep.is_some() {
        write_k_sweep(&out.join("k_sweep.csv"), &prov, a, &jobs, &results, &cycles, &fcm_specs)?;
    }
    for r in &rows {
        println!("{:<22} {:<10} {:<5} K={:<5} {:>10} g  {:>8}%  {}", r[0], r[1], r[2], r[3], short(&r[4]), short(&r[7]), r[8]);
    }
    if failures > 0 {
        eprintln!("{failures} of {} runs failed; see the status column", rows.len());
    }
    Ok(())
}

fn short(s: &str) -> String {
    s.parse::<f64>().map_or_else(|_| s.to_string(), |v| format!("{v:.3}"))
}

/// One row per (cycle, fuel model, K) with one fuel column per controller.
fn write_k_sweep(
    path: &Path,
    prov: &Provenance,
    a: &BenchmarkArgs,
    jobs: &[Job],
    results: &[JobResult],
    cycles: &[CycleSource],
    fcm_specs: &[String],
) -> CliResult<()> {
    let per_row = a.controllers.len();
    let mut header = vec!["cycle".to_string(), "fcm".into(), "K".into()];
    header.extend(a.controllers.iter().map(|c| format!("{c:?}_g").to_lowercase()));
    let rows: Vec<Vec<String>> = jobs
        .chunks(per_row)
        .zip(results.chunks(per_row))
        .map(|(js, rs)| {
            let mut row = vec![
                cycles[js[0].cycle].label(),
                fcm_specs[js[0].fcm].clone(),
                js[0].k.to_string(),
            ];
            row.extend(
                rs.iter()
                    .map(|r| r.traj.as_ref().map_or(String::new(), |t| (t.fuel() * 1e3).to_string())),
            );
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_csv(path, prov, &header, &rows)?;
    Ok(())
}
