//! Resolution of command-line flags and the vehicle file into one run setup.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::Args;

use hevem::cycles::{derive_load, load_cycle, synth_load, wltp_load, LoadProfile, SynthKind, WltpStage};
use hevem::io::Provenance;
use hevem::powertrain::{FuelModel, FuelTable, VehicleParams};

use crate::{CliError, CliResult};

/// Vehicle, fuel model and output flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Vehicle file of `key = value unit` lines; unset keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one vehicle key, e.g. `--set "m=1600 kg"`. Repeatable; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Restart penalty coefficient K, s. Overrides the vehicle file.
    #[arg(long)]
    pub k: Option<f64>,
    /// Initial SOC.
    #[arg(long, default_value_t = 0.65)]
    pub soc0: f64,
    /// Fuel model: `linear`, `synthetic`, or a `P_PS_W,mdot_kg_s` CSV path.
    #[arg(long, default_value = "linear")]
    pub fcm: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Exactly one cycle source.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct CycleArgs {
    /// Speed trace CSV with header `t_s,v_mps[,theta_rad]`.
    #[arg(long)]
    pub cycle_file: Option<PathBuf>,
    /// WLTC class 3b stage: L, M, H or E.
    #[arg(long)]
    pub wltp_stage: Option<String>,
    /// Synthetic cycle: `pulse` or `mixed-rural` (seeded by `--seed`).
    #[arg(long)]
    pub synth: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CycleSource {
    File(PathBuf),
    Wltp(WltpStage),
    Synth(SynthKind, u64),
}

impl CycleSource {
    pub fn from_args(a: &CycleArgs, seed: u64) -> CliResult<Self> {
        if let Some(p) = &a.cycle_file {
            return Ok(Self::File(p.clone()));
        }
        if let Some(s) = &a.wltp_stage {
            return Ok(Self::Wltp(WltpStage::from_str(s)?));
        }
        if let Some(s) = &a.synth {
            return Ok(Self::Synth(SynthKind::from_str(s)?, seed));
        }
        Err(CliError::Usage("one cycle source is required".into()))
    }

    /// Parses `wltp:M`, `synth:mixed-rural[:seed]` or `file:PATH`.
    pub fn parse_spec(spec: &str, seed: u64) -> CliResult<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("cycle `{spec}` must look like wltp:M, synth:pulse or file:PATH")))?;
        match kind {
            "wltp" => Ok(Self::Wltp(WltpStage::from_str(rest)?)),
            "synth" => {
                let (name, seed) = match rest.split_once(':') {
                    Some((n, s)) => (
                        n,
                        s.parse()
                            .map_err(|_| CliError::Usage(format!("seed `{s}` is not an integer")))?,
                    ),
                    None => (rest, seed),
                };
                Ok(Self::Synth(SynthKind::from_str(name)?, seed))
            }
            "file" => Ok(Self::File(PathBuf::from(rest))),
            _ => Err(CliError::Usage(format!("unknown cycle kind `{kind}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::File(p) => format!("file:{}", p.display()),
            Self::Wltp(s) => format!("wltp:{}", s.code()),
            Self::Synth(SynthKind::Pulse, _) => "synth:pulse".into(),
            Self::Synth(SynthKind::MixedRural, seed) => format!("synth:mixed-rural:{seed}"),
        }
    }

    pub fn load(&self, p: &VehicleParams) -> CliResult<LoadProfile> {
        Ok(match self {
            Self::File(path) => derive_load(&load_cycle(path)?, p),
            Self::Wltp(s) => wltp_load(*s, p),
            Self::Synth(kind, seed) => synth_load(*kind, *seed, p),
        })
    }
}

pub fn resolve_params(c: &CommonArgs) -> CliResult<VehicleParams> {
    let mut p = match &c.config {
        Some(path) => VehicleParams::from_config_file(path)?,
        None => VehicleParams::default(),
    };
    for o in &c.overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{o}` must be KEY=VALUE")))?;
        p.set(key.trim(), value.trim(), Path::new("."))
            .map_err(|m| CliError::Usage(format!("--set {o}: {m}")))?;
    }
    if let Some(k) = c.k {
        if !(k >= 0.0) {
            return Err(CliError::Usage(format!("K = {k} must be non-negative")));
        }
        p = p.with_k(k);
    }
    p.validate()?;
    Ok(p)
}

pub fn resolve_fcm(spec: &str, p: &VehicleParams) -> CliResult<FuelModel> {
    Ok(match spec {
        "linear" => FuelModel::Linear,
        "synthetic" => FuelModel::synthetic_quasilinear(p),
        path => FuelModel::Tabulated(Arc::new(FuelTable::from_csv(Path::new(path))?)),
    })
}

pub fn check_soc(name: &str, x: f64, p: &VehicleParams) -> CliResult<()> {
    if (p.soc_min..=p.soc_max).contains(&x) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{name} = {x} lies outside the SOC window [{}, {}]",
            p.soc_min, p.soc_max
        )))
    }
}

/// Fully resolved single-cycle run.
pub struct Experiment {
    pub params: VehicleParams,
    pub fcm: FuelModel,
    pub cycle: CycleSource,
    pub profile: LoadProfile,
    pub soc0: f64,
    pub out: PathBuf,
}

impl Experiment {
    pub fn resolve(c: &CommonArgs, cycle: &CycleArgs, seed: u64) -> CliResult<Self> {
        let params = resolve_params(c)?;
        let fcm = resolve_fcm(&c.fcm, &params)?;
        let cycle = CycleSource::from_args(cycle, seed)?;
        let profile = cycle.load(&params)?;
        check_soc("soc0", c.soc0, &params)?;
        Ok(Self {
            params,
            fcm,
            cycle,
            profile,
            soc0: c.soc0,
            out: c.out.clone(),
        })
    }

    pub fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(&self.params)
            .with("command", command)
            .with("cycle", self.cycle.label())
            .with("fcm", self.fcm.label())
            .with("soc0", self.soc0)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}
