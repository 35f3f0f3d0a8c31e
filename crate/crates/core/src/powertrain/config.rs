//! Flat `key = value unit` vehicle configuration.
//!
//! Keys are the parameter symbols (`m`, `f_T`, `Q_max`, ...). Every key starts
//! from its built-in default; unknown keys and units that do not match the
//! key's dimension are errors. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::{MotorEfficiency, MotorMap, VehicleParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Dimensionless,
    Mass,
    DragCoeff,
    Accel,
    FuelRate,
    FuelSlope,
    Charge,
    Resistance,
    Voltage,
    Power,
    Time,
    SpecificEnergy,
    Length,
    Path,
}

impl Dim {
    /// Accepted unit spellings and their factor to SI.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::Dimensionless => &[("", 1.0), ("-", 1.0)],
            Dim::Mass => &[("kg", 1.0), ("g", 1e-3), ("t", 1e3)],
            Dim::DragCoeff => &[
                ("kg/m", 1.0),
                ("N*s^2/m^2", 1.0),
                ("N.s^2/m^2", 1.0),
                ("Ns^2/m^2", 1.0),
            ],
            Dim::Accel => &[("m/s^2", 1.0), ("m/s2", 1.0)],
            Dim::FuelRate => &[("kg/s", 1.0), ("g/s", 1e-3)],
            Dim::FuelSlope => &[
                ("kg/J", 1.0),
                ("g/J", 1e-3),
                ("g/kW/s", 1e-6),
                ("g/kJ", 1e-6),
                ("g/kWh", 1e-3 / 3.6e6),
            ],
            Dim::Charge => &[("C", 1.0), ("As", 1.0), ("Ah", 3600.0), ("mAh", 3.6)],
            Dim::Resistance => &[("Ohm", 1.0), ("ohm", 1.0), ("Ω", 1.0), ("mOhm", 1e-3)],
            Dim::Voltage => &[("V", 1.0)],
            Dim::Power => &[("W", 1.0), ("kW", 1e3)],
            Dim::Time => &[("s", 1.0)],
            Dim::SpecificEnergy => &[("J/kg", 1.0), ("kJ/kg", 1e3), ("MJ/kg", 1e6)],
            Dim::Length => &[("m", 1.0), ("mm", 1e-3)],
            Dim::Path => &[],
        }
    }

    fn si_unit(self) -> &'static str {
        self.units().first().map(|u| u.0).unwrap_or("")
    }
}

/// Recognised configuration keys in canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigKey {
    pub name: &'static str,
    dim: Dim,
}

const KEYS: &[ConfigKey] = &[
    ConfigKey { name: "m", dim: Dim::Mass },
    ConfigKey { name: "f_T", dim: Dim::Dimensionless },
    ConfigKey { name: "f_D", dim: Dim::DragCoeff },
    ConfigKey { name: "g", dim: Dim::Accel },
    ConfigKey { name: "eta_t", dim: Dim::Dimensionless },
    ConfigKey { name: "eta_i", dim: Dim::Dimensionless },
    ConfigKey { name: "eta_r", dim: Dim::Dimensionless },
    ConfigKey { name: "eta_dc", dim: Dim::Dimensionless },
    ConfigKey { name: "eta_m", dim: Dim::Dimensionless },
    ConfigKey { name: "eta_m_map", dim: Dim::Path },
    ConfigKey { name: "q_f0", dim: Dim::FuelRate },
    ConfigKey { name: "alpha_f", dim: Dim::FuelSlope },
    ConfigKey { name: "Q_max", dim: Dim::Charge },
    ConfigKey { name: "R_b", dim: Dim::Resistance },
    ConfigKey { name: "V_oc", dim: Dim::Voltage },
    ConfigKey { name: "SOC_min", dim: Dim::Dimensionless },
    ConfigKey { name: "SOC_max", dim: Dim::Dimensionless },
    ConfigKey { name: "P_SS_min", dim: Dim::Power },
    ConfigKey { name: "P_SS_max", dim: Dim::Power },
    ConfigKey { name: "P_PS_max", dim: Dim::Power },
    ConfigKey { name: "K", dim: Dim::Time },
    ConfigKey { name: "q_HV", dim: Dim::SpecificEnergy },
    ConfigKey { name: "g_t", dim: Dim::Dimensionless },
    ConfigKey { name: "r_w", dim: Dim::Length },
];

impl ConfigKey {
    pub fn all() -> &'static [ConfigKey] {
        KEYS
    }

    pub fn lookup(name: &str) -> Option<ConfigKey> {
        KEYS.iter().copied().find(|k| k.name == name)
    }
}

/// Parses a configuration text on top of the defaults and validates the result.
/// Relative map paths resolve against `base_dir`.
pub fn parse_config(text: &str, origin: &str, base_dir: &Path) -> Result<VehicleParams> {
    let mut p = VehicleParams::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let location = format!("{origin}:{}", lineno + 1);
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            location: location.clone(),
            message: format!("expected `key = value unit`, got `{line}`"),
        })?;
        p.set(key.trim(), value.trim(), base_dir)
            .map_err(|message| Error::Parse { location, message })?;
    }
    p.validate()?;
    Ok(p)
}

fn parse_quantity(raw: &str, dim: Dim) -> Result<f64, String> {
    let mut parts = raw.splitn(2, char::is_whitespace);
    let num = parts.next().unwrap_or("");
    let unit = parts.next().unwrap_or("").trim();
    let value: f64 = num
        .parse()
        .map_err(|_| format!("`{num}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{num}` is not finite"));
    }
    match dim.units().iter().find(|(u, _)| *u == unit) {
        Some((_, factor)) => Ok(value * factor),
        None if unit.is_empty() => Err(format!(
            "missing unit (expected one of {})",
            unit_list(dim)
        )),
        None => Err(format!("unit `{unit}` does not fit (expected one of {})", unit_list(dim))),
    }
}

fn unit_list(dim: Dim) -> String {
    dim.units()
        .iter()
        .map(|(u, _)| if u.is_empty() { "<none>" } else { u })
        .collect::<Vec<_>>()
        .join(", ")
}

impl VehicleParams {
    /// Assigns one configuration entry, e.g. `set("Q_max", "5 Ah", dir)`.
    /// Does not validate the whole parameter set.
    pub fn set(&mut self, key: &str, raw: &str, base_dir: &Path) -> Result<(), String> {
        let spec = ConfigKey::lookup(key).ok_or_else(|| format!("unknown key `{key}`"))?;
        if spec.dim == Dim::Path {
            let path = base_dir.join(raw);
            let map = MotorMap::from_csv(&path).map_err(|e| e.to_string())?;
            self.eta_m = MotorEfficiency::Map(Arc::new(map));
            return Ok(());
        }
        let v = parse_quantity(raw, spec.dim)?;
        let slot = match key {
            "m" => &mut self.m,
            "f_T" => &mut self.f_t,
            "f_D" => &mut self.f_d,
            "g" => &mut self.g,
            "eta_t" => &mut self.eta_t,
            "eta_i" => &mut self.eta_i,
            "eta_r" => &mut self.eta_r,
            "eta_dc" => &mut self.eta_dc,
            "eta_m" => {
                self.eta_m = MotorEfficiency::Constant(v);
                return Ok(());
            }
            "q_f0" => &mut self.q_f0,
            "alpha_f" => &mut self.alpha_f,
            "Q_max" => &mut self.q_max,
            "R_b" => &mut self.r_b,
            "V_oc" => &mut self.v_oc,
            "SOC_min" => &mut self.soc_min,
            "SOC_max" => &mut self.soc_max,
            "P_SS_min" => &mut self.p_ss_min,
            "P_SS_max" => &mut self.p_ss_max,
            "P_PS_max" => &mut self.p_ps_max,
            "K" => &mut self.k,
            "q_HV" => &mut self.q_hv,
            "g_t" => &mut self.g_t,
            "r_w" => &mut self.r_w,
            _ => unreachable!("key table and setter out of sync"),
        };
        *slot = v;
        Ok(())
    }

    /// Serialises every parameter in SI units; re-parses to an equal value.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let v = match key.name {
                "m" => self.m,
                "f_T" => self.f_t,
                "f_D" => self.f_d,
                "g" => self.g,
                "eta_t" => self.eta_t,
                "eta_i" => self.eta_i,
                "eta_r" => self.eta_r,
                "eta_dc" => self.eta_dc,
                "eta_m" | "eta_m_map" => {
                    match (&self.eta_m, key.name) {
                        (MotorEfficiency::Constant(e), "eta_m") => {
                            let _ = writeln!(out, "eta_m = {e}");
                        }
                        (MotorEfficiency::Map(m), "eta_m_map") => {
                            let _ = writeln!(out, "eta_m_map = {}", m.source);
                        }
                        _ => {}
                    }
                    continue;
                }
                "q_f0" => self.q_f0,
                "alpha_f" => self.alpha_f,
                "Q_max" => self.q_max,
                "R_b" => self.r_b,
                "V_oc" => self.v_oc,
                "SOC_min" => self.soc_min,
                "SOC_max" => self.soc_max,
                "P_SS_min" => self.p_ss_min,
                "P_SS_max" => self.p_ss_max,
                "P_PS_max" => self.p_ps_max,
                "K" => self.k,
                "q_HV" => self.q_hv,
                "g_t" => self.g_t,
                "r_w" => self.r_w,
                _ => unreachable!(),
            };
            let unit = key.dim.si_unit();
            if unit.is_empty() {
                let _ = writeln!(out, "{} = {v}", key.name);
            } else {
                let _ = writeln!(out, "{} = {v} {unit}", key.name);
            }
        }
        out
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        parse_config(&text, &path.display().to_string(), base)
    }
}
