//! Artifact writers. Every CSV starts with `#` comment lines carrying the
//! resolved configuration; every JSON object carries it under `provenance`.
//! Output is a pure function of the inputs, so reruns are byte-identical.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::cycles::LoadProfile;
use crate::dp::ValueSlice;
use crate::error::{Error, Result};
use crate::powertrain::VehicleParams;
use crate::trajectory::Trajectory;
use crate::tuner::Cell;

/// Resolved inputs of a run: ordered run settings plus the vehicle config.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub settings: Vec<(String, String)>,
    pub vehicle: String,
}

impl Provenance {
    pub fn new(params: &VehicleParams) -> Self {
        Self {
            settings: vec![("tool".into(), format!("hevem {}", env!("CARGO_PKG_VERSION")))],
            vehicle: params.to_config_string(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.settings.push((key.into(), value.to_string()));
        self
    }

    /// `# key = value` lines: settings first, then the vehicle config.
    pub fn comment_block(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.settings {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        for line in self.vehicle.lines() {
            s.push_str(&format!("# vehicle.{line}\n"));
        }
        s
    }

    fn to_json(&self) -> Value {
        let settings: Map<String, Value> = self
            .settings
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let vehicle: Map<String, Value> = self
            .vehicle
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), Value::String(v.trim().to_string())))
            .collect();
        let mut m = Map::new();
        m.insert("settings".into(), Value::Object(settings));
        m.insert("vehicle".into(), Value::Object(vehicle));
        Value::Object(m)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_body(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("flushed")).expect("csv output is utf-8")
}

/// Comment block, header line, then one record per row.
pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = prov.comment_block();
    text.push_str(&csv_body(header, rows));
    write_text(path, &text)
}

/// Serialises `value` (which must be a JSON object) with a `provenance`
/// member appended.
pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParams("JSON artifacts must be objects".into()))?;
    obj.insert("provenance".into(), prov.to_json());
    let mut text = serde_json::to_string_pretty(&v).expect("values serialise");
    text.push('\n');
    write_text(path, &text)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const TRAJECTORY_HEADER: &[&str] = &[
    "t_s", "P_PL_W", "P_PS_W", "P_SS_W", "engine_on", "soc", "m_f_kg", "n_restarts", "lambda",
    "emergency", "deficit_W",
];

/// One row per step; `soc` is the SOC at the start of the step. A final
/// row at t = T carries the terminal SOC and total fuel.
pub fn trajectory_rows(t: &Trajectory) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = t
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            vec![
                num(k as f64 * t.dt),
                num(s.p_pl),
                num(s.p_ps),
                num(s.p_ss),
                u8::from(s.engine_on).to_string(),
                num(s.soc),
                num(s.m_f),
                s.n_restarts.to_string(),
                opt(s.lambda),
                u8::from(s.emergency).to_string(),
                num(s.deficit),
            ]
        })
        .collect();
    let last = t.steps.last();
    rows.push(vec![
        num(t.len() as f64 * t.dt),
        String::new(),
        String::new(),
        String::new(),
        u8::from(last.map_or(t.engine_init, |s| s.engine_on)).to_string(),
        num(t.soc_final),
        num(t.fuel()),
        last.map_or(0, |s| s.n_restarts).to_string(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    rows
}

pub fn write_trajectory_csv(path: &Path, prov: &Provenance, t: &Trajectory) -> Result<()> {
    write_csv(path, prov, TRAJECTORY_HEADER, &trajectory_rows(t))
}

pub fn write_summary_json(path: &Path, prov: &Provenance, t: &Trajectory) -> Result<()> {
    write_json(path, prov, &t.summary())
}

pub fn write_surface_csv(path: &Path, prov: &Provenance, cells: &[Cell]) -> Result<()> {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                num(c.p_high / 1e3),
                num(c.p_low / 1e3),
                opt(c.dp.map(|d| d / 1e3)),
                opt(c.fuel_g),
                opt(c.dsoc),
            ]
        })
        .collect();
    write_csv(path, prov, &["pbar_kW", "plow_kW", "dpps_kW", "fuel_g", "dsoc"], &rows)
}

/// Unreachable nodes are written as `inf`.
pub fn write_value_slice_csv(path: &Path, prov: &Provenance, v: &ValueSlice) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..v.soc.len())
        .map(|i| vec![num(v.soc[i]), num(v.v_off[i]), num(v.v_on[i])])
        .collect();
    let prov = prov.clone().with("step", v.k);
    write_csv(path, &prov, &["soc", "V_off_kg", "V_on_kg"], &rows)
}

pub fn write_load_csv(path: &Path, prov: &Provenance, profile: &LoadProfile) -> Result<()> {
    let rows: Vec<Vec<String>> = profile
        .p_pl
        .iter()
        .enumerate()
        .map(|(k, &p)| vec![num(k as f64 * profile.dt), num(p)])
        .collect();
    write_csv(path, prov, &["t_s", "P_PL_W"], &rows)
}
