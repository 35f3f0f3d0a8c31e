use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::VehicleParams;
use crate::error::{Error, Result};
use crate::interp::{interp1, is_strictly_increasing};

/// Engine fuel consumption model used while the engine runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FuelModel {
    /// ṁ = q_f0 + α_f·P_PS.
    #[default]
    Linear,
    Tabulated(Arc<FuelTable>),
}

impl FuelModel {
    /// Fuel rate with the engine on, kg/s. `p_ps` is assumed in range.
    pub fn running_rate(&self, p_ps: f64, p: &VehicleParams) -> f64 {
        match self {
            FuelModel::Linear => p.q_f0 + p.alpha_f * p_ps,
            FuelModel::Tabulated(t) => interp1(&t.power, &t.rate, p_ps),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, FuelModel::Linear)
    }

    pub fn label(&self) -> String {
        match self {
            FuelModel::Linear => "linear".into(),
            FuelModel::Tabulated(t) => format!("tabulated:{}", t.source),
        }
    }

    /// Synthetic quasilinear model: the linear model with a smooth bulge of
    /// at most 8% peaking at 10 kW. Not measured engine data.
    pub fn synthetic_quasilinear(p: &VehicleParams) -> Self {
        FuelModel::Tabulated(Arc::new(FuelTable::synthetic_quasilinear(p)))
    }
}

/// Tabulated ṁ_f(P_PS) with the engine on.
#[derive(Debug, Clone, PartialEq)]
pub struct FuelTable {
    /// Engine-branch power knots, W.
    pub power: Vec<f64>,
    /// Fuel rate at each knot, kg/s.
    pub rate: Vec<f64>,
    pub source: String,
}

#[derive(Deserialize)]
struct FuelRow {
    #[serde(rename = "P_PS_W")]
    power: f64,
    #[serde(rename = "mdot_kg_s")]
    rate: f64,
}

impl FuelTable {
    pub fn new(power: Vec<f64>, rate: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        let bad = |message: &str| Error::Parse {
            location: source.clone(),
            message: message.into(),
        };
        if power.len() < 2 || power.len() != rate.len() {
            return Err(bad("fuel table needs at least two (P_PS, mdot) rows"));
        }
        if !is_strictly_increasing(&power) {
            return Err(bad("fuel table power column must be strictly increasing"));
        }
        if rate.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(bad("fuel rates must be finite and non-negative"));
        }
        Ok(Self {
            power,
            rate,
            source,
        })
    }

    /// Reads a two-column CSV with header `P_PS_W,mdot_kg_s`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let (mut power, mut rate) = (Vec::new(), Vec::new());
        for (i, row) in rdr.deserialize::<FuelRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), i + 2),
                message: e.to_string(),
            })?;
            power.push(row.power);
            rate.push(row.rate);
        }
        Self::new(power, rate, path.display().to_string())
    }

    pub fn synthetic_quasilinear(p: &VehicleParams) -> Self {
        let n = (p.p_ps_max / 1000.0).round() as usize;
        let power: Vec<f64> = (0..=n).map(|i| i as f64 * p.p_ps_max / n as f64).collect();
        let rate = power
            .iter()
            .map(|&pw| {
                let x = pw / 10e3;
                (p.q_f0 + p.alpha_f * pw) * (1.0 + 0.08 * x * (1.0 - x).exp())
            })
            .collect();
        Self {
            power,
            rate,
            source: "synthetic-quasilinear".into(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("P_PS_W,mdot_kg_s\n");
        for (p, r) in self.power.iter().zip(&self.rate) {
            s.push_str(&format!("{p},{r:e}\n"));
        }
        s
    }
}
