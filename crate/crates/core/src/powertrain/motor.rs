use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::interp::{bracket, is_strictly_increasing};

/// Motor efficiency on a rectangular (shaft speed, torque) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorMap {
    /// rad/s
    pub speed: Vec<f64>,
    /// N·m
    pub torque: Vec<f64>,
    /// Row-major by speed: `eta[i * torque.len() + j]`.
    pub eta: Vec<f64>,
    pub source: String,
}

#[derive(Deserialize)]
struct MapRow {
    speed_radps: f64,
    #[serde(rename = "torque_Nm")]
    torque_nm: f64,
    eta: f64,
}

impl MotorMap {
    /// Reads a 3-column CSV (`speed_radps,torque_Nm,eta`) covering a full grid
    /// in any row order.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, row) in rdr.deserialize::<MapRow>().enumerate() {
            rows.push(row.map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), i + 2),
                message: e.to_string(),
            })?);
        }
        let bad = |message: String| Error::Parse {
            location: path.display().to_string(),
            message,
        };
        let mut speed: Vec<f64> = rows.iter().map(|r| r.speed_radps).collect();
        let mut torque: Vec<f64> = rows.iter().map(|r| r.torque_nm).collect();
        for v in [&mut speed, &mut torque] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let (ns, nt) = (speed.len(), torque.len());
        if ns < 2 || nt < 2 || rows.len() != ns * nt {
            return Err(bad(format!(
                "expected a full grid, got {} rows for {ns} speeds x {nt} torques",
                rows.len()
            )));
        }
        let mut eta = vec![f64::NAN; ns * nt];
        for r in &rows {
            if !(r.eta > 0.0 && r.eta <= 1.0) {
                return Err(bad(format!("efficiency {} outside (0, 1]", r.eta)));
            }
            let i = speed.partition_point(|&s| s < r.speed_radps);
            let j = torque.partition_point(|&t| t < r.torque_nm);
            eta[i * nt + j] = r.eta;
        }
        if eta.iter().any(|e| e.is_nan()) {
            return Err(bad("duplicate grid point leaves a hole in the map".into()));
        }
        debug_assert!(is_strictly_increasing(&speed) && is_strictly_increasing(&torque));
        Ok(Self {
            speed,
            torque,
            eta,
            source: path.display().to_string(),
        })
    }

    /// Bilinear lookup, clamped to the grid edges.
    pub fn efficiency(&self, omega: f64, torque: f64) -> f64 {
        let nt = self.torque.len();
        let (i, u) = bracket(&self.speed, omega);
        let (j, w) = bracket(&self.torque, torque);
        let at = |a: usize, b: usize| self.eta[a * nt + b];
        let lo = at(i, j) * (1.0 - w) + at(i, j + 1) * w;
        let hi = at(i + 1, j) * (1.0 - w) + at(i + 1, j + 1) * w;
        lo * (1.0 - u) + hi * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(
            &path,
            "speed_radps,torque_Nm,eta\n100,0,0.8\n0,0,0.7\n0,50,0.8\n100,50,0.9\n",
        )
        .unwrap();
        let m = MotorMap::from_csv(&path).unwrap();
        assert!((m.efficiency(50.0, 25.0) - 0.8).abs() < 1e-12);
        assert!((m.efficiency(-5.0, 0.0) - 0.7).abs() < 1e-12);
        assert!((m.efficiency(500.0, 500.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn incomplete_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "speed_radps,torque_Nm,eta\n0,0,0.7\n0,50,0.8\n100,50,0.9\n")
            .unwrap();
        assert!(MotorMap::from_csv(&path).is_err());
    }
}
