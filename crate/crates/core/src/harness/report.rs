//! Experiment reports: JSON for machines, CSV tables for plotting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Representation;
use super::experiments::ExperimentSpec;
use crate::error::Result;

/// One (train set, test domain, representation, device count) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub train_domains: Vec<String>,
    pub test_domain: String,
    pub representation: Representation,
    pub n_devices: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    pub epoch_train_accuracy: Vec<f64>,
    pub epoch_test_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub toolkit_version: String,
    pub wall_time_s: f64,
}

/// Full experiment output. The spec is embedded so a report is
/// self-describing and reproducible; wall time is the only field two
/// identical runs may disagree on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellReport>,
    pub meta: ReportMeta,
}

impl ExperimentReport {
    pub fn new(spec: ExperimentSpec, cells: Vec<CellReport>, wall_time_s: f64) -> Self {
        Self {
            spec,
            cells,
            meta: ReportMeta {
                toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time_s,
            },
        }
    }

    pub fn cell(&self, representation: Representation, test_domain: &str) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.representation == representation && c.test_domain == test_domain)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall-time field zeroed; two runs of the same spec
    /// must agree on this byte-for-byte.
    pub fn canonical_json(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.meta.wall_time_s = 0.0;
        Ok(serde_json::to_string_pretty(&clone)?)
    }

    /// Write `report.json`, an accuracy table `cells.csv`, and one
    /// confusion CSV per cell into `dir`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;

        let mut table = String::from(
            "representation,train_domains,test_domain,n_devices,accuracy\n",
        );
        for c in &self.cells {
            table.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                c.representation,
                c.train_domains.join("+"),
                c.test_domain,
                c.n_devices,
                c.accuracy
            ));
        }
        std::fs::write(dir.join("cells.csv"), table)?;

        for c in &self.cells {
            let mut csv = String::new();
            for row in &c.confusion {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                csv.push_str(&line.join(","));
                csv.push('\n');
            }
            let name = format!(
                "confusion_{}_{}_{}dev_{}.csv",
                c.representation,
                c.train_domains.join("-"),
                c.n_devices,
                c.test_domain
            );
            std::fs::write(dir.join(name), csv)?;
        }
        Ok(())
    }
}
