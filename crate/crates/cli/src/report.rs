//! Human-readable tables and their JSON counterparts.

use std::fmt::Write as _;

use plume::losses::Guidance;
use plume::perturbator::StrategyKind;
use plume::trainer::{RunReport, TrainConfig};
use serde::{Deserialize, Serialize};

/// AUC in `[0, 1]` shown as a percentage with one decimal.
pub fn pct(auc: f64) -> String {
    format!("{:.1}", 100.0 * auc)
}

pub fn pct_pm(mean: f64, std: f64) -> String {
    format!("{:.1}±{:.1}", 100.0 * mean, 100.0 * std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub seed: u64,
    pub best_auc: f64,
    pub best_epoch: usize,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub normal_classes: Vec<i32>,
    pub runs: Vec<RunSummary>,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub config: TrainConfig,
}

impl TrainSummary {
    pub fn new(config: &TrainConfig, normal_classes: &[i32], reports: &[(RunReport, String)]) -> plume::Result<Self> {
        let aucs: Vec<f64> = reports.iter().map(|(r, _)| r.best_auc).collect();
        let (mean_auc, std_auc) = plume::metrics::aggregate(&aucs)?;
        Ok(Self {
            normal_classes: normal_classes.to_vec(),
            runs: reports
                .iter()
                .map(|(r, path)| RunSummary {
                    run_id: r.run_id,
                    seed: r.seed,
                    best_auc: r.best_auc,
                    best_epoch: r.best_epoch,
                    checkpoint: path.clone(),
                })
                .collect(),
            mean_auc,
            std_auc,
            config: config.clone(),
        })
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>4}  {:>6}  {:>8}  {:>10}", "run", "seed", "AUC (%)", "best epoch");
        for r in &self.runs {
            let _ = writeln!(s, "{:>4}  {:>6}  {:>8}  {:>10}", r.run_id, r.seed, pct(r.best_auc), r.best_epoch);
        }
        let _ = writeln!(
            s,
            "mean ± std over {} run(s): {}",
            self.runs.len(),
            pct_pm(self.mean_auc, self.std_auc)
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub class: String,
    pub aucs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// Table label, e.g. `LinearMap`.
    pub perturbation: String,
    /// Table label: `-`, `✓ (Mean)` or `✓`.
    pub guidance: String,
    pub strategy: StrategyKind,
    pub guidance_mode: Guidance,
    pub cells: Vec<AblationCell>,
    /// Mean of the per-class means.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub columns: Vec<String>,
    pub rows: Vec<AblationRow>,
    pub config: TrainConfig,
}

impl AblationReport {
    /// Structural checks on a report read back from JSON.
    pub fn validate(&self) -> Result<(), String> {
        if self.columns.is_empty() {
            return Err("no class columns".into());
        }
        if self.rows.is_empty() {
            return Err("no rows".into());
        }
        let mut seen = std::collections::HashSet::new();
        for row in &self.rows {
            let key = (row.strategy, row.guidance_mode);
            if !seen.insert(key) {
                return Err(format!("duplicate row {key:?}"));
            }
            if row.perturbation != row.strategy.name() || row.guidance != row.guidance_mode.table_label() {
                return Err(format!("row labels {:?}/{:?} do not match {key:?}", row.perturbation, row.guidance));
            }
            let classes: Vec<&String> = row.cells.iter().map(|c| &c.class).collect();
            if classes != self.columns.iter().collect::<Vec<_>>() {
                return Err(format!("row {key:?} cells {classes:?} do not match columns"));
            }
            for cell in &row.cells {
                if cell.aucs.len() != self.config.runs {
                    return Err(format!("cell {key:?}/{} has {} runs, expected {}", cell.class, cell.aucs.len(), self.config.runs));
                }
                if cell.aucs.iter().chain([&cell.mean]).any(|a| !(0.0..=1.0).contains(a)) {
                    return Err(format!("cell {key:?}/{} has an AUC outside [0, 1]", cell.class));
                }
                if !(cell.std >= 0.0) {
                    return Err(format!("cell {key:?}/{} has std {}", cell.class, cell.std));
                }
            }
            let mean = row.cells.iter().map(|c| c.mean).sum::<f64>() / row.cells.len() as f64;
            if (mean - row.mean).abs() > 1e-12 {
                return Err(format!("row {key:?} mean {} != {}", row.mean, mean));
            }
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut header = vec!["Perturbation".to_string(), "Guidance".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("Mean".into());
        let mut lines = vec![header];
        for row in &self.rows {
            let mut line = vec![row.perturbation.clone(), row.guidance.clone()];
            line.extend(row.cells.iter().map(|c| pct_pm(c.mean, c.std)));
            line.push(pct(row.mean));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for (i, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
                .collect();
            let _ = writeln!(s, "{}", cells.join(" | ").trim_end());
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(s, "{}", rule.join("-+-"));
            }
        }
        s
    }
}
