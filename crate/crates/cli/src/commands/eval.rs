use std::path::PathBuf;

use plume::data::LabelColumn;
use plume::metrics::roc_auc_from;
use plume::trainer::{score_rows, Checkpoint};
use serde::{Deserialize, Serialize};

use crate::args::EvalArgs;
use crate::config::read_any;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub auc: f64,
    pub rows: usize,
    pub normals: usize,
    pub scores: PathBuf,
}

/// Writes the score dump first, then reports the AUC (which fails on a
/// single-class file).
pub fn run(args: &EvalArgs) -> CliResult<EvalOutcome> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let column = args.label_column.map_or(LabelColumn::Last, LabelColumn::Index);
    let data = read_any(&args.features, column)?;
    let normal = args
        .normal_classes
        .clone()
        .unwrap_or_else(|| checkpoint.meta.normal_classes.clone());
    let y_hat = score_rows(&checkpoint.classifier, &data.features)?;
    let is_normal: Vec<bool> = data.labels.iter().map(|l| normal.contains(l)).collect();

    let scores_path = args.scores.clone().unwrap_or_else(|| {
        let mut p = args.checkpoint.clone().into_os_string();
        p.push(".scores.csv");
        PathBuf::from(p)
    });
    let mut w = csv::Writer::from_path(&scores_path).map_err(|e| CliError::output(&scores_path, e))?;
    w.write_record(["row", "score", "is_normal"]).map_err(|e| CliError::output(&scores_path, e))?;
    for (i, (y, n)) in y_hat.iter().zip(&is_normal).enumerate() {
        // anomaly score: high means anomalous
        w.write_record([i.to_string(), format!("{:?}", 1.0 - y), u8::from(*n).to_string()])
            .map_err(|e| CliError::output(&scores_path, e))?;
    }
    w.flush().map_err(|e| CliError::output(&scores_path, e))?;

    let auc = roc_auc_from(&y_hat, &is_normal)?;
    let outcome = EvalOutcome {
        auc,
        rows: y_hat.len(),
        normals: is_normal.iter().filter(|&&n| n).count(),
        scores: scores_path,
    };
    if args.json {
        println!("{}", serde_json::to_string(&outcome).expect("serializable"));
    } else {
        println!(
            "AUC {:.2}% ({} rows, {} normal); scores in {}",
            100.0 * auc,
            outcome.rows,
            outcome.normals,
            outcome.scores.display()
        );
    }
    Ok(outcome)
}
