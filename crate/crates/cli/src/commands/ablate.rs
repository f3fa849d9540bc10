use plume::losses::Guidance;
use plume::perturbator::StrategyKind;
use plume::trainer::{ablation_grid, run_suite};

use super::{create_dir, load_split, write_json, write_text};
use crate::args::AblateArgs;
use crate::config::resolve;
use crate::error::CliResult;
use crate::report::{AblationCell, AblationReport, AblationRow};

pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TXT: &str = "ablation.txt";

/// Each entry of `--classes` is trained as its own one-class problem. Without
/// it, the normal class set forms a single column.
pub fn run(args: &AblateArgs) -> CliResult<AblationReport> {
    let mut settings = resolve(&args.data, &args.overrides)?;
    let strategies: Vec<StrategyKind> = args
        .strategies
        .clone()
        .or_else(|| settings.extras.strategies.clone())
        .unwrap_or_else(|| StrategyKind::ALL.to_vec());
    let guidances: Vec<Guidance> = args
        .guidances
        .clone()
        .or_else(|| settings.extras.guidances.clone())
        .unwrap_or_else(|| Guidance::ALL.to_vec());
    let columns: Vec<Vec<i32>> = match args.classes.clone().or_else(|| settings.extras.classes.clone()) {
        Some(classes) => classes.into_iter().map(|c| vec![c]).collect(),
        None => vec![settings.normal_classes.clone()],
    };

    let mut per_class = Vec::with_capacity(columns.len());
    for normal in &columns {
        let split = load_split(&mut settings, normal)?;
        settings.train.validate()?;
        let cells = ablation_grid(&settings.train, &strategies, &guidances);
        let rows = run_suite(&cells, &split, |cell, outcome| {
            if !args.quiet {
                eprintln!(
                    "class {normal:?}  {}  run {}  best AUC {:.4}",
                    cell.label, outcome.report.run_id, outcome.report.best_auc
                );
            }
            Ok(())
        })?;
        per_class.push(rows);
    }

    let names: Vec<String> = columns
        .iter()
        .map(|c| c.iter().map(i32::to_string).collect::<Vec<_>>().join("+"))
        .collect();
    let rows = (0..per_class[0].len())
        .map(|i| {
            let first = &per_class[0][i];
            let cells: Vec<AblationCell> = per_class
                .iter()
                .zip(&names)
                .map(|(rows, class)| AblationCell {
                    class: class.clone(),
                    aucs: rows[i].aucs.clone(),
                    mean: rows[i].mean,
                    std: rows[i].std,
                })
                .collect();
            AblationRow {
                perturbation: first.strategy.name().to_string(),
                guidance: first.guidance.table_label().to_string(),
                strategy: first.strategy,
                guidance_mode: first.guidance,
                mean: cells.iter().map(|c| c.mean).sum::<f64>() / cells.len() as f64,
                cells,
            }
        })
        .collect();
    let report = AblationReport {
        columns: names,
        rows,
        config: settings.train.clone(),
    };

    create_dir(&settings.out_dir)?;
    let table = report.table();
    print!("{table}");
    write_text(&settings.out_dir.join(ABLATION_TXT), &table)?;
    write_json(&settings.out_dir.join(ABLATION_JSON), &report)?;
    Ok(report)
}
