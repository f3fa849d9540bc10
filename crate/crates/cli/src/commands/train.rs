use std::fs::File;
use std::io::{BufWriter, Write};

use plume::data::{write_features, Dtype, FeatureFile};
use plume::trainer::{fit_with, Checkpoint, CheckpointMeta};

use super::{create_dir, load_split, write_json, write_text};
use crate::args::TrainArgs;
use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::report::TrainSummary;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TXT: &str = "summary.txt";

pub fn best_checkpoint_name(run: usize) -> String {
    format!("run{run}_best.plmc")
}

pub fn run(args: &TrainArgs) -> CliResult<TrainSummary> {
    let mut settings = resolve(&args.data, &args.overrides)?;
    let classes = settings.normal_classes.clone();
    let split = load_split(&mut settings, &classes)?;
    let config = settings.train.clone();
    config.validate()?;
    let out = settings.out_dir.clone();
    create_dir(&out)?;

    let metrics_path = out.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(|e| CliError::output(&metrics_path, e))?;
    let mut metrics = BufWriter::new(file);
    let mut reports = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let outcome = fit_with(&split, &config, run, |record| {
            let line = serde_json::to_string(record).expect("records serialize");
            writeln!(metrics, "{line}")
                .and_then(|_| metrics.flush())
                .map_err(|e| plume::PlumeError::io(&metrics_path, e))?;
            if !args.quiet {
                eprintln!(
                    "run {run} epoch {:>3}/{}  loss {:.5}  val AUC {:.4}",
                    record.epoch, config.epochs, record.loss_total, record.val_auc
                );
            }
            Ok(())
        })?;

        let name = best_checkpoint_name(run);
        outcome.best_checkpoint(&config, &classes).save(out.join(&name))?;
        if args.save_training_state {
            let last = Checkpoint {
                meta: CheckpointMeta {
                    config: config.clone(),
                    normal_classes: classes.clone(),
                    run_id: run,
                    epoch: config.epochs,
                    val_auc: outcome.report.epochs.last().map(|e| e.val_auc),
                },
                classifier: outcome.model.classifier.clone(),
                perturbator: outcome.model.perturbator.clone(),
            };
            last.save(out.join(format!("run{run}_last.plmc")))?;
        }
        if args.dump_embeddings {
            let c = &outcome.best_classifier;
            let z = c.embed_eval(&c.input_norm.forward_eval(&split.val)?)?;
            let dump = FeatureFile::new(z, split.val_labels.clone(), Dtype::F64)?;
            write_features(out.join(format!("run{run}_embeddings.plmf")), &dump)?;
        }
        reports.push((outcome.report, name));
    }

    let summary = TrainSummary::new(&config, &classes, &reports)?;
    let table = summary.table();
    print!("{table}");
    write_text(&out.join(SUMMARY_TXT), &table)?;
    write_json(&out.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}
