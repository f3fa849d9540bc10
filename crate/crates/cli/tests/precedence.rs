//! Every key resolves flag > environment > config file > default. Kept in its
//! own test binary with a single test because it mutates the environment.

use clap::Parser;
use plume::trainer::TrainConfig;
use plume_cli::config::{resolve, Settings};
use plume_cli::{Cli, Command};
use serde_json::Value;

/// (key, file value as TOML, env value, flag value)
const TRAIN_KEYS: &[(&str, &str, &str, &str)] = &[
    ("dim", "11", "12", "13"),
    ("hidden1", "21", "22", "23"),
    ("hidden2", "31", "32", "33"),
    ("batch_size", "4", "5", "6"),
    ("epochs", "7", "8", "9"),
    ("lambda", "1.5", "2.5", "3.5"),
    ("nu", "0.25", "0.5", "0.75"),
    ("gamma", "0.125", "0.375", "0.625"),
    ("tau", "0.1", "0.2", "0.3"),
    ("strategy", "\"addmult\"", "add", "mult"),
    ("gaussian_sigma", "0.5", "1.5", "2.5"),
    ("guidance", "\"none\"", "mean", "none"),
    ("seed", "100", "200", "300"),
    ("runs", "2", "3", "4"),
    ("beta1", "0.8", "0.85", "0.7"),
    ("beta2", "0.99", "0.995", "0.98"),
    ("adam_eps", "1e-6", "1e-7", "1e-9"),
    ("weight_decay", "0.1", "0.2", "0.3"),
    ("base_lr", "1e-5", "2e-5", "3e-5"),
    ("max_lr", "0.01", "0.02", "0.03"),
    ("step_size_epochs", "3.0", "4.0", "5.0"),
    ("clr_policy", "\"triangular2\"", "triangular", "triangular2"),
    ("threads", "2", "3", "4"),
];

/// Keys outside the training config, checked against [`Settings`].
const DATA_KEYS: &[(&str, &str, &str, &str)] = &[
    ("train_features", "\"/f/train.plmf\"", "/e/train.plmf", "/c/train.plmf"),
    ("val_features", "\"/f/val.plmf\"", "/e/val.plmf", "/c/val.plmf"),
    ("out_dir", "\"/f/out\"", "/e/out", "/c/out"),
    ("normal_classes", "[1, 2]", "3,4", "5"),
    ("label_column", "1", "2", "3"),
];

fn env_name(key: &str) -> String {
    format!("PLUME_{}", key.to_ascii_uppercase())
}

fn flag(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

fn settings(config: &std::path::Path, flags: &[String]) -> Settings {
    let mut argv = vec!["plume".to_string(), "train".into(), "--config".into(), config.display().to_string()];
    argv.extend_from_slice(flags);
    let Command::Train(args) = Cli::try_parse_from(argv).unwrap().command else {
        unreachable!()
    };
    resolve(&args.data, &args.overrides).unwrap()
}

fn train_value(s: &Settings, key: &str) -> Value {
    serde_json::to_value(&s.train).unwrap()[key].clone()
}

fn data_value(s: &Settings, key: &str) -> String {
    match key {
        "train_features" => s.train_features.as_ref().unwrap().display().to_string(),
        "val_features" => s.val_features.as_ref().unwrap().display().to_string(),
        "out_dir" => s.out_dir.display().to_string(),
        "normal_classes" => s.normal_classes.iter().map(i32::to_string).collect::<Vec<_>>().join(","),
        "label_column" => format!("{:?}", s.label_column),
        _ => unreachable!(),
    }
}

/// Parses a CLI-style value into the JSON the config serializes to.
fn expected(key: &str, text: &str) -> Value {
    let cfg: TrainConfig = toml::from_str(&format!("{key} = {text}")).unwrap_or_else(|_| {
        toml::from_str(&format!("{key} = \"{text}\"")).unwrap()
    });
    serde_json::to_value(cfg).unwrap()[key].clone()
}

#[test]
fn flag_over_env_over_file_over_default() {
    for (k, _) in std::env::vars() {
        if k.starts_with("PLUME_") {
            std::env::remove_var(k);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let full = dir.path().join("full.toml");
    let text: String = TRAIN_KEYS
        .iter()
        .chain(DATA_KEYS)
        .map(|(k, file, _, _)| format!("{k} = {file}\n"))
        .collect();
    std::fs::write(&full, text).unwrap();
    let defaults = serde_json::to_value(TrainConfig::default()).unwrap();

    let base = settings(&empty, &[]);
    for (key, ..) in TRAIN_KEYS {
        assert_eq!(train_value(&base, key), defaults[*key], "default {key}");
    }
    assert_eq!(base.out_dir.display().to_string(), "plume-out");
    assert_eq!(base.normal_classes, vec![0]);
    assert_eq!(data_value(&base, "label_column"), "Last");
    assert!(base.train_features.is_none());

    let from_file = settings(&full, &[]);
    for (key, file, ..) in TRAIN_KEYS {
        assert_eq!(train_value(&from_file, key), expected(key, file), "file {key}");
        assert_ne!(train_value(&from_file, key), defaults[*key], "file value for {key} equals default");
    }
    assert_eq!(data_value(&from_file, "normal_classes"), "1,2");
    assert_eq!(data_value(&from_file, "label_column"), "Index(1)");
    assert_eq!(data_value(&from_file, "out_dir"), "/f/out");

    for (key, _, env, _) in TRAIN_KEYS.iter().chain(DATA_KEYS) {
        std::env::set_var(env_name(key), env);
    }
    let from_env = settings(&full, &[]);
    for (key, _, env, _) in TRAIN_KEYS {
        assert_eq!(train_value(&from_env, key), expected(key, env), "env {key}");
    }
    for (key, _, env, _) in DATA_KEYS {
        let want = if *key == "label_column" { format!("Index({env})") } else { env.to_string() };
        assert_eq!(data_value(&from_env, key), want, "env {key}");
    }

    let flags: Vec<String> = TRAIN_KEYS
        .iter()
        .chain(DATA_KEYS)
        .flat_map(|(key, _, _, value)| [flag(key), value.to_string()])
        .collect();
    let from_flags = settings(&full, &flags);
    for (key, _, _, value) in TRAIN_KEYS {
        assert_eq!(train_value(&from_flags, key), expected(key, value), "flag {key}");
    }
    for (key, _, _, value) in DATA_KEYS {
        let want = if *key == "label_column" { format!("Index({value})") } else { value.to_string() };
        assert_eq!(data_value(&from_flags, key), want, "flag {key}");
    }
    assert!(from_flags.dim_set);

    for (key, ..) in TRAIN_KEYS.iter().chain(DATA_KEYS) {
        std::env::remove_var(env_name(key));
    }
}
