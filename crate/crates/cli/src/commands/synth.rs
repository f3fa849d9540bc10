use plume::data::{synth_blobs, write_features, Covariance, FeatureFile, SynthSpec};

use crate::args::SynthArgs;
use crate::error::{CliError, CliResult};

/// `iso:<std>` or `aniso:<max>:<min>`.
pub fn parse_covariance(text: &str) -> CliResult<Covariance> {
    let bad = || CliError::Usage(format!("bad covariance {text:?}; expected iso:<std> or aniso:<max>:<min>"));
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        ["iso", std] => Ok(Covariance::Isotropic { std: num(std)? }),
        ["aniso", max, min] => Ok(Covariance::Anisotropic {
            max_std: num(max)?,
            min_std: num(min)?,
        }),
        _ => Err(bad()),
    }
}

pub fn run(args: &SynthArgs) -> CliResult<FeatureFile> {
    let spec = SynthSpec {
        dim: args.dim,
        n_normal: args.n_normal,
        n_anomaly: args.n_anomaly,
        separation: args.separation,
        normal_cov: parse_covariance(&args.normal_cov)?,
        anomaly_cov: parse_covariance(&args.anomaly_cov)?,
        seed: args.seed,
        stream: args.stream,
    };
    let mut file = synth_blobs(&spec)?;
    file.dtype = args.dtype;
    write_features(&args.out, &file)?;
    Ok(file)
}
