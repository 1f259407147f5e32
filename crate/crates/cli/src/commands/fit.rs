use halludetect_core::detector::DEFAULT_TAU;
use halludetect_core::tensor_io::read_matrix_file;
use halludetect_core::{CmDetector, GaussianModel};
use serde_json::json;

use crate::args::FitArgs;
use crate::config::{config_err, existing, model_config, require, CliResult, RunMeta};
use crate::output::{check_writable, write_bytes};

const SHOWN_EIGENVALUES: usize = 5;

fn describe(g: &GaussianModel) -> String {
    g.eigenvalues()
        .iter()
        .take(SHOWN_EIGENVALUES)
        .map(|l| format!("{l:.6e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn run(args: FitArgs, seed: u64) -> CliResult<()> {
    let truthful_path = existing(args.truthful, "truthful")?;
    let hallucinated_path = existing(args.hallucinated, "hallucinated")?;
    let out = require(args.out, "out")?;
    check_writable(&out)?;
    let cfg = model_config(args.k, args.epsilon_rel, args.residual_mode)?;
    let tau = args.tau.unwrap_or(DEFAULT_TAU);

    let truthful = read_matrix_file(&truthful_path)?;
    let hallucinated = read_matrix_file(&hallucinated_path)?;
    if truthful.cols() != hallucinated.cols() {
        return Err(config_err(format!(
            "dimension mismatch: {} has d={}, {} has d={}",
            truthful_path.display(),
            truthful.cols(),
            hallucinated_path.display(),
            hallucinated.cols()
        )));
    }
    let det = CmDetector::fit(&truthful, &hallucinated, &cfg, tau)?;

    for (name, g) in [
        ("truthful", &det.truthful),
        ("hallucinated", &det.hallucinated),
    ] {
        if g.k() < cfg.k {
            eprintln!(
                "warning: k={} exceeds the rank available from the {name} data; clamped to {}",
                cfg.k,
                g.k()
            );
        }
    }
    println!(
        "d={} k_effective={} (truthful) {} (hallucinated) tau={tau}",
        det.dim(),
        det.truthful.k(),
        det.hallucinated.k()
    );
    println!("top eigenvalues truthful: {}", describe(&det.truthful));
    println!(
        "top eigenvalues hallucinated: {}",
        describe(&det.hallucinated)
    );

    let meta = RunMeta::new(
        "fit",
        seed,
        &json!({
            "truthful": truthful_path,
            "hallucinated": hallucinated_path,
            "k": cfg.k,
            "tau": tau,
            "epsilon_rel": cfg.epsilon_rel,
            "residual_mode": cfg.residual_mode,
        }),
    );
    write_bytes(&out, &det.save(Some(meta.to_value())))?;
    println!("wrote {}", out.display());
    Ok(())
}
