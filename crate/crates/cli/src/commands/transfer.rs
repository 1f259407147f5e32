use halludetect_core::detector::DEFAULT_TAU;
use halludetect_core::eval::transfer_eval;
use serde_json::json;

use crate::args::TransferArgs;
use crate::commands::manifest::Manifest;
use crate::config::{existing, model_config, require, CliResult, RunMeta};
use crate::output::{check_writable, write_csv, write_report};

pub fn run(args: TransferArgs, seed: u64) -> CliResult<()> {
    let manifest_path = existing(args.manifest, "manifest")?;
    let out = require(args.out, "out")?;
    check_writable(&out)?;
    if let Some(csv) = &args.csv {
        check_writable(csv)?;
    }
    let cfg = model_config(args.k, args.epsilon_rel, args.residual_mode)?;
    let tau = args.tau.unwrap_or(DEFAULT_TAU);
    let fixtures = Manifest::read(&manifest_path)?.load_all(&manifest_path)?;
    let grid = transfer_eval(&fixtures, &cfg, tau)?;

    let meta = RunMeta::new(
        "transfer",
        seed,
        &json!({
            "manifest": manifest_path,
            "k": cfg.k,
            "tau": tau,
            "epsilon_rel": cfg.epsilon_rel,
            "residual_mode": cfg.residual_mode,
        }),
    );
    write_report(&out, &grid, &meta)?;
    if let Some(csv) = &args.csv {
        write_csv(csv, &meta, |w| grid.write_csv(w))?;
    }
    println!("train \\ test: {}", grid.names.join(" "));
    for (name, row) in grid.names.iter().zip(&grid.auroc) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("{name}: {}", cells.join(" "));
    }
    Ok(())
}
