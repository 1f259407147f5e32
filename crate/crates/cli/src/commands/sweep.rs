use std::collections::BTreeMap;

use halludetect_core::detector::DEFAULT_TAU;
use halludetect_core::eval::{
    hyperparam_sweep, layer_sweep, template_sweep, EvalFixture, HyperAxis,
};
use serde_json::json;

use crate::args::{Axis, SweepArgs};
use crate::commands::manifest::Manifest;
use crate::config::{config_err, existing, model_config, require, CliResult, RunMeta};
use crate::output::{check_writable, write_csv, write_report};

fn keyed<K: std::str::FromStr + Ord>(
    fixtures: BTreeMap<String, EvalFixture>,
    what: &str,
) -> CliResult<BTreeMap<K, EvalFixture>> {
    fixtures
        .into_iter()
        .map(|(name, f)| {
            let key = name.parse().map_err(|_| {
                config_err(format!(
                    "{what} sweep: fixture name {name:?} is not a {what} number"
                ))
            })?;
            Ok((key, f))
        })
        .collect()
}

pub fn run(args: SweepArgs, seed: u64) -> CliResult<()> {
    let axis = require(args.axis, "axis")?;
    let manifest_path = existing(args.manifest, "manifest")?;
    let out = require(args.out, "out")?;
    check_writable(&out)?;
    if let Some(csv) = &args.csv {
        check_writable(csv)?;
    }
    let cfg = model_config(args.k, args.epsilon_rel, args.residual_mode)?;
    let tau = args.tau.unwrap_or(DEFAULT_TAU);
    let mut fixtures = Manifest::read(&manifest_path)?.load_all(&manifest_path)?;

    let result = match axis {
        Axis::Layer => layer_sweep(&keyed(fixtures, "layer")?, &cfg, tau)?,
        Axis::Template => template_sweep(&keyed(fixtures, "template")?, &cfg, tau)?,
        Axis::K | Axis::Tau => {
            let values = require(args.values.clone(), "values")?;
            let fixture = match &args.fixture {
                Some(name) => fixtures
                    .remove(name)
                    .ok_or_else(|| config_err(format!("manifest has no fixture {name:?}")))?,
                None if fixtures.len() == 1 => fixtures.into_values().next().expect("one fixture"),
                None => {
                    return Err(config_err(
                        "manifest lists several fixtures; choose one with --fixture",
                    ))
                }
            };
            let hyper = if axis == Axis::K {
                HyperAxis::K
            } else {
                HyperAxis::Tau
            };
            hyperparam_sweep(hyper, &values, &fixture, &cfg, tau)?
        }
    };

    let meta = RunMeta::new(
        "sweep",
        seed,
        &json!({
            "axis": axis,
            "manifest": manifest_path,
            "fixture": args.fixture,
            "values": args.values,
            "k": cfg.k,
            "tau": tau,
            "epsilon_rel": cfg.epsilon_rel,
            "residual_mode": cfg.residual_mode,
        }),
    );
    write_report(&out, &result, &meta)?;
    if let Some(csv) = &args.csv {
        write_csv(csv, &meta, |w| result.write_csv(w))?;
    }
    for p in &result.points {
        match p.accuracy {
            Some(acc) => println!(
                "{}={} auroc={:.6} accuracy={acc:.6}",
                result.axis, p.setting, p.auroc
            ),
            None => println!("{}={} auroc={:.6}", result.axis, p.setting, p.auroc),
        }
    }
    Ok(())
}
