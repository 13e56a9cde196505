use std::process::ExitCode;

use pefnn_core::datasets::{generate_flood, generate_ns, generate_swe};
use pefnn_core::io::write_dataset;
use pefnn_core::Result;

use crate::{load_config, GenArgs};

#[derive(Clone, Copy)]
pub enum Kind {
    Ns,
    Swe,
    Flood,
}

pub fn run(kind: Kind, args: &GenArgs) -> Result<ExitCode> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(n) = args.trajectories {
        cfg.data.trajectories = n;
    }
    if let Some(d) = args.dtype {
        cfg.data.dtype = d.into();
    }
    if let Some(s) = args.seed {
        cfg.ns.seed = s;
        cfg.swe.seed = s;
        cfg.flood.seed = s;
    }
    cfg.validate()?;
    let count = cfg.data.trajectories;
    let (name, section, data) = match kind {
        Kind::Ns => ("ns", serde_json::to_value(&cfg.ns), generate_ns(&cfg.ns, count)?),
        Kind::Swe => ("swe", serde_json::to_value(&cfg.swe), generate_swe(&cfg.swe, count)?),
        Kind::Flood => ("flood", serde_json::to_value(&cfg.flood), generate_flood(&cfg.flood, count)?),
    };
    let resolved = serde_json::json!({
        "solver": section.expect("config serializes"),
        "data": serde_json::to_value(&cfg.data).expect("config serializes"),
    });
    let meta = write_dataset(&args.out, &data, cfg.data.dtype, name, resolved)?;
    let [t, c, h, w] = meta.shape;
    println!(
        "wrote {} {name} trajectories to {}: {t} slices x {c} channel(s) on {h}x{w}, horizon {}",
        meta.trajectories,
        args.out.display(),
        (t - 1) as f64 * meta.info.dt_record
    );
    Ok(ExitCode::SUCCESS)
}
