use std::path::Path;
use std::process::ExitCode;

use pefnn_core::io::{read_dataset, sidecar_path, write_atomic, write_dataset, Checkpoint, Dtype};
use pefnn_core::metrics::{rollout_eval_with, rollout_trajectories, superres_eval_with};
use pefnn_core::{Error, Result};

use crate::{load_config, EvalArgs, SplitArg};

pub fn run(args: &EvalArgs, dump: Option<&Path>, train_res: Option<usize>) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_ref())?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let model = ck.model()?;
    let dataset = read_dataset(&args.data)?;
    let all = &dataset.trajectories;
    let split = cfg.data.split(all.len());
    let range = match args.split {
        SplitArg::All => 0..all.len(),
        SplitArg::Train => split?.train,
        SplitArg::Valid => split?.valid,
        SplitArg::Test => split?.test,
    };
    let data = &all[range];
    if data.is_empty() {
        return Err(Error::Data("selected split is empty".into()));
    }
    let start = args.start.unwrap_or(cfg.data.eval_start);
    let horizon = data.iter().map(|t| t.len()).min().unwrap_or(0);
    if start + 1 >= horizon {
        return Err(Error::Data(format!("rollout start {start} leaves no steps in {horizon}-slice trajectories")));
    }
    let steps = args.steps.or(cfg.data.eval_steps).unwrap_or(horizon - 1 - start);

    let report = match train_res {
        Some(r) => superres_eval_with(&model, (r, r), data, start, steps)?,
        None => rollout_eval_with(&model, data, start, steps, |_, _| {})?,
    };
    println!(
        "{} trajectories, {steps} steps from slice {start} on {}x{}: l_rmse {:.6e}  l_m {:.6e}  l_m(final) {:.6e}",
        data.len(),
        report.height,
        report.width,
        report.l_rmse,
        report.l_m,
        report.l_m_final
    );
    match &args.out {
        Some(path) => {
            write_atomic(path, report.to_csv().as_bytes())?;
            let meta = serde_json::json!({
                "checkpoint": args.checkpoint.display().to_string(),
                "dataset": args.data.display().to_string(),
                "train_resolution": train_res,
                "model": serde_json::to_value(&ck.config).expect("config serializes"),
                "data": serde_json::to_value(&cfg.data).expect("config serializes"),
                "report": serde_json::to_value(&report).expect("report serializes"),
            });
            write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&meta).expect("report serializes"))?;
        }
        None => print!("{}", report.to_csv()),
    }
    if let Some(path) = dump {
        let preds = rollout_trajectories(&model, data, start, steps)?;
        let meta = serde_json::json!({ "checkpoint": args.checkpoint.display().to_string(), "start": start, "steps": steps });
        write_dataset(path, &preds, Dtype::F64, "rollout", meta)?;
        println!("wrote predictions to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
