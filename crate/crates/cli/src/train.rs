use std::path::PathBuf;
use std::process::ExitCode;

use pefnn_core::io::{read_dataset, sidecar_path, write_atomic, Checkpoint, ResumeState};
use pefnn_core::net::{Model, ModelParams};
use pefnn_core::training::Trainer;
use pefnn_core::{Error, Result};

use crate::{load_config, TrainArgs};

pub fn run(args: &TrainArgs) -> Result<ExitCode> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(s) = args.strategy {
        cfg.train.strategy = s.into();
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.train.validate()?;

    let dataset = read_dataset(&args.data)?;
    let channels = dataset.header.channels;
    if cfg.model.in_channels != channels || cfg.model.out_channels != channels {
        return Err(Error::Config(format!(
            "model maps {} -> {} channels but the dataset has {channels}",
            cfg.model.in_channels, cfg.model.out_channels
        )));
    }
    let split = cfg.data.split(dataset.trajectories.len())?;
    let train = &dataset.trajectories[split.train.clone()];
    let valid = &dataset.trajectories[split.valid.clone()];

    let (mut trainer, mut best) = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.check_config(&cfg.model)?;
            let state = ck
                .resume
                .ok_or_else(|| Error::Data(format!("{} holds no optimizer state to resume from", path.display())))?;
            let params = ModelParams::from_values(&cfg.model, state.params)?;
            let model = Model::from_params(cfg.model.clone(), params)?;
            let prior = ck.best_epoch.map(|e| (e, ck.params));
            (Trainer::resume(model, cfg.train.clone(), state.adam, ck.history)?, prior)
        }
        None => (Trainer::new(Model::new(cfg.model.clone(), cfg.train.seed)?, cfg.train.clone())?, None),
    };

    let budget = args.stop_after.unwrap_or(usize::MAX);
    let mut ran = 0;
    while !trainer.is_done() && ran < budget {
        let r = trainer.run_epoch(train, valid)?;
        ran += 1;
        if !args.quiet {
            let valid = r.valid_loss.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
            println!("epoch {:>4}  lr {:.3e}  train {:.6e}  valid {valid}", r.epoch, r.lr, r.train_loss);
        }
    }
    if let Some(b) = trainer.best.take() {
        best = Some(b);
    }

    let (best_epoch, params) = match best {
        Some((e, p)) => (Some(e), p),
        None => (None, trainer.model.params.clone()),
    };
    let ck = Checkpoint {
        config: cfg.model.clone(),
        params,
        train: Some(cfg.train.clone()),
        history: trainer.history.clone(),
        best_epoch,
        resume: Some(ResumeState { params: trainer.model.params.values.clone(), adam: trainer.optimizer.clone() }),
    };
    ck.save(&args.out)?;
    let history_path = args.history.clone().unwrap_or_else(|| {
        let mut s = args.out.as_os_str().to_os_string();
        s.push(".history.csv");
        PathBuf::from(s)
    });
    write_atomic(&history_path, trainer.history.to_csv().as_bytes())?;
    let meta = serde_json::json!({
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "dataset": args.data.display().to_string(),
        "train_trajectories": train.len(),
        "valid_trajectories": valid.len(),
        "best_epoch": best_epoch,
        "epochs_completed": trainer.history.len(),
    });
    write_atomic(&sidecar_path(&args.out), &serde_json::to_vec_pretty(&meta).expect("metadata serializes"))?;

    match (best_epoch, trainer.history.best()) {
        (Some(e), Some((_, loss))) => println!("saved {} (best epoch {e}, loss {loss:.6e})", args.out.display()),
        _ => println!("saved {} (untrained initialization)", args.out.display()),
    }
    Ok(ExitCode::SUCCESS)
}
