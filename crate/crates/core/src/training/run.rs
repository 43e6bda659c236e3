//! The training loop: one optimizer step per observation window, early
//! stopping on validation loss.

use super::{assign_labels, total_loss, AdamW, LabelSet, TrainError};
use crate::data::ObservationWindow;
use crate::model::BcGnn;
use crate::tensor::{ParamStore, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f32,
    pub weight_decay: f32,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial_train_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early_at: Option<usize>,
    pub best_epoch: usize,
}

fn window_labels(model: &BcGnn, windows: &[ObservationWindow]) -> Vec<LabelSet> {
    windows
        .iter()
        .map(|w| assign_labels(&w.instances, model.dims.l_w, model.pairs()))
        .collect()
}

fn window_loss(
    model: &BcGnn,
    store: &ParamStore,
    window: &ObservationWindow,
    labels: &LabelSet,
) -> Result<(Tape, crate::tensor::Var), TrainError> {
    let mut tape = Tape::new();
    let scores = model.forward(&mut tape, store, &window.features)?;
    let loss = total_loss(&mut tape, &scores, labels)?;
    let v = tape.value(loss)[0];
    if !v.is_finite() {
        let tensor = tape
            .first_non_finite(None)
            .unwrap_or_else(|| "loss output".to_string());
        return Err(TrainError::NonFiniteLoss { tensor });
    }
    Ok((tape, loss))
}

fn mean_loss(
    model: &BcGnn,
    store: &ParamStore,
    windows: &[ObservationWindow],
    labels: &[LabelSet],
) -> Result<f64, TrainError> {
    let mut acc = 0.0f64;
    for (w, l) in windows.iter().zip(labels) {
        let (tape, loss) = window_loss(model, store, w, l)?;
        acc += tape.scalar_f64(loss);
    }
    Ok(acc / windows.len().max(1) as f64)
}

/// Train from a fresh seeded initialization, one full-window batch per step,
/// serial gradient accumulation so runs are reproducible. Returns the best
/// parameters by monitored loss (validation when present, else training)
/// plus the per-epoch log. `log_line` receives one machine-readable JSON
/// line per event.
pub fn train(
    model: &BcGnn,
    train_windows: &[ObservationWindow],
    val_windows: &[ObservationWindow],
    cfg: &TrainConfig,
    mut log_line: impl FnMut(&str),
) -> Result<(ParamStore, TrainOutcome), TrainError> {
    let train_labels = window_labels(model, train_windows);
    let val_labels = window_labels(model, val_windows);

    let mut store = model.init_params(cfg.seed);
    let mut opt = AdamW::new(&store, cfg.lr, cfg.weight_decay);

    let initial_train_loss = mean_loss(model, &store, train_windows, &train_labels)?;
    log_line(&format!(
        "{{\"event\":\"init\",\"train_loss\":{initial_train_loss}}}"
    ));

    let mut best = f64::INFINITY;
    let mut best_params = store.clone();
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut epochs = Vec::new();
    let mut stopped_early_at = None;

    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (epoch as u64).wrapping_mul(0xD1B5_4A32_D192_ED03),
        );
        order.shuffle(&mut rng);

        // per-window losses summed in index order so the reported mean does
        // not depend on the visiting order
        let mut per_window = vec![0.0f64; train_windows.len()];
        for &idx in &order {
            let (mut tape, loss) = window_loss(model, &store, &train_windows[idx], &train_labels[idx])?;
            per_window[idx] = tape.scalar_f64(loss);
            store.reset_grads();
            tape.backward(loss, &mut store)?;
            opt.step(&mut store);
        }
        let train_loss = per_window.iter().sum::<f64>() / train_windows.len().max(1) as f64;
        let val_loss = if val_windows.is_empty() {
            None
        } else {
            Some(mean_loss(model, &store, val_windows, &val_labels)?)
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        match val_loss {
            Some(v) => log_line(&format!(
                "{{\"epoch\":{epoch},\"train_loss\":{train_loss},\"val_loss\":{v}}}"
            )),
            None => log_line(&format!(
                "{{\"epoch\":{epoch},\"train_loss\":{train_loss}}}"
            )),
        }

        let monitored = val_loss.unwrap_or(train_loss);
        if monitored < best {
            best = monitored;
            best_params = store.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early_at = Some(epoch);
                log_line(&format!("{{\"event\":\"early_stop\",\"epoch\":{epoch}}}"));
                break;
            }
        }
    }

    Ok((
        best_params,
        TrainOutcome {
            initial_train_loss,
            epochs,
            stopped_early_at,
            best_epoch,
        },
    ))
}
