use std::fmt::Write as _;

use super::config::TrainConfig;
use super::episode::{derain, loss_and_gradients, n_step_returns, rollout, LossReport};
use super::net::{Gradients, Network};
use super::optim::{clip_global_norm, Adam, CLIP_NORM};
use super::real::Real;
use crate::brisque::{brisque_score, ScorerModel, MIN_SIDE};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::RainMask;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub episode: usize,
    pub lr: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
    pub mean_reward: f64,
    /// Score of the greedy output after this episode's update, when evaluated.
    pub greedy_brisque: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "episode,lr,value_loss,policy_loss,mean_reward,brisque";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let b = r.greedy_brisque.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.episode, r.lr, r.value_loss, r.policy_loss, r.mean_reward, b
            )
            .unwrap();
        }
        s
    }
}

/// Fails on the first non-finite gradient tensor, then clips and applies an
/// Adam step. Returns the pre-clip gradient norm.
pub fn backprop_and_update<T: Real>(
    net: &mut Network<T>,
    mut grads: Gradients<T>,
    adam: &mut Adam,
    lr: f64,
) -> Result<f64> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    let norm = clip_global_norm(&mut grads, CLIP_NORM);
    adam.update(net, &grads, lr);
    if !net.is_finite() {
        return Err(Error::NonFiniteGradient(
            "parameters became non-finite after the update".into(),
        ));
    }
    Ok(norm)
}

fn mean_reward(traj: &super::episode::Trajectory) -> f64 {
    let (sum, n) = traj.steps.iter().fold((0.0, 0usize), |(s, n), st| {
        (s + st.reward.iter().sum::<f64>(), n + st.reward.len())
    });
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Trains a fresh network on a single image.
pub fn train(
    img: &Image,
    mask: &RainMask,
    cfg: &TrainConfig,
    scorer: &ScorerModel,
) -> Result<(Network<f32>, TrainingLog)> {
    let net = Network::init(img.channels(), cfg.width, cfg.seed);
    train_from(net, img, mask, cfg, scorer)
}

/// Continues training from the given parameters.
pub fn train_from<T: Real>(
    mut net: Network<T>,
    img: &Image,
    mask: &RainMask,
    cfg: &TrainConfig,
    scorer: &ScorerModel,
) -> Result<(Network<T>, TrainingLog)> {
    cfg.validate()?;
    mask.ensure_matches(img)?;
    let mut adam = Adam::new(&net);
    let mut log = TrainingLog::default();
    let scorable = img.height() >= MIN_SIDE && img.width() >= MIN_SIDE;
    for e in 0..cfg.episodes {
        let lr = cfg.lr_at(e);
        let traj = rollout(img, mask, &net, cfg, scorer, e as u64)?;
        let returns = n_step_returns(&traj, cfg.gamma);
        let (loss, grads): (LossReport, _) =
            loss_and_gradients(&net, mask, &traj, &returns, cfg.entropy_weight)?;
        backprop_and_update(&mut net, grads, &mut adam, lr)?;
        let evaluate = scorable && (e % cfg.eval_every == 0 || e + 1 == cfg.episodes);
        let greedy_brisque = if evaluate {
            Some(brisque_score(&derain(img, mask, &net, cfg.t_max)?, scorer)?)
        } else {
            None
        };
        log.rows.push(LogRow {
            episode: e,
            lr,
            value_loss: loss.value,
            policy_loss: loss.policy,
            mean_reward: mean_reward(&traj),
            greedy_brisque,
        });
    }
    Ok((net, log))
}
