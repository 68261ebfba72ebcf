//! Rollouts, rewards, returns and losses.

use super::config::TrainConfig;
use super::net::{log_softmax_at, Gradients, Network};
use super::real::Real;
use crate::brisque::{brisque_score, ScorerModel};
use crate::error::{Error, Result};
use crate::filters::{Action, ActionBank, NUM_ACTIONS};
use crate::image::Image;
use crate::mask::RainMask;
use crate::pseudo_ref::{sample_pseudo_reference, SamplerConfig};
use crate::rng::{uniform, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sample,
    Greedy,
}

/// One action index (1..=9) per pixel.
///
/// `probs` is pixel-major with 9 entries per pixel. Sampling draws one
/// counter-keyed uniform per pixel and walks the cumulative distribution;
/// greedy picks the argmax with ties going to the lowest index.
pub fn select_actions(probs: &[f64], mode: Mode, seed: u64, draw: u64) -> Vec<u8> {
    probs
        .chunks_exact(NUM_ACTIONS)
        .enumerate()
        .map(|(p, pr)| {
            let a = match mode {
                Mode::Greedy => argmax(pr),
                Mode::Sample => {
                    let u = uniform(seed, Stream::ActionSample, draw, p as u64);
                    let mut acc = 0.0;
                    let mut pick = None;
                    for (a, &q) in pr.iter().enumerate() {
                        acc += q;
                        if u < acc {
                            pick = Some(a);
                            break;
                        }
                    }
                    // Rounding can leave the total just below u; fall back to
                    // the last action with nonzero mass.
                    pick.unwrap_or_else(|| pr.iter().rposition(|&q| q > 0.0).unwrap_or(0))
                }
            };
            (a + 1) as u8
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Applies each masked pixel's action to the full current state; unmasked
/// pixels take their value from `original`.
pub fn step_state(
    state: &Image,
    actions: &[u8],
    mask: &RainMask,
    original: &Image,
    bank: &ActionBank,
) -> Result<Image> {
    state.ensure_same_dims(original)?;
    mask.ensure_matches(state)?;
    if actions.len() != state.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{} actions for {} pixels",
            actions.len(),
            state.pixels()
        )));
    }
    let w = state.width();
    let mut out = original.clone();
    let mut px = vec![0.0; state.channels()];
    for (i, &a) in actions.iter().enumerate() {
        if !mask.at(i) {
            continue;
        }
        let action = Action::from_index(a as usize)?;
        bank.apply_into(state, action, i / w, i % w, &mut px);
        out.set_pixel(i, &px);
    }
    Ok(out)
}

/// Per pixel `‖y − s_t‖² − ‖y − s_next‖²`, summed over channels.
pub fn mse_reward(reference: &Image, state: &Image, next: &Image) -> Result<Vec<f64>> {
    reference.ensure_same_dims(state)?;
    reference.ensure_same_dims(next)?;
    let c = reference.channels();
    Ok(reference
        .data()
        .chunks_exact(c)
        .zip(state.data().chunks_exact(c))
        .zip(next.data().chunks_exact(c))
        .map(|((y, s), n)| {
            let before: f64 = y.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
            let after: f64 = y.iter().zip(n).map(|(a, b)| (a - b) * (a - b)).sum();
            before - after
        })
        .collect())
}

/// `score(s_t) − score(s_next)`: positive when the quality score drops.
pub fn brisque_reward(state: &Image, next: &Image, model: &ScorerModel) -> Result<f64> {
    Ok(brisque_score(state, model)? - brisque_score(next, model)?)
}

/// `mse_i + λ·brisque` for every pixel.
pub fn total_reward(mse: &[f64], brisque: f64, lambda: f64) -> Vec<f64> {
    let bonus = lambda * brisque;
    mse.iter().map(|m| m + bonus).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub state: Image,
    pub actions: Vec<u8>,
    pub reward: Vec<f64>,
    pub value: Vec<f64>,
    /// Pixel-major, 9 per pixel.
    pub policy_logits: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub bootstrap_value: Vec<f64>,
    /// State after the last step.
    pub final_state: Image,
}

/// Samples one episode with the current network.
///
/// Step `t` of episode `e` uses draw `e·t_max + t` for both the pseudo
/// reference and the action sampling.
pub fn rollout<T: Real>(
    img: &Image,
    mask: &RainMask,
    net: &Network<T>,
    cfg: &TrainConfig,
    scorer: &ScorerModel,
    episode: u64,
) -> Result<Trajectory> {
    mask.ensure_matches(img)?;
    let bank = ActionBank::default();
    let sampler = SamplerConfig {
        radius: cfg.reference_radius,
        seed: cfg.seed,
    };
    let fixed_reference = if cfg.resample_reference {
        None
    } else {
        Some(sample_pseudo_reference(img, mask, &sampler, 0)?)
    };
    let use_score = cfg.lambda_brisque > 0.0;
    let mut last_score = if use_score {
        brisque_score(img, scorer)?
    } else {
        0.0
    };

    let mut state = img.clone();
    let mut steps = Vec::with_capacity(cfg.t_max);
    for t in 0..cfg.t_max {
        let draw = episode * cfg.t_max as u64 + t as u64;
        let reference = match &fixed_reference {
            Some(r) => r.clone(),
            None => sample_pseudo_reference(img, mask, &sampler, draw)?,
        };
        let out = net.forward(&state, mask, true)?;
        let actions = select_actions(&out.probs, Mode::Sample, cfg.seed, draw);
        let next = step_state(&state, &actions, mask, img, &bank)?;
        let mse = mse_reward(&reference, &state, &next)?;
        // The score is evaluated every `brisque_every` steps and at the end;
        // each evaluation rewards the drop since the previous one.
        let mut score_gain = 0.0;
        if use_score && ((t + 1) % cfg.brisque_every == 0 || t + 1 == cfg.t_max) {
            let s = brisque_score(&next, scorer)?;
            score_gain = last_score - s;
            last_score = s;
        }
        steps.push(StepRecord {
            state,
            actions,
            reward: total_reward(&mse, score_gain, cfg.lambda_brisque),
            value: out.values,
            policy_logits: out.logits,
        });
        state = next;
    }
    let bootstrap_value = net.forward(&state, mask, true)?.values;
    Ok(Trajectory {
        steps,
        bootstrap_value,
        final_state: state,
    })
}

/// Backward recursion `R_T = r_T + γ·V(s_{T+1})`, `R_t = r_t + γ·R_{t+1}`.
pub fn n_step_returns(traj: &Trajectory, gamma: f64) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); traj.steps.len()];
    let mut next = traj.bootstrap_value.clone();
    for (t, step) in traj.steps.iter().enumerate().rev() {
        let r: Vec<f64> = step
            .reward
            .iter()
            .zip(&next)
            .map(|(r, n)| r + gamma * n)
            .collect();
        next = r.clone();
        out[t] = r;
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    /// `Σ_t mean_i (R − V)²`.
    pub value: f64,
    /// `−Σ_t Σ_i log π(a|s)·A`.
    pub policy: f64,
    /// `Σ_t Σ_i H(π(·|s))`; enters the total with weight `−entropy_weight`.
    pub entropy: f64,
}

impl LossReport {
    pub fn total(&self, entropy_weight: f64) -> f64 {
        self.value + self.policy - entropy_weight * self.entropy
    }
}

fn check_shapes(traj: &Trajectory, returns: &[Vec<f64>]) -> Result<()> {
    if returns.len() != traj.steps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} return maps for {} steps",
            returns.len(),
            traj.steps.len()
        )));
    }
    for (step, r) in traj.steps.iter().zip(returns) {
        let n = step.actions.len();
        if r.len() != n
            || step.value.len() != n
            || step.reward.len() != n
            || step.policy_logits.len() != n * NUM_ACTIONS
        {
            return Err(Error::DimensionMismatch("inconsistent trajectory rasters".into()));
        }
        if step.actions.iter().any(|&a| a == 0 || a as usize > NUM_ACTIONS) {
            return Err(Error::InvalidArgument("action index out of range".into()));
        }
    }
    Ok(())
}

/// Loss terms for one step given its logits and values. Advantages use the
/// recorded values and are constants.
fn step_losses(
    step: &StepRecord,
    returns: &[f64],
    logits: &[f64],
    values: &[f64],
) -> LossReport {
    let n = returns.len() as f64;
    let mut rep = LossReport::default();
    for (p, &ret) in returns.iter().enumerate() {
        let z = &logits[p * NUM_ACTIONS..(p + 1) * NUM_ACTIONS];
        let adv = ret - step.value[p];
        let a = step.actions[p] as usize - 1;
        rep.value += (ret - values[p]).powi(2) / n;
        rep.policy -= log_softmax_at(z, a) * adv;
        rep.entropy -= (0..NUM_ACTIONS)
            .map(|k| {
                let lp = log_softmax_at(z, k);
                lp.exp() * lp
            })
            .sum::<f64>();
    }
    rep
}

fn add(a: &mut LossReport, b: LossReport) {
    a.value += b.value;
    a.policy += b.policy;
    a.entropy += b.entropy;
}

/// Losses from the recorded logits and values.
pub fn losses(traj: &Trajectory, returns: &[Vec<f64>]) -> Result<LossReport> {
    check_shapes(traj, returns)?;
    let mut rep = LossReport::default();
    for (step, r) in traj.steps.iter().zip(returns) {
        add(&mut rep, step_losses(step, r, &step.policy_logits, &step.value));
    }
    Ok(rep)
}

/// Losses with logits and values recomputed by `net` on the recorded states;
/// actions, returns and advantages stay as recorded. This is the function
/// whose gradient [`loss_and_gradients`] returns.
pub fn objective<T: Real>(
    net: &Network<T>,
    mask: &RainMask,
    traj: &Trajectory,
    returns: &[Vec<f64>],
) -> Result<LossReport> {
    check_shapes(traj, returns)?;
    let mut rep = LossReport::default();
    for (step, r) in traj.steps.iter().zip(returns) {
        let out = net.forward(&step.state, mask, true)?;
        add(&mut rep, step_losses(step, r, &out.logits, &out.values));
    }
    Ok(rep)
}

/// [`objective`] and its gradient with respect to every parameter of `net`.
///
/// Each step's forward pass is recomputed from the stored state, so only one
/// step of activations is alive at a time.
pub fn loss_and_gradients<T: Real>(
    net: &Network<T>,
    mask: &RainMask,
    traj: &Trajectory,
    returns: &[Vec<f64>],
    entropy_weight: f64,
) -> Result<(LossReport, Gradients<T>)> {
    check_shapes(traj, returns)?;
    let mut grads = Gradients::zeros_like(net);
    let mut rep = LossReport::default();
    let mut probs = [0.0; NUM_ACTIONS];
    let mut logp = [0.0; NUM_ACTIONS];
    for (step, ret) in traj.steps.iter().zip(returns) {
        let cache = net.forward_cached(&step.state, mask)?;
        let out = &cache.output;
        add(&mut rep, step_losses(step, ret, &out.logits, &out.values));

        let n = ret.len() as f64;
        let mut dlogits = vec![0.0; ret.len() * NUM_ACTIONS];
        let mut dvalues = vec![0.0; ret.len()];
        for p in 0..ret.len() {
            let z = &out.logits[p * NUM_ACTIONS..(p + 1) * NUM_ACTIONS];
            for k in 0..NUM_ACTIONS {
                logp[k] = log_softmax_at(z, k);
                probs[k] = logp[k].exp();
            }
            let entropy: f64 = -(0..NUM_ACTIONS).map(|k| probs[k] * logp[k]).sum::<f64>();
            let adv = ret[p] - step.value[p];
            let a = step.actions[p] as usize - 1;
            let d = &mut dlogits[p * NUM_ACTIONS..(p + 1) * NUM_ACTIONS];
            for k in 0..NUM_ACTIONS {
                let onehot = if k == a { 1.0 } else { 0.0 };
                d[k] = -adv * (onehot - probs[k])
                    + entropy_weight * probs[k] * (logp[k] + entropy);
            }
            dvalues[p] = -2.0 * (ret[p] - out.values[p]) / n;
        }
        net.backward(&cache, &dlogits, &dvalues, &mut grads);
    }
    Ok((rep, grads))
}

/// Runs `t_max` greedy steps.
pub fn derain<T: Real>(
    img: &Image,
    mask: &RainMask,
    net: &Network<T>,
    t_max: usize,
) -> Result<Image> {
    mask.ensure_matches(img)?;
    let bank = ActionBank::default();
    let mut state = img.clone();
    for _ in 0..t_max {
        let out = net.forward(&state, mask, false)?;
        let actions = select_actions(&out.probs, Mode::Greedy, 0, 0);
        state = step_state(&state, &actions, mask, img, &bank)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_ties_go_low() {
        let probs = [0.2, 0.3, 0.3, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(select_actions(&probs, Mode::Greedy, 0, 0), vec![2]);
    }

    #[test]
    fn one_hot_under_both_modes() {
        let mut probs = [0.0; 9];
        probs[6] = 1.0;
        for draw in 0..20 {
            assert_eq!(select_actions(&probs, Mode::Sample, 3, draw), vec![7]);
        }
        assert_eq!(select_actions(&probs, Mode::Greedy, 3, 0), vec![7]);
    }

    #[test]
    fn mse_reward_hand_value() {
        let y = Image::filled(1, 1, 1, 0.5).unwrap();
        let s = Image::filled(1, 1, 1, 0.1).unwrap();
        let n = Image::filled(1, 1, 1, 0.3).unwrap();
        let r = mse_reward(&y, &s, &n).unwrap();
        assert!((r[0] - 0.12).abs() < 1e-12);
    }

    #[test]
    fn returns_hand_expansion() {
        let img = Image::filled(1, 1, 1, 0.0).unwrap();
        let step = |r: f64| StepRecord {
            state: img.clone(),
            actions: vec![9],
            reward: vec![r],
            value: vec![0.0],
            policy_logits: vec![0.0; 9],
        };
        let traj = Trajectory {
            steps: vec![step(1.0), step(2.0), step(3.0)],
            bootstrap_value: vec![4.0],
            final_state: img,
        };
        let r = n_step_returns(&traj, 0.5);
        assert_eq!(r[0], vec![3.25]);
        assert_eq!(r[2], vec![5.0]);
    }
}
