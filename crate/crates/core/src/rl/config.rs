use crate::error::{Error, Result};

/// Per-image training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Steps per episode.
    pub t_max: usize,
    pub episodes: usize,
    /// Horizon of the polynomial learning-rate decay.
    pub max_episode: usize,
    pub lr0: f64,
    pub gamma: f64,
    /// Weight of the quality-score reward relative to the reference reward.
    pub lambda_brisque: f64,
    pub seed: u64,
    pub entropy_weight: f64,
    /// Feature width of every hidden convolution.
    pub width: usize,
    /// Score the state every this many steps; 1 scores every step.
    pub brisque_every: usize,
    /// Log the greedy-output score every this many episodes (and at the last).
    pub eval_every: usize,
    /// Draw a fresh pseudo reference at every step. When false, draw 0 is
    /// used throughout.
    pub resample_reference: bool,
    pub reference_radius: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t_max: 15,
            episodes: 100,
            max_episode: 150,
            lr0: 1e-3,
            gamma: 0.95,
            lambda_brisque: 0.025,
            seed: 0,
            entropy_weight: 0.0,
            width: 32,
            brisque_every: 1,
            eval_every: 1,
            resample_reference: true,
            reference_radius: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if self.episodes > self.max_episode {
            return bad(format!(
                "episodes ({}) must not exceed max_episode ({})",
                self.episodes, self.max_episode
            ));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be finite and >= 0, got {}", self.lr0));
        }
        if !(self.lambda_brisque >= 0.0 && self.lambda_brisque.is_finite()) {
            return bad(format!("lambda_brisque must be >= 0, got {}", self.lambda_brisque));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return bad(format!("entropy_weight must be >= 0, got {}", self.entropy_weight));
        }
        if self.width == 0 {
            return bad("width must be >= 1".into());
        }
        if self.brisque_every == 0 || self.eval_every == 0 {
            return bad("brisque_every and eval_every must be >= 1".into());
        }
        if self.reference_radius == 0 {
            return bad("reference_radius must be >= 1".into());
        }
        Ok(())
    }

    /// `lr0 · (1 − e/max_episode)^0.9`.
    pub fn lr_at(&self, episode: usize) -> f64 {
        if self.max_episode == 0 {
            return self.lr0;
        }
        let frac = 1.0 - episode as f64 / self.max_episode as f64;
        self.lr0 * frac.max(0.0).powf(0.9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(0), 1e-3);
        assert!((cfg.lr_at(75) - 1e-3 * 0.5f64.powf(0.9)).abs() < 1e-12);
        assert_eq!(cfg.lr_at(150), 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = TrainConfig { gamma: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.gamma = 0.5;
        cfg.episodes = 200;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
