use super::net::{Gradients, Network};
use super::real::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const CLIP_NORM: f64 = 40.0;

/// Rescales `grads` so their global l2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut Gradients<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adam with first and second moments kept in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new<T: Real>(net: &Network<T>) -> Self {
        let n = net.num_params();
        Adam {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update<T: Real>(&mut self, net: &mut Network<T>, grads: &Gradients<T>, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let params = net
            .layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()));
        let gs = grads.layers.iter().flat_map(|l| l.weight.iter().chain(&l.bias));
        for (((p, g), m), v) in params.zip(gs).zip(&mut self.m).zip(&mut self.v) {
            let g = g.to_f64();
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let delta = lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            *p = T::from_f64(p.to_f64() - delta);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut net = Network::<f64>::zeros(1, 2);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].bias[0] = 3.0;
        let mut adam = Adam::new(&net);
        adam.update(&mut net, &g, 0.01);
        assert!((net.layers[0].bias[0] + 0.01).abs() < 1e-9);
        assert_eq!(net.layers[0].bias[1], 0.0);
    }

    #[test]
    fn clipping_caps_norm() {
        let net = Network::<f64>::zeros(1, 2);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].bias[0] = 300.0;
        g.layers[0].bias[1] = 400.0;
        assert_eq!(clip_global_norm(&mut g, CLIP_NORM), 500.0);
        assert!((g.global_norm() - CLIP_NORM).abs() < 1e-9);
    }
}
