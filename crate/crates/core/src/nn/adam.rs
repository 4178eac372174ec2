//! Adam with bias-corrected moment estimates.

use crate::error::{Error, Result};

use super::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators mirroring the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: ModelParams,
    second: ModelParams,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        Self {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        if params.hyper != grads.hyper || params.hyper != self.first.hyper {
            return Err(Error::shape(
                "adam step",
                format!("{:?}", self.first.hyper),
                format!("params {:?}, grads {:?}", params.hyper, grads.hyper),
            ));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.first.blocks_mut().into_iter().zip(self.second.blocks_mut()));
        for ((p, g), (m, v)) in blocks {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Value-semantic form of [`AdamState::step`].
pub fn adam_step(
    params: &ModelParams,
    grads: &ModelParams,
    state: &AdamState,
) -> Result<(ModelParams, AdamState)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grads)?;
    Ok((p, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Hyper};

    fn tiny() -> ModelParams {
        init_params(Hyper::new(3, 2, 2), 5).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let p = tiny();
        let g = p.zeros_like();
        let s = AdamState::new(&p, AdamConfig::default());
        let (p2, s2) = adam_step(&p, &g, &s).unwrap();
        assert_eq!(p, p2);
        assert_eq!(s2.steps_taken(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let p = tiny();
        let mut g = p.zeros_like();
        let mut flat = vec![0.0; g.len()];
        for (k, v) in flat.iter_mut().enumerate() {
            *v = if k % 3 == 0 { 0.7 } else { -2.5 };
        }
        g = ModelParams::from_flat(g.hyper, &flat).unwrap();
        let cfg = AdamConfig::default();
        let (p2, _) = adam_step(&p, &g, &AdamState::new(&p, cfg)).unwrap();
        for ((a, b), gk) in p.to_flat().iter().zip(p2.to_flat()).zip(&flat) {
            let delta = b - a;
            // m̂/√v̂ = g/|g| exactly; epsilon shifts it by ~eps/|g|.
            assert!((delta + cfg.lr * gk.signum()).abs() < 1e-10, "{delta}");
        }
    }

    #[test]
    fn deterministic() {
        let p = tiny();
        let g = ModelParams::from_flat(p.hyper, &vec![0.1; p.len()]).unwrap();
        let s = AdamState::new(&p, AdamConfig::default());
        let a = adam_step(&p, &g, &s).unwrap();
        let b = adam_step(&p, &g, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let p = tiny();
        let other = init_params(Hyper::new(3, 2, 3), 5).unwrap();
        let s = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&p, &other, &s).is_err());
    }
}
