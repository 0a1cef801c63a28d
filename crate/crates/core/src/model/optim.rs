use super::params::Parameters;

/// Adam with decoupled weight decay. Moment buffers are created on the first
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Option<Parameters>,
    second: Option<Parameters>,
}

impl AdamW {
    pub fn new(lr: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            step: 0,
            first: None,
            second: None,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters) {
        self.step += 1;
        let first = self.first.get_or_insert_with(|| params.zeros_like());
        let second = self.second.get_or_insert_with(|| params.zeros_like());
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps, wd) = (self.beta1, self.beta2, self.lr, self.eps, self.weight_decay);
        let grads = grads.tensors();
        for (((p, (_, g)), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(first.tensors_mut())
            .zip(second.tensors_mut())
        {
            for i in 0..p.len() {
                p[i] -= lr * wd * p[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            embed_dim: 2,
            attention_heads: 1,
            ff_dim: 2,
            max_seq_len: 2,
            vocab_size: 2,
            pattern_classes: 2,
            position_classes: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn zero_gradients_without_decay_change_nothing() {
        let mut params = Parameters::init(&tiny());
        let before = params.clone();
        let grads = params.zeros_like();
        let mut opt = AdamW::new(0.1).with_weight_decay(0.0);
        opt.step(&mut params, &grads);
        assert_eq!(params, before);
    }

    #[test]
    fn single_scalar_closed_form() {
        let mut params = Parameters::zeros(&tiny());
        let mut grads = params.zeros_like();
        params.token_embedding[[0, 0]] = 1.0;
        grads.token_embedding[[0, 0]] = 0.5;
        let mut opt = AdamW::new(0.1);
        opt.step(&mut params, &grads);
        // decay: 1 - 0.1*0.01 = 0.999; m = 0.05, v = 0.00025;
        // m_hat = 0.5, v_hat = 0.25; step = 0.1 * 0.5 / (0.5 + 1e-8)
        let expected = 0.999 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((params.token_embedding[[0, 0]] - expected).abs() < 1e-15);
        // second step with the same gradient: m = 0.095, v = 0.00049975
        opt.step(&mut params, &grads);
        let p1 = expected;
        let m_hat = 0.095 / (1.0 - 0.81);
        let v_hat: f64 = 0.000_499_75 / (1.0 - 0.998_001);
        let expected2 = p1 - 0.1 * 0.01 * p1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((params.token_embedding[[0, 0]] - expected2).abs() < 1e-12);
    }

    #[test]
    fn identical_trajectories() {
        let run = || {
            let mut params = Parameters::init(&tiny());
            let mut grads = params.clone();
            grads.token_embedding.mapv_inplace(|x| x * 0.3 + 0.1);
            let mut opt = AdamW::new(1e-2);
            for _ in 0..5 {
                opt.step(&mut params, &grads);
            }
            params
        };
        assert_eq!(run(), run());
    }
}
