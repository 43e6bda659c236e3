//! Adaptive moment estimation with decoupled weight decay.

use crate::tensor::ParamStore;

pub struct AdamW {
    lr: f32,
    weight_decay: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    t: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamW {
    pub fn new(store: &ParamStore, lr: f32, weight_decay: f32) -> Self {
        let sizes: Vec<usize> = store.iter().map(|(_, t)| t.numel()).collect();
        AdamW {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update from the gradients currently held in the store. Decay is
    /// decoupled: `theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)`.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let names: Vec<String> = store.names().to_vec();
        for (slot, name) in names.iter().enumerate() {
            let tensor = store.get_mut(name).expect("names come from the store");
            let Some(grad) = tensor.grad.as_ref() else {
                continue;
            };
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            for i in 0..tensor.data.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                tensor.data[i] -= self.lr
                    * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * tensor.data[i]);
            }
        }
    }
}
