use serde::{Deserialize, Serialize};

/// Bias-corrected Adam optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(1, 0.1);
        let mut p = vec![0.0];
        adam.step(&mut p, &[1.0]);
        assert!((p[0] + 0.1).abs() < 1e-7, "{}", p[0]);
    }

    #[test]
    fn quadratic_converges_monotonically() {
        let mut adam = Adam::new(1, 0.01);
        let mut x = vec![1.0];
        let mut last = 1.0f64;
        for _ in 0..100 {
            let g = 2.0 * x[0];
            adam.step(&mut x, &[g]);
            assert!(x[0].abs() < last, "|x| did not shrink: {} >= {}", x[0].abs(), last);
            last = x[0].abs();
        }
        assert!(last < 0.5, "{last}");
    }
}
