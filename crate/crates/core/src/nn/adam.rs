use serde::{Deserialize, Serialize};

use super::Parameter;

/// Bias-corrected Adam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Applies one update to every parameter and zeroes its gradient.
    pub fn step<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        for p in params {
            self.update(p);
        }
    }

    fn update(&self, p: &mut Parameter) {
        p.step += 1;
        let t = p.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let values = p.value.as_mut_slice();
        let grads = p.grad.as_mut_slice();
        let m = p.first_moment.as_mut_slice();
        let v = p.second_moment.as_mut_slice();
        for i in 0..values.len() {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            values[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            grads[i] = 0.0;
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(1e-3)
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step<'a>(
    params: impl IntoIterator<Item = &'a mut Parameter>,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    Adam {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    }
    .step(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    #[test]
    fn zero_gradient_leaves_value() {
        let mut p = Parameter::new(Matrix::filled(2, 2, 0.7));
        Adam::new(0.1).step([&mut p]);
        assert_eq!(p.value, Matrix::filled(2, 2, 0.7));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.02] {
            let mut p = Parameter::new(Matrix::filled(1, 1, 1.0));
            p.grad = Matrix::filled(1, 1, g);
            adam_step([&mut p], 0.01, 0.9, 0.999, 1e-8);
            // m̂ = g and v̂ = g² after one step, so Δ = -lr·g/(|g| + ε).
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((p.value.get(0, 0) - expected).abs() < 1e-15);
            assert_eq!(p.grad.get(0, 0), 0.0);
            assert_eq!(p.steps_taken(), 1);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = Parameter::new(Matrix::filled(1, 3, 0.5));
            for k in 0..10 {
                p.grad = Matrix::from_vec(1, 3, vec![k as f64, -1.0, 0.25]).unwrap();
                Adam::new(0.05).step([&mut p]);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
