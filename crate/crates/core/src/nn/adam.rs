use super::{Param, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Adam over one parameter group. Moments are keyed by the position of each
/// parameter in the slice handed to `step`, so callers must pass the same
/// group in the same order every time.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the accumulated gradients, then clears them.
    pub fn step(&mut self, params: Vec<&mut Param<T>>) {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second = self.first.clone();
        }
        assert_eq!(self.first.len(), params.len(), "adam: parameter group changed");
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = T::from_f64(1.0 - BETA1.powi(t));
        let c2 = T::from_f64(1.0 - BETA2.powi(t));
        let (b1, b2) = (T::from_f64(BETA1), T::from_f64(BETA2));
        let (lr, eps) = (T::from_f64(self.lr), T::from_f64(EPS));
        for ((p, m), v) in params.into_iter().zip(&mut self.first).zip(&mut self.second) {
            assert_eq!(p.len(), m.len(), "adam: parameter shape changed");
            for i in 0..p.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
    }
}
