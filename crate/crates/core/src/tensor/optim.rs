use super::Tensor;
use crate::error::{Error, Result};

/// Heavy-ball SGD: `v <- momentum * v + g; p <- p - lr * v`.
#[derive(Clone, Debug)]
pub struct SgdState {
    learning_rate: f64,
    momentum: f64,
    velocity: Vec<Tensor>,
}

impl SgdState {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Parameter(format!("learning rate {learning_rate} must be >= 0")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Parameter(format!("momentum {momentum} must be in [0, 1)")));
        }
        Ok(SgdState {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// Applies one update. Velocity buffers are created on the first call and
    /// must keep matching the parameter shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::dim(format!(
                "sgd: {} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            p.same_shape(g, "sgd gradient")?;
        }
        if self.velocity.is_empty() {
            self.velocity = params
                .iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect::<Result<_>>()?;
        }
        if self.velocity.len() != params.len() {
            return Err(Error::dim("sgd: parameter count changed between steps"));
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            p.same_shape(v, "sgd velocity")?;
            for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *vv = self.momentum * *vv + gv;
                *pv -= self.learning_rate * *vv;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(lr: f64, momentum: f64, steps: usize, p0: f64) -> f64 {
        let mut sgd = SgdState::new(lr, momentum).unwrap();
        let mut p = Tensor::scalar(p0);
        let g = Tensor::scalar(1.0);
        for _ in 0..steps {
            sgd.step(&mut [&mut p], &[&g]).unwrap();
        }
        p.item().unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        assert_eq!(run(0.0, 0.9, 3, 1.5), 1.5);
    }

    #[test]
    fn plain_step() {
        assert!((run(0.1, 0.0, 1, 1.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_recursion() {
        // v1 = 1, p1 = -0.1; v2 = 1.9, p2 = -0.1 - 0.19
        assert!((run(0.1, 0.9, 2, 0.0) + 0.29).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut sgd = SgdState::new(0.1, 0.0).unwrap();
        let mut p = Tensor::zeros(&[2]).unwrap();
        let g = Tensor::zeros(&[3]).unwrap();
        assert!(sgd.step(&mut [&mut p], &[&g]).is_err());
        assert!(SgdState::new(0.1, 1.0).is_err());
    }
}
