//! Element-wise first-order optimizers: Adagrad, Adadelta and plain SGD.
//!
//! Parameters are handed over as a list of flat tensors; accumulators are
//! allocated on the first step and must keep the same shapes afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "optimizer", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adagrad { lr: f64, eps: f64 },
    Adadelta { rho: f64, eps: f64 },
    Sgd { lr: f64 },
}

impl OptimizerKind {
    pub fn adagrad() -> Self {
        OptimizerKind::Adagrad { lr: 0.01, eps: 1e-7 }
    }

    pub fn adadelta() -> Self {
        OptimizerKind::Adadelta { rho: 0.95, eps: 1e-7 }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerKind::Adagrad { lr, eps } => lr > 0.0 && eps >= 0.0,
            OptimizerKind::Adadelta { rho, eps } => (0.0..1.0).contains(&rho) && eps > 0.0,
            OptimizerKind::Sgd { lr } => lr > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    /// Adagrad: running sum of g^2. Adadelta: decayed average of g^2.
    grad_sq: Vec<Vec<f64>>,
    /// Adadelta only: decayed average of squared updates.
    update_sq: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            grad_sq: Vec::new(),
            update_sq: Vec::new(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Squared-gradient accumulators, one per parameter tensor.
    pub fn grad_sq(&self) -> &[Vec<f64>] {
        &self.grad_sq
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {i}: {} parameters but {} gradients",
                    p.len(),
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of tensor {i}")));
            }
        }
        self.ensure_shapes(params)?;

        match self.kind {
            OptimizerKind::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (p, g) in p.iter_mut().zip(g.iter()) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerKind::Adagrad { lr, eps } => {
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.grad_sq) {
                    for ((p, &g), a) in p.iter_mut().zip(g.iter()).zip(acc.iter_mut()) {
                        *a += g * g;
                        *p -= lr * g / (a.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Adadelta { rho, eps } => {
                let tensors = params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.grad_sq.iter_mut().zip(&mut self.update_sq));
                for ((p, g), (eg, ed)) in tensors {
                    for (((p, &g), eg), ed) in p.iter_mut().zip(g.iter()).zip(eg.iter_mut()).zip(ed.iter_mut()) {
                        *eg = rho * *eg + (1.0 - rho) * g * g;
                        let delta = -((*ed + eps).sqrt() / (*eg + eps).sqrt()) * g;
                        *ed = rho * *ed + (1.0 - rho) * delta * delta;
                        *p += delta;
                    }
                }
            }
        }
        Ok(())
    }

    fn ensure_shapes(&mut self, params: &[&mut [f64]]) -> Result<()> {
        if self.grad_sq.is_empty() {
            self.grad_sq = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adadelta { .. }) {
                self.update_sq = self.grad_sq.clone();
            }
            return Ok(());
        }
        let same =
            self.grad_sq.len() == params.len() && self.grad_sq.iter().zip(params).all(|(a, p)| a.len() == p.len());
        if same {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                "parameter shapes changed between optimizer steps".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_step(kind: OptimizerKind, p: f64, g: f64) -> f64 {
        let mut opt = OptimizerState::new(kind).unwrap();
        let mut params = [p];
        opt.step(&mut [&mut params[..]], &[&[g]]).unwrap();
        params[0]
    }

    #[test]
    fn sgd_example() {
        assert_abs_diff_eq!(one_step(OptimizerKind::sgd(0.1), 1.0, 2.0), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn adagrad_first_step() {
        let p = one_step(OptimizerKind::Adagrad { lr: 0.1, eps: 0.0 }, 0.0, 3.0);
        assert_abs_diff_eq!(p, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn adadelta_first_step() {
        let p = one_step(OptimizerKind::Adadelta { rho: 0.95, eps: 1e-6 }, 0.0, 1.0);
        let want = -(1e-6f64 / (0.05 + 1e-6)).sqrt();
        assert_abs_diff_eq!(p, want, epsilon = 1e-15);
        assert_abs_diff_eq!(p, -0.0044721, epsilon = 1e-7);
    }

    #[test]
    fn adadelta_first_step_scale_free() {
        let steps: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&g| one_step(OptimizerKind::adadelta(), 0.0, g).abs())
            .collect();
        for s in &steps {
            assert!((s / steps[1] - 1.0).abs() < 0.01, "{steps:?}");
        }
    }

    #[test]
    fn adagrad_steps_shrink_and_accumulators_grow() {
        let mut opt = OptimizerState::new(OptimizerKind::adagrad()).unwrap();
        let mut params = [0.0];
        let mut last_update = f64::INFINITY;
        let mut last_acc = 0.0;
        for _ in 0..50 {
            let before = params[0];
            opt.step(&mut [&mut params[..]], &[&[0.7]]).unwrap();
            let update = (params[0] - before).abs();
            assert!(update < last_update);
            assert!(opt.grad_sq()[0][0] >= last_acc);
            last_update = update;
            last_acc = opt.grad_sq()[0][0];
        }
    }

    #[test]
    fn all_optimizers_solve_quadratic() {
        // default adagrad (lr 0.01) decays too fast to get there in 10k steps
        let kinds = [
            OptimizerKind::sgd(0.1),
            OptimizerKind::Adagrad { lr: 0.1, eps: 1e-7 },
            OptimizerKind::adadelta(),
        ];
        for kind in kinds {
            let mut opt = OptimizerState::new(kind).unwrap();
            let mut p = [1.0f64];
            let mut steps = 0;
            while p[0].abs() >= 1e-3 && steps < 10_000 {
                let g = [p[0]];
                opt.step(&mut [&mut p[..]], &[&g]).unwrap();
                steps += 1;
            }
            assert!(p[0].abs() < 1e-3, "{kind:?} stalled at {}", p[0]);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut opt = OptimizerState::new(OptimizerKind::adadelta()).unwrap();
            let mut p = [0.3, -0.2];
            for t in 0..20 {
                let g = [(t as f64).sin(), (t as f64).cos()];
                opt.step(&mut [&mut p[..]], &[&g]).unwrap();
            }
            (p, opt)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_input() {
        let mut opt = OptimizerState::new(OptimizerKind::adagrad()).unwrap();
        let mut p = [0.0, 0.0];
        assert!(opt.step(&mut [&mut p[..]], &[&[1.0]]).is_err());
        assert!(opt.step(&mut [&mut p[..]], &[&[1.0, f64::NAN]]).is_err());
        opt.step(&mut [&mut p[..]], &[&[1.0, 1.0]]).unwrap();
        let mut q = [0.0];
        assert!(opt.step(&mut [&mut q[..]], &[&[1.0]]).is_err());
        assert!(OptimizerState::new(OptimizerKind::Adadelta { rho: 1.5, eps: 1e-7 }).is_err());
    }
}
