//! Dense-network substrate: tensors, layers, reverse-mode gradients, SGD and
//! finite-difference gradient checking.

mod gradcheck;
mod layer;
mod loss;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, Evaluation, GradCheckReport};
pub use layer::{dense_forward, sigmoid, Activation, DenseLayer};
pub use loss::{bce_loss, cosine_distance, hinge, triplet_loss, DEFAULT_TRIPLET_MARGIN};
pub use rng::{Rng, RNG_ALGORITHM};
pub use tape::{Backward, DenseIds, Gradients, NodeId, ParamId, Tape, BCE_EPS};
pub use tensor::{dot, norm, Tensor2};

use crate::error::{Error, Result};

/// A model whose trainable tensors are addressed by [`ParamId`] position.
pub trait Parameterized {
    fn parameters(&self) -> Vec<&[f64]>;
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}

/// `params − lr · grads`. Rejects the whole update if any result is non-finite.
pub fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} params, {} grads",
            params.len(),
            grads.len()
        )));
    }
    if params
        .iter()
        .zip(grads)
        .any(|(p, g)| !(p - lr * g).is_finite())
    {
        return Err(Error::NonFiniteUpdate);
    }
    params.iter_mut().zip(grads).for_each(|(p, g)| *p -= lr * g);
    Ok(())
}

/// Applies one SGD step to every parameter that has a gradient.
pub fn sgd_step<M: Parameterized + ?Sized>(model: &mut M, grads: &Gradients, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning rate {lr}")));
    }
    let mut params = model.parameters_mut();
    for (i, p) in params.iter().enumerate() {
        if let Some(g) = grads.get(ParamId(i)) {
            if g.len() != p.len() {
                return Err(Error::ShapeMismatch(format!("gradient slot {i}")));
            }
            if p.iter().zip(g).any(|(p, g)| !(p - lr * g).is_finite()) {
                return Err(Error::NonFiniteUpdate);
            }
        }
    }
    for (i, p) in params.iter_mut().enumerate() {
        if let Some(g) = grads.get(ParamId(i)) {
            sgd_update(p, g, lr)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut p = vec![1.0];
        sgd_update(&mut p, &[0.5], 0.1).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
        let mut q = vec![1.0, 2.0];
        sgd_update(&mut q, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(q, vec![1.0, 2.0]);
        sgd_update(&mut q, &[3.0, 4.0], 0.0).unwrap();
        assert_eq!(q, vec![1.0, 2.0]);
        assert_eq!(sgd_update(&mut q, &[f64::INFINITY, 0.0], 0.1), Err(Error::NonFiniteUpdate));
        assert_eq!(q, vec![1.0, 2.0]);
    }

    struct One(DenseLayer);

    impl Parameterized for One {
        fn parameters(&self) -> Vec<&[f64]> {
            vec![self.0.weights.data(), &self.0.bias]
        }
        fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
            vec![self.0.weights.data_mut(), &mut self.0.bias]
        }
    }

    #[test]
    fn random_sgd_stays_finite() {
        let mut rng = Rng::new(11);
        let mut m = One(DenseLayer::init(4, 3, Activation::Tanh, &mut rng));
        let head = DenseLayer::init(3, 1, Activation::Sigmoid, &mut rng);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let y = if rng.below(2) == 0 { 0.0 } else { 1.0 };
            let mut tape = Tape::new();
            let xi = tape.input(x);
            let h = tape.dense(&m.0, Some(DenseIds::at(0)), xi).unwrap();
            let p = tape.dense(&head, None, h).unwrap();
            let loss = tape.bce(p, y);
            let grads = tape.backward(loss).unwrap().grads;
            sgd_step(&mut m, &grads, 0.1).unwrap();
        }
        assert!(m.0.is_finite());
    }
}
