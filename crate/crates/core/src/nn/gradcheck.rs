use super::tape::{Gradients, ParamId};
use super::Parameterized;
use crate::error::{Error, Result};

/// Loss, analytic gradients and the branch pattern of one forward pass.
pub struct Evaluation {
    pub loss: f64,
    pub grads: Gradients,
    pub kinks: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Max over checked coordinates of `|a − n| / max(1e-8, |a| + |n|)`.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±ε perturbation crossed a non-differentiable point.
    pub skipped: usize,
}

/// Compares analytic gradients against central finite differences for every
/// parameter coordinate of `model`.
///
/// A coordinate is excluded when the branch pattern (relu signs, clamps,
/// zero-norm cases) differs between the base point and either perturbation.
pub fn grad_check<M, F>(model: &mut M, epsilon: f64, mut eval: F) -> Result<GradCheckReport>
where
    M: Parameterized,
    F: FnMut(&M) -> Result<Evaluation>,
{
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!(
            "gradient-check epsilon {epsilon} outside [1e-6, 1e-4]"
        )));
    }
    let base = eval(model)?;
    let sizes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (slot, &n) in sizes.iter().enumerate() {
        let analytic = base.grads.get(ParamId(slot));
        for k in 0..n {
            let original = model.parameters()[slot][k];
            model.parameters_mut()[slot][k] = original + epsilon;
            let plus = eval(model)?;
            model.parameters_mut()[slot][k] = original - epsilon;
            let minus = eval(model)?;
            model.parameters_mut()[slot][k] = original;

            if plus.kinks != base.kinks || minus.kinks != base.kinks {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus.loss - minus.loss) / (2.0 * epsilon);
            let a = analytic.map_or(0.0, |g| g[k]);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseIds, DenseLayer, Rng, Tape};

    struct Net {
        hidden: DenseLayer,
        out: DenseLayer,
    }

    impl Parameterized for Net {
        fn parameters(&self) -> Vec<&[f64]> {
            vec![
                self.hidden.weights.data(),
                &self.hidden.bias,
                self.out.weights.data(),
                &self.out.bias,
            ]
        }
        fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
            vec![
                self.hidden.weights.data_mut(),
                &mut self.hidden.bias,
                self.out.weights.data_mut(),
                &mut self.out.bias,
            ]
        }
    }

    fn eval(net: &Net, x: &[f64], y: f64, two_layers: bool) -> Result<Evaluation> {
        let mut tape = Tape::new();
        let xi = tape.input(x.to_vec());
        let h = tape.dense(&net.hidden, Some(DenseIds::at(0)), xi)?;
        let p = if two_layers {
            tape.dense(&net.out, Some(DenseIds::at(2)), h)?
        } else {
            h
        };
        let loss = tape.bce(p, y);
        let grads = tape.backward(loss)?.grads;
        Ok(Evaluation {
            loss: tape.scalar(loss),
            grads,
            kinks: tape.kinks().to_vec(),
        })
    }

    #[test]
    fn single_dense_layer_is_tight() {
        let mut rng = Rng::new(5);
        let mut net = Net {
            hidden: DenseLayer::init(6, 1, Activation::Sigmoid, &mut rng),
            out: DenseLayer::init(1, 1, Activation::Sigmoid, &mut rng),
        };
        let x: Vec<f64> = (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let r = grad_check(&mut net, 1e-5, |n| eval(n, &x, 1.0, false)).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, 7 + 2);
    }

    #[test]
    fn relu_network_checks() {
        let mut rng = Rng::new(9);
        let mut net = Net {
            hidden: DenseLayer::init(5, 8, Activation::Relu, &mut rng),
            out: DenseLayer::init(8, 1, Activation::Sigmoid, &mut rng),
        };
        let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let r = grad_check(&mut net, 1e-5, |n| eval(n, &x, 0.0, true)).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn relu_at_zero_is_excluded() {
        // hidden pre-activation is exactly 0 for unit 0: w = 0, b = 0
        let mut net = Net {
            hidden: DenseLayer::zeros(2, 1, Activation::Relu),
            out: DenseLayer::new(
                crate::nn::Tensor2::from_vec(1, 1, vec![1.0]).unwrap(),
                vec![0.0],
                Activation::Sigmoid,
            )
            .unwrap(),
        };
        let r = grad_check(&mut net, 1e-5, |n| eval(n, &[1.0, 1.0], 1.0, true)).unwrap();
        assert!(r.skipped > 0);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn epsilon_range_enforced() {
        let mut rng = Rng::new(1);
        let mut net = Net {
            hidden: DenseLayer::init(1, 1, Activation::Sigmoid, &mut rng),
            out: DenseLayer::init(1, 1, Activation::Sigmoid, &mut rng),
        };
        assert!(grad_check(&mut net, 1e-2, |n| eval(n, &[1.0], 1.0, false)).is_err());
    }
}
