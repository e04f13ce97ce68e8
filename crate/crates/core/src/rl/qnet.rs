use rand::Rng;

use super::RlError;
use crate::numcore::{Gradients, NumError, Param, Tape, Tensor, Var};

/// Hidden widths of every Q-network.
pub const QNET_HIDDEN: [usize; 5] = [64, 128, 256, 128, 64];

/// Fully connected Q-network with ReLU between layers and a linear head of
/// one output per action.
#[derive(Clone, Debug, PartialEq)]
pub struct QNet {
    state_dim: usize,
    n_actions: usize,
    /// `(weight, bias)` per layer; biases are `1×out` rows.
    pub layers: Vec<(Param, Param)>,
}

impl QNet {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self, RlError> {
        if state_dim == 0 || n_actions == 0 {
            return Err(RlError::InvalidConfig(
                "Q-network needs positive state and action sizes".into(),
            ));
        }
        let mut dims = vec![state_dim];
        dims.extend(QNET_HIDDEN);
        dims.push(n_actions);
        let layers = dims
            .windows(2)
            .map(|w| (Param::glorot(w[0], w[1], rng), Param::zeros(1, w[1])))
            .collect();
        Ok(Self {
            state_dim,
            n_actions,
            layers,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn check_state(&self, s: &[f64]) -> Result<(), RlError> {
        if s.len() != self.state_dim {
            return Err(RlError::StateDim {
                expected: self.state_dim,
                found: s.len(),
            });
        }
        Ok(())
    }

    /// Q-values for every row of `states` (`n×state_dim`), without a tape.
    pub fn predict(&self, states: &Tensor) -> Result<Tensor, RlError> {
        let mut h = states.clone();
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = h.matmul(&w.value)?;
            let c = h.cols();
            for (j, v) in h.data_mut().iter_mut().enumerate() {
                *v += b.value.data()[j % c];
                if i < last && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Ok(h)
    }

    /// Q-values of a single state.
    pub fn q_values(&self, s: &[f64]) -> Result<Vec<f64>, RlError> {
        self.check_state(s)?;
        Ok(self.predict(&Tensor::row_vector(s))?.into_vec())
    }

    /// Records the parameters on `tape`, in layer order.
    pub fn bind(&self, tape: &mut Tape) -> Result<Vec<(Var, Var)>, NumError> {
        self.layers
            .iter()
            .map(|(w, b)| Ok((tape.param(w)?, tape.param(b)?)))
            .collect()
    }

    /// Differentiable forward pass over a batch of states.
    pub fn forward(tape: &mut Tape, vars: &[(Var, Var)], states: Var) -> Result<Var, NumError> {
        let mut h = states;
        for (i, &(w, b)) in vars.iter().enumerate() {
            let z = tape.matmul(h, w)?;
            h = tape.add_row(z, b)?;
            if i + 1 < vars.len() {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    pub fn accumulate(&mut self, vars: &[(Var, Var)], grads: &Gradients) {
        for ((w, b), &(vw, vb)) in self.layers.iter_mut().zip(vars) {
            grads.accumulate(vw, w);
            grads.accumulate(vb, b);
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    /// Parameters with stable names, in layer order.
    pub fn named_params(&self) -> Vec<(String, &Param)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, (w, b))| [(format!("layers.{i}.weight"), w), (format!("layers.{i}.bias"), b)])
            .collect()
    }

    /// Overwrites one named parameter; the shape must match.
    pub fn load_param(&mut self, name: &str, value: Tensor) -> Result<(), RlError> {
        let idx = self
            .named_params()
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| RlError::UnknownParam(name.to_string()))?;
        let p = self.params_mut().swap_remove(idx);
        if p.shape() != value.shape() {
            return Err(RlError::ParamShape {
                name: name.to_string(),
                expected: p.shape(),
                found: value.shape(),
            });
        }
        p.reset_to(value)?;
        Ok(())
    }

    /// Copies parameter values from `other`, leaving optimizer state alone.
    pub fn copy_values_from(&mut self, other: &QNet) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.value = ow.value.clone();
            b.value = ob.value.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn architecture_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = QNet::new(16, 3, &mut rng).unwrap();
        let shapes: Vec<_> = q.layers.iter().map(|(w, _)| w.shape()).collect();
        assert_eq!(
            shapes,
            vec![(16, 64), (64, 128), (128, 256), (256, 128), (128, 64), (64, 3)]
        );
    }

    #[test]
    fn tape_forward_matches_predict() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = QNet::new(4, 2, &mut rng).unwrap();
        let s = Tensor::from_rows(&[vec![0.1, -0.3, 0.7, 1.2], vec![-1.0, 0.0, 0.5, 0.2]]).unwrap();
        let mut tape = Tape::new();
        let vars = q.bind(&mut tape).unwrap();
        let x = tape.constant(s.clone()).unwrap();
        let out = QNet::forward(&mut tape, &vars, x).unwrap();
        let direct = q.predict(&s).unwrap();
        assert!(tape.value(out).max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn wrong_state_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = QNet::new(4, 2, &mut rng).unwrap();
        assert!(matches!(
            q.q_values(&[1.0]),
            Err(RlError::StateDim { expected: 4, found: 1 })
        ));
    }
}
