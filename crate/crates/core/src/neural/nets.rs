//! The two policy networks: a discrete actor-critic (accept/reject, or the
//! two-action mini-game bid) and the continuous offer network.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, ensure_len, Result};
use crate::neural::distributions::{HeadKind, Marginal};
use crate::neural::layers::{Activation, LayerStack, StackCache};
use crate::neural::params::{prefixed, prefixed_mut, Parameterized, TensorMut, TensorRef};

pub const ACCEPT_WIDTH: usize = 512;
/// Width of the offer network's hidden layers.
pub const OFFER_WIDTH: usize = 64;
/// Added to every sigmoid scale output so scales stay positive.
pub const SCALE_FLOOR: f64 = 1e-3;
/// Added to the ReLU outputs of Beta heads.
pub const BETA_OFFSET: f64 = 1.0;
pub const VALUE_DEPTH: usize = 7;

use Activation::{Identity, Relu, Relu6, Sigmoid};

/// Shared trunk feeding a logit head and a scalar value head.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteActorCritic {
    pub base: LayerStack,
    pub actor: LayerStack,
    pub value: LayerStack,
}

/// Caches of a batched pass through a [`DiscreteActorCritic`].
#[derive(Clone, Debug)]
pub struct DiscreteForward {
    base: StackCache,
    actor: StackCache,
    value: StackCache,
}

impl DiscreteForward {
    pub fn logits(&self) -> ArrayView2<'_, f64> {
        self.actor.output.view()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.value.output.column(0)
    }
}

/// Two ReLU6 layers of width 512 shared by a 2-logit actor and a value head.
pub fn build_accept_net(input_dim: usize, rng: &mut ChaCha8Rng) -> Result<DiscreteActorCritic> {
    if !matches!(input_dim, 2 | 4) {
        return Err(contract(format!(
            "accept net input must be 2 or 4 wide, got {input_dim}"
        )));
    }
    DiscreteActorCritic::new(input_dim, ACCEPT_WIDTH, 2, rng)
}

impl DiscreteActorCritic {
    pub fn new(input_dim: usize, width: usize, actions: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(DiscreteActorCritic {
            base: LayerStack::new(&[input_dim, width, width], &[Relu6, Relu6], rng)?,
            actor: LayerStack::new(&[width, actions], &[Identity], rng)?,
            value: LayerStack::new(&[width, 1], &[Identity], rng)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    pub fn actions(&self) -> usize {
        self.actor.output_dim()
    }

    /// Logits and value for one state.
    pub fn evaluate(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        let h = self.base.forward_one(state)?;
        Ok((self.actor.forward_one(&h)?, self.value.forward_one(&h)?[0]))
    }

    pub fn forward_batch(&self, states: ArrayView2<'_, f64>) -> Result<DiscreteForward> {
        let base = self.base.forward(states)?;
        let actor = self.actor.forward(base.output.view())?;
        let value = self.value.forward(base.output.view())?;
        Ok(DiscreteForward { base, actor, value })
    }

    pub fn backward_batch(
        &self,
        fwd: &DiscreteForward,
        d_logits: ArrayView2<'_, f64>,
        d_value: ArrayView1<'_, f64>,
    ) -> Result<DiscreteActorCritic> {
        let (actor, dh_actor) = self.actor.backward(&fwd.actor, d_logits)?;
        let (value, dh_value) = self.value.backward(&fwd.value, d_value.insert_axis(Axis(1)))?;
        let dh = dh_actor + dh_value;
        let (base, _) = self.base.backward(&fwd.base, dh.view())?;
        Ok(DiscreteActorCritic { base, actor, value })
    }
}

impl Parameterized for DiscreteActorCritic {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        prefixed("base", self.base.tensors())
            .chain(prefixed("actor", self.actor.tensors()))
            .chain(prefixed("value", self.value.tensors()))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        prefixed_mut("base", self.base.tensors_mut())
            .chain(prefixed_mut("actor", self.actor.tensors_mut()))
            .chain(prefixed_mut("value", self.value.tensors_mut()))
            .collect()
    }
}

/// Shared base feeding a deep value stack and one location-like and one
/// scale-like head per issue.
#[derive(Clone, Debug, PartialEq)]
pub struct OfferNet {
    pub kind: HeadKind,
    pub beta_offset: f64,
    pub base: LayerStack,
    pub value: LayerStack,
    /// Locations, or α for Beta heads.
    pub first: Vec<LayerStack>,
    /// Scales, or β for Beta heads.
    pub second: Vec<LayerStack>,
}

#[derive(Clone, Debug)]
pub struct OfferForward {
    base: StackCache,
    value: StackCache,
    first: Vec<StackCache>,
    second: Vec<StackCache>,
    kind: HeadKind,
    beta_offset: f64,
}

impl OfferForward {
    pub fn batch_size(&self) -> usize {
        self.base.output.nrows()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.value.output.column(0)
    }

    fn second_offset(&self) -> f64 {
        match self.kind {
            HeadKind::Beta => self.beta_offset,
            _ => SCALE_FLOOR,
        }
    }

    fn first_offset(&self) -> f64 {
        match self.kind {
            HeadKind::Beta => self.beta_offset,
            _ => 0.0,
        }
    }

    /// Distribution parameters for every issue of batch row `row`.
    pub fn marginals(&self, row: usize) -> Result<Vec<Marginal>> {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(f, s)| {
                Marginal::new(
                    self.kind,
                    f.output[[row, 0]] + self.first_offset(),
                    s.output[[row, 0]] + self.second_offset(),
                )
            })
            .collect()
    }
}

/// Offer network with one head pair per issue.
///
/// Location heads are two ReLU6 layers and a sigmoid; scale heads one ReLU6
/// layer and a sigmoid plus [`SCALE_FLOOR`]. For Beta heads the final
/// sigmoids become ReLUs and both shapes get `beta_offset` added.
pub fn build_offer_net(input_dim: usize, issues: usize, kind: HeadKind, rng: &mut ChaCha8Rng) -> Result<OfferNet> {
    OfferNet::new(input_dim, issues, kind, OFFER_WIDTH, BETA_OFFSET, rng)
}

impl OfferNet {
    pub fn new(
        input_dim: usize,
        issues: usize,
        kind: HeadKind,
        width: usize,
        beta_offset: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if issues == 0 {
            return Err(contract("offer net needs at least one issue"));
        }
        if !(beta_offset > 0.0) {
            return Err(contract("beta offset must be positive"));
        }
        let last = if kind == HeadKind::Beta { Relu } else { Sigmoid };
        let base = LayerStack::new(&[input_dim, width], &[Relu6], rng)?;
        let mut dims = vec![width; VALUE_DEPTH];
        dims.push(1);
        let mut acts = vec![Relu6; VALUE_DEPTH - 1];
        acts.push(Identity);
        let value = LayerStack::new(&dims, &acts, rng)?;
        let mut first = Vec::with_capacity(issues);
        let mut second = Vec::with_capacity(issues);
        for _ in 0..issues {
            first.push(LayerStack::new(&[width, width, width, 1], &[Relu6, Relu6, last], rng)?);
        }
        for _ in 0..issues {
            second.push(LayerStack::new(&[width, width, 1], &[Relu6, last], rng)?);
        }
        Ok(OfferNet {
            kind,
            beta_offset,
            base,
            value,
            first,
            second,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    pub fn issues(&self) -> usize {
        self.first.len()
    }

    pub fn forward_batch(&self, states: ArrayView2<'_, f64>) -> Result<OfferForward> {
        let base = self.base.forward(states)?;
        let h = base.output.view();
        let value = self.value.forward(h)?;
        let first = self.first.iter().map(|s| s.forward(h)).collect::<Result<_>>()?;
        let second = self.second.iter().map(|s| s.forward(h)).collect::<Result<_>>()?;
        Ok(OfferForward {
            base,
            value,
            first,
            second,
            kind: self.kind,
            beta_offset: self.beta_offset,
        })
    }

    /// Marginals and value for one state.
    pub fn evaluate(&self, state: &[f64]) -> Result<(Vec<Marginal>, f64)> {
        let fwd = self.forward_batch(ndarray::aview1(state).insert_axis(Axis(0)))?;
        Ok((fwd.marginals(0)?, fwd.values()[0]))
    }

    /// `d_first[[r, i]]` and `d_second[[r, i]]` are the loss gradients with
    /// respect to issue `i`'s two distribution parameters in row `r`.
    pub fn backward_batch(
        &self,
        fwd: &OfferForward,
        d_value: ArrayView1<'_, f64>,
        d_first: ArrayView2<'_, f64>,
        d_second: ArrayView2<'_, f64>,
    ) -> Result<OfferNet> {
        let rows = fwd.batch_size();
        ensure_len(rows, d_value.len())?;
        if d_first.dim() != (rows, self.issues()) || d_second.dim() != (rows, self.issues()) {
            return Err(contract("head gradients must be batch × issues"));
        }
        let (value, mut dh) = self.value.backward(&fwd.value, d_value.insert_axis(Axis(1)))?;
        let mut first = Vec::with_capacity(self.issues());
        let mut second = Vec::with_capacity(self.issues());
        for i in 0..self.issues() {
            let g = d_first.column(i).insert_axis(Axis(1));
            let (grad, d) = self.first[i].backward(&fwd.first[i], g)?;
            dh += &d;
            first.push(grad);
        }
        for i in 0..self.issues() {
            let g = d_second.column(i).insert_axis(Axis(1));
            let (grad, d) = self.second[i].backward(&fwd.second[i], g)?;
            dh += &d;
            second.push(grad);
        }
        let (base, _) = self.base.backward(&fwd.base, dh.view())?;
        Ok(OfferNet {
            kind: self.kind,
            beta_offset: self.beta_offset,
            base,
            value,
            first,
            second,
        })
    }
}

impl Parameterized for OfferNet {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out: Vec<TensorRef<'_>> = prefixed("base", self.base.tensors())
            .chain(prefixed("value", self.value.tensors()))
            .collect();
        for (i, s) in self.first.iter().enumerate() {
            out.extend(prefixed(&format!("first{i}"), s.tensors()));
        }
        for (i, s) in self.second.iter().enumerate() {
            out.extend(prefixed(&format!("second{i}"), s.tensors()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out: Vec<TensorMut<'_>> = prefixed_mut("base", self.base.tensors_mut())
            .chain(prefixed_mut("value", self.value.tensors_mut()))
            .collect();
        for (i, s) in self.first.iter_mut().enumerate() {
            out.extend(prefixed_mut(&format!("first{i}"), s.tensors_mut()));
        }
        for (i, s) in self.second.iter_mut().enumerate() {
            out.extend(prefixed_mut(&format!("second{i}"), s.tensors_mut()));
        }
        out
    }
}

/// Stacks per-step states into a batch matrix.
pub fn batch_of(states: &[Vec<f64>]) -> Result<Array2<f64>> {
    let Some(first) = states.first() else {
        return Err(contract("empty batch"));
    };
    let cols = first.len();
    let mut out = Array2::zeros((states.len(), cols));
    for (mut row, s) in out.rows_mut().into_iter().zip(states) {
        ensure_len(cols, s.len())?;
        row.assign(&Array1::from(s.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::distributions::softmax_policy;
    use crate::neural::params::assert_gradients;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};

    #[test]
    fn accept_net_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = build_accept_net(4, &mut rng).unwrap();
        let (logits, value) = net.evaluate(&[0.2, 0.5, 0.9, 0.05]).unwrap();
        assert_eq!(logits.len(), 2);
        assert!(logits.iter().all(|v| v.is_finite()) && value.is_finite());
        assert!((softmax_policy(&logits).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(build_accept_net(3, &mut rng).is_err());
    }

    #[test]
    fn accept_heads_share_the_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = build_accept_net(2, &mut rng).unwrap();
        let s = [0.4, 0.3];
        let (l0, v0) = net.evaluate(&s).unwrap();
        let mut bumped = net.clone();
        bumped.base.layers[1].bias += 0.05;
        let (l1, v1) = bumped.evaluate(&s).unwrap();
        assert!(l0.iter().zip(&l1).any(|(a, b)| (a - b).abs() > 1e-9));
        assert!((v0 - v1).abs() > 1e-9);
    }

    #[test]
    fn offer_net_output_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in [HeadKind::Normal, HeadKind::Cauchy, HeadKind::Beta] {
            let net = build_offer_net(4, 3, kind, &mut rng).unwrap();
            assert_eq!(net.value.layers.len(), VALUE_DEPTH);
            for _ in 0..50 {
                let s: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..2.0)).collect();
                let (marginals, v) = net.evaluate(&s).unwrap();
                assert!(v.is_finite());
                for m in marginals {
                    match kind {
                        HeadKind::Beta => assert!(m.first >= BETA_OFFSET && m.second >= BETA_OFFSET),
                        _ => {
                            assert!(m.first > 0.0 && m.first < 1.0);
                            assert!(m.second > SCALE_FLOOR && m.second < 1.0 + SCALE_FLOOR);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn discrete_gradients() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = DiscreteActorCritic::new(4, 6, 2, &mut rng).unwrap();
            let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
            let gl = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-1.0..1.0));
            let gv = Array1::from_shape_simple_fn(3, || rng.random_range(-1.0..1.0));
            let loss = |n: &DiscreteActorCritic| {
                let f = n.forward_batch(x.view()).unwrap();
                (&f.logits() * &gl).sum() + (&f.values() * &gv).sum()
            };
            let fwd = net.forward_batch(x.view()).unwrap();
            let grads = net.backward_batch(&fwd, gl.view(), gv.view()).unwrap();
            assert_gradients(&net, &grads, loss, 1e-4, 1e-6);
        }
    }

    #[test]
    fn offer_gradients() {
        for kind in [HeadKind::Normal, HeadKind::Cauchy, HeadKind::Beta] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let net = OfferNet::new(4, 3, kind, 5, 1.0, &mut rng).unwrap();
            let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
            let g1 = Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0));
            let g2 = Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0));
            let gv = Array1::from_shape_simple_fn(3, || rng.random_range(-1.0..1.0));
            let loss = |n: &OfferNet| {
                let f = n.forward_batch(x.view()).unwrap();
                let mut total = (&f.values() * &gv).sum();
                for r in 0..3 {
                    for (i, m) in f.marginals(r).unwrap().iter().enumerate() {
                        total += g1[[r, i]] * m.first + g2[[r, i]] * m.second;
                    }
                }
                total
            };
            let fwd = net.forward_batch(x.view()).unwrap();
            let grads = net.backward_batch(&fwd, gv.view(), g1.view(), g2.view()).unwrap();
            assert_gradients(&net, &grads, loss, 1e-4, 1e-6);
        }
    }
}
