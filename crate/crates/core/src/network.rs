//! Softplus feed-forward networks with exact reverse-mode gradients.
//!
//! One parameter structure covers both flavors used by the models: the
//! input-convex configuration (non-negative weights in every layer, scalar
//! output) and the unconstrained direct-output network. Besides plain
//! backpropagation, the module provides the second-order path needed when a
//! loss depends on the gradient of the network with respect to its inputs:
//! for an upstream sensitivity u on grad_input, the directional derivative
//! t = d f(x + s u)/ds is built by a forward tangent sweep and then
//! backpropagated, which yields exact parameter gradients of u . grad f.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Numerically stable softplus log(1 + exp(x)).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, the softplus derivative.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Second softplus derivative sigma'(x) = s(x)(1 - s(x)).
fn sigmoid_deriv(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Softplus,
    Linear,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(x),
            Activation::Linear => x,
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(x),
            Activation::Linear => 1.0,
        }
    }

    fn second_deriv(&self, x: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid_deriv(x),
            Activation::Linear => 0.0,
        }
    }
}

/// One dense layer, weights stored row-major (rows x cols).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub nonneg: bool,
    pub act: Activation,
}

/// Feed-forward network. The input-convex configuration flags every layer
/// non-negative; sign freedom in designated inputs is recovered upstream by
/// feeding both the quantity and its negative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Parameter-shaped gradient (or optimizer moment) buffers.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|x| *x = 0.0);
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (x, y) in w.iter_mut().zip(ow.iter()) {
                *x += y;
            }
            for (x, y) in b.iter_mut().zip(ob.iter()) {
                *x += y;
            }
        }
    }
}

/// Cached activations and pre-activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// a[0] is the input, a[h] the post-activation of layer h.
    pub a: Vec<Vec<f64>>,
    /// z[h-1] is the pre-activation of layer h.
    pub z: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.a.last().unwrap()
    }
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x.iter()) {
            acc += wi * xi;
        }
        out[r] = acc;
    }
}

fn matvec_t(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let yr = y[r];
        for (o, wi) in out.iter_mut().zip(row.iter()) {
            *o += wi * yr;
        }
    }
}

impl Mlp {
    /// Input-convex scalar network: softplus hidden layers, linear scalar
    /// output, non-negative weights in every layer including the first.
    pub fn icnn(sizes: &[usize], rng: &mut impl Rng) -> Result<Mlp> {
        if sizes.len() < 2 || *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidConfig(
                "icnn needs at least input and a scalar output layer".into(),
            ));
        }
        let mut net = Self::build(sizes, true, rng);
        net.project_nonneg();
        Ok(net)
    }

    /// Unconstrained network with softplus hidden layers and a linear
    /// vector-valued output.
    pub fn ffnn(sizes: &[usize], rng: &mut impl Rng) -> Result<Mlp> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig("ffnn needs at least two layer sizes".into()));
        }
        Ok(Self::build(sizes, false, rng))
    }

    fn build(sizes: &[usize], nonneg: bool, rng: &mut impl Rng) -> Mlp {
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for h in 1..sizes.len() {
            let (rows, cols) = (sizes[h], sizes[h - 1]);
            let act = if h == sizes.len() - 1 {
                Activation::Linear
            } else {
                Activation::Softplus
            };
            let mut layer = Layer {
                w: vec![0.0; rows * cols],
                b: vec![0.0; rows],
                rows,
                cols,
                nonneg,
                act,
            };
            glorot_fill(&mut layer, rng);
            layers.push(layer);
        }
        Mlp { layers }
    }

    /// Resample all weights in place (fresh restart), zero the biases and
    /// re-apply the non-negativity projection.
    pub fn reinit(&mut self, rng: &mut impl Rng) {
        for layer in &mut self.layers {
            glorot_fill(layer, rng);
        }
        self.project_nonneg();
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.rows));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut a = Vec::with_capacity(self.layers.len() + 1);
        let mut z = Vec::with_capacity(self.layers.len());
        a.push(x.to_vec());
        for layer in &self.layers {
            let mut zh = vec![0.0; layer.rows];
            matvec(&layer.w, layer.rows, layer.cols, a.last().unwrap(), &mut zh);
            for (zi, bi) in zh.iter_mut().zip(layer.b.iter()) {
                *zi += bi;
            }
            let ah = zh.iter().map(|&v| layer.act.apply(v)).collect();
            z.push(zh);
            a.push(ah);
        }
        Ok(Trace { a, z })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.output().to_vec())
    }

    /// Input gradient of a scalar network from a cached trace.
    pub fn input_grad_from_trace(&self, t: &Trace) -> Result<Vec<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                expected: 1,
                got: self.output_dim(),
            });
        }
        let mut delta = vec![1.0];
        for (h, layer) in self.layers.iter().enumerate().rev() {
            let r: Vec<f64> = delta
                .iter()
                .zip(t.z[h].iter())
                .map(|(d, z)| d * layer.act.deriv(*z))
                .collect();
            let mut prev = vec![0.0; layer.cols];
            matvec_t(&layer.w, layer.rows, layer.cols, &r, &mut prev);
            delta = prev;
        }
        Ok(delta)
    }

    /// Scalar value and exact input gradient.
    pub fn grad_input(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.trace(x)?;
        let g = self.input_grad_from_trace(&t)?;
        Ok((t.output()[0], g))
    }

    /// Accumulate exact parameter gradients of
    /// `upstream_output . f(x) + upstream_input_grad . grad_x f(x)`.
    ///
    /// The second term backpropagates through the input gradient itself
    /// (forward tangent along the upstream direction, then reverse sweep),
    /// which is what a loss on stresses rather than energies requires.
    pub fn backprop_from_trace(
        &self,
        t: &Trace,
        upstream_output: Option<&[f64]>,
        upstream_input_grad: Option<&[f64]>,
        grads: &mut MlpGrads,
    ) -> Result<()> {
        let n_layers = self.layers.len();
        if let Some(u) = upstream_output {
            if u.len() != self.output_dim() {
                return Err(Error::ShapeMismatch {
                    expected: self.output_dim(),
                    got: u.len(),
                });
            }
        }
        if upstream_input_grad.is_some() && self.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                expected: 1,
                got: self.output_dim(),
            });
        }
        if let Some(u) = upstream_input_grad {
            if u.len() != self.input_dim() {
                return Err(Error::ShapeMismatch {
                    expected: self.input_dim(),
                    got: u.len(),
                });
            }
        }

        // Forward tangent sweep for the input-gradient path.
        let mut tangents: Vec<Vec<f64>> = Vec::new(); // t[h]: tangent of a[h]
        let mut tangent_pre: Vec<Vec<f64>> = Vec::new(); // tz[h-1]: tangent of z[h]
        if let Some(u) = upstream_input_grad {
            tangents.push(u.to_vec());
            for (h, layer) in self.layers.iter().enumerate() {
                let mut tz = vec![0.0; layer.rows];
                matvec(&layer.w, layer.rows, layer.cols, &tangents[h], &mut tz);
                let th = tz
                    .iter()
                    .zip(t.z[h].iter())
                    .map(|(tzi, zi)| layer.act.deriv(*zi) * tzi)
                    .collect();
                tangent_pre.push(tz);
                tangents.push(th);
            }
        }

        // Reverse sweep over both the primal and tangent computations.
        let mut a_bar: Vec<f64> = match upstream_output {
            Some(u) => u.to_vec(),
            None => vec![0.0; self.output_dim()],
        };
        let mut t_bar: Vec<f64> = if upstream_input_grad.is_some() {
            vec![1.0; 1]
        } else {
            Vec::new()
        };
        for h in (0..n_layers).rev() {
            let layer = &self.layers[h];
            let zs = &t.z[h];
            let with_tangent = upstream_input_grad.is_some();

            let mut z_bar = vec![0.0; layer.rows];
            let mut tz_bar = vec![0.0; layer.rows];
            for r in 0..layer.rows {
                let d1 = layer.act.deriv(zs[r]);
                z_bar[r] = d1 * a_bar[r];
                if with_tangent {
                    let d2 = layer.act.second_deriv(zs[r]);
                    z_bar[r] += d2 * tangent_pre[h][r] * t_bar[r];
                    tz_bar[r] = d1 * t_bar[r];
                }
            }

            let (gw, gb) = &mut grads.layers[h];
            let a_prev = &t.a[h];
            for r in 0..layer.rows {
                let row = &mut gw[r * layer.cols..(r + 1) * layer.cols];
                let zb = z_bar[r];
                for (g, ap) in row.iter_mut().zip(a_prev.iter()) {
                    *g += zb * ap;
                }
                gb[r] += zb;
                if with_tangent {
                    let tzb = tz_bar[r];
                    let t_prev = &tangents[h];
                    for (g, tp) in row.iter_mut().zip(t_prev.iter()) {
                        *g += tzb * tp;
                    }
                }
            }

            let mut prev_a_bar = vec![0.0; layer.cols];
            matvec_t(&layer.w, layer.rows, layer.cols, &z_bar, &mut prev_a_bar);
            a_bar = prev_a_bar;
            if with_tangent {
                let mut prev_t_bar = vec![0.0; layer.cols];
                matvec_t(&layer.w, layer.rows, layer.cols, &tz_bar, &mut prev_t_bar);
                t_bar = prev_t_bar;
            }
        }
        Ok(())
    }

    /// Convenience wrapper computing its own trace.
    pub fn grad_params(
        &self,
        x: &[f64],
        upstream_output: Option<&[f64]>,
        upstream_input_grad: Option<&[f64]>,
        grads: &mut MlpGrads,
    ) -> Result<()> {
        let t = self.trace(x)?;
        self.backprop_from_trace(&t, upstream_output, upstream_input_grad, grads)
    }

    /// Clamp every constrained weight at zero. Biases are untouched.
    pub fn project_nonneg(&mut self) {
        for layer in &mut self.layers {
            if layer.nonneg {
                for w in &mut layer.w {
                    if *w < 0.0 {
                        *w = 0.0;
                    }
                }
            }
        }
    }

    /// Largest negative constrained weight, 0 when the constraint holds.
    pub fn constraint_violation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for layer in &self.layers {
            if layer.nonneg {
                for w in &layer.w {
                    worst = worst.max(-*w);
                }
            }
        }
        worst
    }
}

fn glorot_fill(layer: &mut Layer, rng: &mut impl Rng) {
    let limit = (6.0 / (layer.rows + layer.cols) as f64).sqrt();
    for w in &mut layer.w {
        *w = rng.gen_range(-limit..limit);
    }
    for b in &mut layer.b {
        *b = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(softplus(100.0) - 100.0 >= 0.0);
        assert!(softplus(100.0) - 100.0 <= 1e-40);
        assert!(softplus(-100.0) >= 0.0);
        assert!(softplus(-100.0) <= 1e-40);
    }

    #[test]
    fn constant_network_outputs_bias() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        let mut net = Mlp::icnn(&[3, 4, 1], &mut rng).unwrap();
        for layer in &mut net.layers {
            layer.w.iter_mut().for_each(|w| *w = 0.0);
        }
        net.layers[1].b[0] = 2.5;
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 3.0]] {
            assert!((net.forward(&x).unwrap()[0] - 2.5).abs() < 1e-15);
            // Constant network: zero input gradient.
            let (_, g) = net.grad_input(&x).unwrap();
            assert!(g.iter().all(|v| v.abs() < 1e-15));
        }
    }

    fn unit_chain() -> Mlp {
        // 1-1-1 network, all weights 1, biases 0, softplus hidden.
        Mlp {
            layers: vec![
                Layer {
                    w: vec![1.0],
                    b: vec![0.0],
                    rows: 1,
                    cols: 1,
                    nonneg: true,
                    act: Activation::Softplus,
                },
                Layer {
                    w: vec![1.0],
                    b: vec![0.0],
                    rows: 1,
                    cols: 1,
                    nonneg: true,
                    act: Activation::Linear,
                },
            ],
        }
    }

    #[test]
    fn unit_chain_value_and_gradient() {
        let net = unit_chain();
        let (f, g) = net.grad_input(&[0.0]).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = unit_chain();
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn midpoint_convexity_of_constrained_network() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let net = Mlp::icnn(&[5, 8, 8, 1], &mut rng).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mid: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let fm = net.forward(&mid).unwrap()[0];
            let fx = net.forward(&x).unwrap()[0];
            let fy = net.forward(&y).unwrap()[0];
            assert!(fm <= 0.5 * (fx + fy) + 1e-12);
        }
    }

    #[test]
    fn monotone_channels_have_nonnegative_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let net = Mlp::icnn(&[4, 6, 1], &mut rng).unwrap();
        for _ in 0..500 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let (_, g) = net.grad_input(&x).unwrap();
            assert!(g.iter().all(|v| *v >= -1e-12));
        }
    }

    #[test]
    fn input_gradient_matches_fd() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..20 {
            let net = Mlp::ffnn(&[4, 6, 5, 1], &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, g) = net.grad_input(&x).unwrap();
            let h = 1e-6;
            for k in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd =
                    (net.forward(&xp).unwrap()[0] - net.forward(&xm).unwrap()[0]) / (2.0 * h);
                assert!(
                    (g[k] - fd).abs() / g[k].abs().max(1.0) < 1e-7,
                    "{} vs {}",
                    g[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_param_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let net = Mlp::icnn(&[3, 4, 1], &mut rng).unwrap();
        let mut grads = MlpGrads::zeros_like(&net);
        net.grad_params(&[0.3, -0.4, 1.0], Some(&[0.0]), None, &mut grads)
            .unwrap();
        for (w, b) in &grads.layers {
            assert!(w.iter().chain(b.iter()).all(|g| *g == 0.0));
        }
    }

    #[test]
    fn linear_layer_input_grad_param_pattern() {
        // f = W x with one linear layer: the parameter gradient of
        // u . grad_x f is exactly u broadcast into the weight row.
        let net = Mlp {
            layers: vec![Layer {
                w: vec![0.7, -0.3, 0.2],
                b: vec![0.1],
                rows: 1,
                cols: 3,
                nonneg: false,
                act: Activation::Linear,
            }],
        };
        let u = [2.0, -1.0, 0.5];
        let mut grads = MlpGrads::zeros_like(&net);
        net.grad_params(&[0.4, 0.5, 0.6], None, Some(&u), &mut grads)
            .unwrap();
        for k in 0..3 {
            assert!((grads.layers[0].0[k] - u[k]).abs() < 1e-15);
        }
        assert!(grads.layers[0].1[0].abs() < 1e-15);
    }

    /// Full finite-difference check of the parameter gradient of
    /// u_f . f + u_g . grad_x f over every weight and bias.
    #[test]
    fn param_gradients_match_fd() {
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        for _ in 0..10 {
            let mut net = Mlp::ffnn(&[4, 5, 6, 1], &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let uf = [rng.gen_range(-1.0..1.0)];
            let ug: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let objective = |net: &Mlp| {
                let (f, g) = net.grad_input(&x).unwrap();
                uf[0] * f + ug.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>()
            };

            let mut grads = MlpGrads::zeros_like(&net);
            net.grad_params(&x, Some(&uf), Some(&ug), &mut grads).unwrap();

            let h = 1e-6;
            for li in 0..net.layers.len() {
                for wi in 0..net.layers[li].w.len() {
                    let orig = net.layers[li].w[wi];
                    net.layers[li].w[wi] = orig + h;
                    let fp = objective(&net);
                    net.layers[li].w[wi] = orig - h;
                    let fm = objective(&net);
                    net.layers[li].w[wi] = orig;
                    let fd = (fp - fm) / (2.0 * h);
                    let an = grads.layers[li].0[wi];
                    assert!(
                        (an - fd).abs() / an.abs().max(1.0) < 1e-5,
                        "layer {} w[{}]: {} vs {}",
                        li,
                        wi,
                        an,
                        fd
                    );
                }
                for bi in 0..net.layers[li].b.len() {
                    let orig = net.layers[li].b[bi];
                    net.layers[li].b[bi] = orig + h;
                    let fp = objective(&net);
                    net.layers[li].b[bi] = orig - h;
                    let fm = objective(&net);
                    net.layers[li].b[bi] = orig;
                    let fd = (fp - fm) / (2.0 * h);
                    let an = grads.layers[li].1[bi];
                    assert!(
                        (an - fd).abs() / an.abs().max(1.0) < 1e-5,
                        "layer {} b[{}]: {} vs {}",
                        li,
                        bi,
                        an,
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_clamps() {
        let mut net = Mlp {
            layers: vec![Layer {
                w: vec![-1.0, -2.0, 0.5, 0.0],
                b: vec![-3.0, 4.0],
                rows: 2,
                cols: 2,
                nonneg: true,
                act: Activation::Linear,
            }],
        };
        net.project_nonneg();
        assert_eq!(net.layers[0].w, vec![0.0, 0.0, 0.5, 0.0]);
        // Biases untouched.
        assert_eq!(net.layers[0].b, vec![-3.0, 4.0]);
        let snapshot = net.layers[0].w.clone();
        net.project_nonneg();
        assert_eq!(net.layers[0].w, snapshot);
    }
}
