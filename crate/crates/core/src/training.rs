//! Weighted mean-squared-error calibration with a projected ADAM optimizer.
//!
//! Two trainable flavors share the loop: the invariant-based energy model,
//! whose loss lives on the energy gradients (stress and electric field) and
//! therefore backpropagates through the network input gradient, and the
//! uninformed direct model mapping (C, d0) straight to the 12 output
//! components.

use crate::constitutive::{ConstitutiveModel, Scaling};
use crate::dataset::{Dataset, LoadPath};
use crate::error::{Error, Result};
use crate::network::{Mlp, MlpGrads, Trace};
use crate::tensor::{Tensor2, Vec3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Anything that predicts scaled (P, e0) from (F, scaled d0).
pub trait ResponseModel {
    fn response(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<(Tensor2, Vec3)>;
}

impl ResponseModel for ConstitutiveModel {
    fn response(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<(Tensor2, Vec3)> {
        self.stress_and_field(f, d0_hat)
    }
}

/// Uninformed model: a plain network from the 9 components of C = F^T F and
/// the 3 components of d0 to the 9 + 3 output components. Objective by
/// construction, nothing else.
#[derive(Debug, Clone)]
pub struct DirectModel {
    pub net: Mlp,
    pub scaling: Scaling,
}

impl DirectModel {
    pub fn new(net: Mlp, scaling: Scaling) -> Result<Self> {
        if net.input_dim() != 12 {
            return Err(Error::ShapeMismatch {
                expected: 12,
                got: net.input_dim(),
            });
        }
        if net.output_dim() != 12 {
            return Err(Error::ShapeMismatch {
                expected: 12,
                got: net.output_dim(),
            });
        }
        Ok(DirectModel { net, scaling })
    }

    pub fn inputs(f: &Tensor2, d0_hat: &Vec3) -> [f64; 12] {
        let c = f.transpose().matmul(f);
        let mut x = [0.0; 12];
        x[..9].copy_from_slice(&c.0);
        x[9..].copy_from_slice(&d0_hat.0);
        x
    }
}

impl ResponseModel for DirectModel {
    fn response(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<(Tensor2, Vec3)> {
        let y = self.net.forward(&Self::inputs(f, d0_hat))?;
        let mut p = Tensor2::ZERO;
        p.0.copy_from_slice(&y[..9]);
        Ok((p, Vec3::new(y[9], y[10], y[11])))
    }
}

/// A model under calibration.
#[derive(Debug, Clone)]
pub enum TrainableModel {
    Energy(ConstitutiveModel),
    Direct(DirectModel),
}

impl TrainableModel {
    pub fn net(&self) -> &Mlp {
        match self {
            TrainableModel::Energy(m) => &m.net,
            TrainableModel::Direct(m) => &m.net,
        }
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        match self {
            TrainableModel::Energy(m) => &mut m.net,
            TrainableModel::Direct(m) => &mut m.net,
        }
    }
}

impl ResponseModel for TrainableModel {
    fn response(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<(Tensor2, Vec3)> {
        match self {
            TrainableModel::Energy(m) => m.response(f, d0_hat),
            TrainableModel::Direct(m) => m.response(f, d0_hat),
        }
    }
}

/// Load-path weight: mean Frobenius norm of the stress labels, floored at
/// 1e-8 so stress-free paths keep a finite weight.
pub fn path_weight(path: &LoadPath) -> Result<f64> {
    if path.rows.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "path '{}' has no rows",
            path.id
        )));
    }
    let sum: f64 = path.rows.iter().map(|r| r.p.norm()).sum();
    Ok((sum / path.rows.len() as f64).max(1e-8))
}

/// Weighted MSE over the dataset:
/// sum_i 1/(#D_i w_i) sum_j ( ||P_ij - P(F,d0)||^2 + ||e0_ij - e0(F,d0)||^2 ).
pub fn mse_loss<M: ResponseModel + Sync>(model: &M, dataset: &Dataset) -> Result<f64> {
    let per_path: Result<Vec<f64>> = dataset
        .paths
        .par_iter()
        .map(|path| {
            let w = path_weight(path)?;
            let mut acc = 0.0;
            for row in &path.rows {
                let (p, e0) = model.response(&row.f, &row.d0)?;
                acc += (p - row.p).norm_sq() + (e0 - row.e0).norm_sq();
            }
            Ok(acc / (path.rows.len() as f64 * w))
        })
        .collect();
    Ok(per_path?.iter().sum())
}

/// Optimizer configuration. `loss` is implied by the model flavor; the
/// remaining fields mirror the usual ADAM knobs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Re-project constrained weights after every step.
    pub project: bool,
    /// Independent re-initializations, keeping the best final loss.
    pub restarts: usize,
    /// Record the full-batch loss every this many epochs (the final epoch is
    /// always recorded).
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if !(learning_rate >= 0.0) {
            return Err(Error::InvalidConfig("learning rate must be >= 0".into()));
        }
        if epochs == 0 {
            return Err(Error::InvalidConfig("need at least one epoch".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(TrainConfig {
            learning_rate,
            epochs,
            batch_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            seed,
            project: true,
            restarts: 1,
            eval_every: 1,
        })
    }
}

/// First/second moment buffers plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: MlpGrads,
    pub v: MlpGrads,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        AdamState {
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
            step: 0,
        }
    }
}

/// One bias-corrected ADAM update, followed by the non-negativity projection
/// when requested.
pub fn adam_step(params: &mut Mlp, grads: &MlpGrads, state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (li, layer) in params.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[li];
        let (mw, mb) = &mut state.m.layers[li];
        let (vw, vb) = &mut state.v.layers[li];
        for k in 0..layer.w.len() {
            mw[k] = cfg.beta1 * mw[k] + (1.0 - cfg.beta1) * gw[k];
            vw[k] = cfg.beta2 * vw[k] + (1.0 - cfg.beta2) * gw[k] * gw[k];
            let m_hat = mw[k] / bc1;
            let v_hat = vw[k] / bc2;
            layer.w[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        for k in 0..layer.b.len() {
            mb[k] = cfg.beta1 * mb[k] + (1.0 - cfg.beta1) * gb[k];
            vb[k] = cfg.beta2 * vb[k] + (1.0 - cfg.beta2) * gb[k] * gb[k];
            let m_hat = mb[k] / bc1;
            let v_hat = vb[k] / bc2;
            layer.b[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    if cfg.project {
        params.project_nonneg();
    }
}

/// Full-batch loss history entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub entries: Vec<HistoryEntry>,
}

impl History {
    pub fn final_mse(&self) -> f64 {
        self.entries.last().map(|e| e.mse).unwrap_or(f64::NAN)
    }
}

/// Per-row context for the energy-gradient loss: invariants and their
/// derivatives never change during training, so they are cached up front.
struct EnergyRowCtx {
    x: Vec<f64>,
    d_f: Vec<Tensor2>,
    d_d0: Vec<Vec3>,
    /// P_vol'(J) H, the theta-independent stress offset.
    p_vol: Tensor2,
    p_data: Tensor2,
    e0_data: Vec3,
    coeff: f64,
}

struct DirectRowCtx {
    x: [f64; 12],
    y: [f64; 12],
    coeff: f64,
}

enum RowCtx {
    Energy(Vec<EnergyRowCtx>),
    Direct(Vec<DirectRowCtx>),
}

fn build_contexts(model: &TrainableModel, dataset: &Dataset) -> Result<RowCtx> {
    match model {
        TrainableModel::Energy(m) => {
            let mut rows = Vec::with_capacity(dataset.n_rows());
            for path in &dataset.paths {
                let w = path_weight(path)?;
                let coeff = 1.0 / (path.rows.len() as f64 * w);
                for row in &path.rows {
                    let b = m.invariant_bundle(&row.f, &row.d0)?;
                    let (_, dv, _) = crate::constitutive::pvol(row.f.det(), m.vol, m.alpha)?;
                    rows.push(EnergyRowCtx {
                        x: b.values,
                        d_f: b.d_f,
                        d_d0: b.d_d0,
                        p_vol: row.f.cofactor().scale(dv),
                        p_data: row.p,
                        e0_data: row.e0,
                        coeff,
                    });
                }
            }
            Ok(RowCtx::Energy(rows))
        }
        TrainableModel::Direct(_) => {
            let mut rows = Vec::with_capacity(dataset.n_rows());
            for path in &dataset.paths {
                let w = path_weight(path)?;
                let coeff = 1.0 / (path.rows.len() as f64 * w);
                for row in &path.rows {
                    let mut y = [0.0; 12];
                    y[..9].copy_from_slice(&row.p.0);
                    y[9..].copy_from_slice(&row.e0.0);
                    rows.push(DirectRowCtx {
                        x: DirectModel::inputs(&row.f, &row.d0),
                        y,
                        coeff,
                    });
                }
            }
            Ok(RowCtx::Direct(rows))
        }
    }
}

fn energy_row_predict(net: &Mlp, ctx: &EnergyRowCtx, trace: &Trace) -> Result<(Tensor2, Vec3)> {
    let g = net.input_grad_from_trace(trace)?;
    let mut p = ctx.p_vol;
    let mut e0 = Vec3::ZERO;
    for k in 0..ctx.x.len() {
        p += ctx.d_f[k].scale(g[k]);
        e0 = e0 + ctx.d_d0[k].scale(g[k]);
    }
    Ok((p, e0))
}

/// Loss and accumulated parameter gradient of one row.
fn energy_row_grad(net: &Mlp, ctx: &EnergyRowCtx, grads: &mut MlpGrads) -> Result<f64> {
    let trace = net.trace(&ctx.x)?;
    let (p, e0) = energy_row_predict(net, ctx, &trace)?;
    let dp = p - ctx.p_data;
    let de = e0 - ctx.e0_data;
    let loss = ctx.coeff * (dp.norm_sq() + de.norm_sq());
    // Upstream on the input gradient: u_k = 2 c (dP : dI_k/dF + de . dI_k/dd0).
    let mut u = vec![0.0; ctx.x.len()];
    for k in 0..ctx.x.len() {
        u[k] = 2.0 * ctx.coeff * (dp.ddot(&ctx.d_f[k]) + de.dot(&ctx.d_d0[k]));
    }
    net.backprop_from_trace(&trace, None, Some(&u), grads)?;
    Ok(loss)
}

fn energy_row_loss(net: &Mlp, ctx: &EnergyRowCtx) -> Result<f64> {
    let trace = net.trace(&ctx.x)?;
    let (p, e0) = energy_row_predict(net, ctx, &trace)?;
    Ok(ctx.coeff * ((p - ctx.p_data).norm_sq() + (e0 - ctx.e0_data).norm_sq()))
}

fn direct_row_grad(net: &Mlp, ctx: &DirectRowCtx, grads: &mut MlpGrads) -> Result<f64> {
    let trace = net.trace(&ctx.x)?;
    let y = trace.output();
    let mut u = [0.0; 12];
    let mut loss = 0.0;
    for k in 0..12 {
        let r = y[k] - ctx.y[k];
        loss += r * r;
        u[k] = 2.0 * ctx.coeff * r;
    }
    net.backprop_from_trace(&trace, Some(&u), None, grads)?;
    Ok(ctx.coeff * loss)
}

fn direct_row_loss(net: &Mlp, ctx: &DirectRowCtx) -> Result<f64> {
    let y = net.forward(&ctx.x)?;
    let mut loss = 0.0;
    for k in 0..12 {
        let r = y[k] - ctx.y[k];
        loss += r * r;
    }
    Ok(ctx.coeff * loss)
}

/// Deterministic parallel reduction: fixed-size chunks evaluated in
/// parallel, partial results folded in chunk order.
const GRAD_CHUNK: usize = 64;

fn batch_gradient(
    net: &Mlp,
    ctx: &RowCtx,
    batch: &[usize],
    grads: &mut MlpGrads,
) -> Result<f64> {
    grads.reset();
    let partials: Result<Vec<(MlpGrads, f64)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut local = MlpGrads::zeros_like(net);
            let mut loss = 0.0;
            for &idx in chunk {
                loss += match ctx {
                    RowCtx::Energy(rows) => energy_row_grad(net, &rows[idx], &mut local)?,
                    RowCtx::Direct(rows) => direct_row_grad(net, &rows[idx], &mut local)?,
                };
            }
            Ok((local, loss))
        })
        .collect();
    let mut total = 0.0;
    for (partial, loss) in partials? {
        grads.add_assign(&partial);
        total += loss;
    }
    Ok(total)
}

fn full_loss(net: &Mlp, ctx: &RowCtx) -> Result<f64> {
    let n = match ctx {
        RowCtx::Energy(rows) => rows.len(),
        RowCtx::Direct(rows) => rows.len(),
    };
    let idx: Vec<usize> = (0..n).collect();
    let partials: Result<Vec<f64>> = idx
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            for &i in chunk {
                loss += match ctx {
                    RowCtx::Energy(rows) => energy_row_loss(net, &rows[i])?,
                    RowCtx::Direct(rows) => direct_row_loss(net, &rows[i])?,
                };
            }
            Ok(loss)
        })
        .collect();
    Ok(partials?.iter().sum())
}

fn train_once(
    mut model: TrainableModel,
    ctx: &RowCtx,
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<(TrainableModel, History)> {
    let n_rows = match ctx {
        RowCtx::Energy(rows) => rows.len(),
        RowCtx::Direct(rows) => rows.len(),
    };
    if n_rows == 0 {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut grads = MlpGrads::zeros_like(model.net());
    let mut adam = AdamState::new(model.net());
    let mut history = History::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            batch_gradient(model.net(), ctx, batch, &mut grads)?;
            adam_step(model.net_mut(), &grads, &mut adam, cfg);
        }
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let mse = full_loss(model.net(), ctx)?;
            if !mse.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            history.entries.push(HistoryEntry { epoch, mse });
        }
    }
    Ok((model, history))
}

/// Calibrate the model on the dataset. With `restarts > 1`, the parameters
/// are re-initialized per restart (seed + restart index) and the run with
/// the lowest final full-batch loss wins; the given initialization is
/// restart zero.
pub fn train(
    model: &TrainableModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(TrainableModel, History)> {
    dataset.validate()?;
    let ctx = build_contexts(model, dataset)?;
    let mut best: Option<(TrainableModel, History)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut candidate = model.clone();
        if restart > 0 {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
            candidate.net_mut().reinit(&mut rng);
        }
        let (trained, history) = train_once(candidate, &ctx, cfg, cfg.seed)?;
        let better = match &best {
            None => true,
            Some((_, h)) => history.final_mse() < h.final_mse(),
        };
        if better {
            best = Some((trained, history));
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{Selector, VolTerm};
    use crate::dataset::Row;
    use crate::invariants::TiStructuralTensor;
    use rand::{Rng, SeedableRng};

    fn single_row_dataset(p: Tensor2) -> Dataset {
        Dataset {
            paths: vec![LoadPath {
                id: "p0".into(),
                rows: vec![Row {
                    f: Tensor2::identity(),
                    d0: Vec3::ZERO,
                    p,
                    e0: Vec3::ZERO,
                }],
            }],
        }
    }

    #[test]
    fn path_weight_examples() {
        let zero = single_row_dataset(Tensor2::ZERO);
        assert_eq!(path_weight(&zero.paths[0]).unwrap(), 1e-8);

        let ident = single_row_dataset(Tensor2::identity());
        assert!((path_weight(&ident.paths[0]).unwrap() - 3.0_f64.sqrt()).abs() < 1e-15);

        // Homogeneity: scaling all stresses scales the weight.
        let mut rng = ChaCha12Rng::seed_from_u64(80);
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.push(Row {
                f: Tensor2::identity(),
                d0: Vec3::ZERO,
                p: crate::tensor::tests::rand_tensor(&mut rng, 2.0),
                e0: Vec3::ZERO,
            });
        }
        let path = LoadPath {
            id: "p".into(),
            rows: rows.clone(),
        };
        let w = path_weight(&path).unwrap();
        let scaled = LoadPath {
            id: "p".into(),
            rows: rows
                .iter()
                .map(|r| Row {
                    p: r.p.scale(2.5),
                    ..*r
                })
                .collect(),
        };
        assert!((path_weight(&scaled).unwrap() - 2.5 * w).abs() < 1e-12 * w);

        let empty = LoadPath {
            id: "e".into(),
            rows: vec![],
        };
        assert!(path_weight(&empty).is_err());
    }

    /// A model that replays fixed outputs, for loss arithmetic tests.
    struct FixedModel {
        p: Tensor2,
        e0: Vec3,
    }

    impl ResponseModel for FixedModel {
        fn response(&self, _: &Tensor2, _: &Vec3) -> Result<(Tensor2, Vec3)> {
            Ok((self.p, self.e0))
        }
    }

    #[test]
    fn mse_loss_examples() {
        // Exact reproduction: zero loss.
        let ds = single_row_dataset(Tensor2::identity());
        let exact = FixedModel {
            p: Tensor2::identity(),
            e0: Vec3::ZERO,
        };
        assert_eq!(mse_loss(&exact, &ds).unwrap(), 0.0);

        // Residual stress = I on a path with w = sqrt(3): loss = 3/sqrt(3).
        let off = FixedModel {
            p: Tensor2::identity().scale(2.0),
            e0: Vec3::ZERO,
        };
        let loss = mse_loss(&off, &ds).unwrap();
        assert!((loss - 3.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mse_loss_matches_naive_two_loop_reference() {
        let mut rng = ChaCha12Rng::seed_from_u64(81);
        let mut paths = Vec::new();
        for pi in 0..5 {
            let mut rows = Vec::new();
            for _ in 0..7 {
                rows.push(Row {
                    f: crate::tensor::tests::rand_def_grad(&mut rng),
                    d0: Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                    p: crate::tensor::tests::rand_tensor(&mut rng, 2.0),
                    e0: Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                });
            }
            paths.push(LoadPath {
                id: format!("p{pi}"),
                rows,
            });
        }
        let ds = Dataset { paths };
        let model = FixedModel {
            p: Tensor2::diag(0.3, -0.2, 0.9),
            e0: Vec3::new(0.1, 0.2, -0.4),
        };
        // Independent re-summation, plain double loop.
        let mut reference = 0.0;
        for path in &ds.paths {
            let mut w = 0.0;
            for row in &path.rows {
                w += row.p.norm();
            }
            w = (w / path.rows.len() as f64).max(1e-8);
            let mut inner = 0.0;
            for row in &path.rows {
                inner += (model.p - row.p).norm_sq() + (model.e0 - row.e0).norm_sq();
            }
            reference += inner / (path.rows.len() as f64 * w);
        }
        let loss = mse_loss(&model, &ds).unwrap();
        assert!((loss - reference).abs() < 1e-13 * reference.max(1.0));
    }

    fn toy_net(w: Vec<f64>, rows: usize, cols: usize) -> Mlp {
        Mlp {
            layers: vec![crate::network::Layer {
                w,
                b: vec![0.0; rows],
                rows,
                cols,
                nonneg: false,
                act: crate::network::Activation::Linear,
            }],
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut net = toy_net(vec![1.0, -2.0], 1, 2);
        let grads = MlpGrads::zeros_like(&net);
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::new(0.1, 1, 1, 0).unwrap();
        adam_step(&mut net, &grads, &mut state, &cfg);
        assert_eq!(net.layers[0].w, vec![1.0, -2.0]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_approximates_signed_update() {
        let mut net = toy_net(vec![1.0, -2.0], 1, 2);
        let mut grads = MlpGrads::zeros_like(&net);
        grads.layers[0].0 = vec![0.5, -1.0];
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::new(0.01, 1, 1, 0).unwrap();
        adam_step(&mut net, &grads, &mut state, &cfg);
        assert!((net.layers[0].w[0] - (1.0 - 0.01)).abs() < 1e-6 * 0.01);
        assert!((net.layers[0].w[1] - (-2.0 + 0.01)).abs() < 1e-6 * 0.01);
    }

    /// Two manual steps frozen from an independent recomputation.
    #[test]
    fn adam_two_steps_match_hand_rolled_oracle() {
        let mut net = toy_net(vec![1.0, -2.0], 1, 2);
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::new(0.1, 1, 1, 0).unwrap();

        let mut grads = MlpGrads::zeros_like(&net);
        grads.layers[0].0 = vec![0.5, -1.0];
        adam_step(&mut net, &grads, &mut state, &cfg);
        assert!((net.layers[0].w[0] - 9.00000019999996015e-01).abs() < 1e-12);
        assert!((net.layers[0].w[1] - -1.90000000999999896e+00).abs() < 1e-12);

        grads.layers[0].0 = vec![0.25, 0.5];
        adam_step(&mut net, &grads, &mut state, &cfg);
        assert!((net.layers[0].w[0] - 8.06782079704876587e-01).abs() < 1e-12);
        assert!((net.layers[0].w[1] - -1.87336630940339077e+00).abs() < 1e-12);
    }

    fn tiny_energy_model(seed: u64) -> TrainableModel {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let selector = Selector::Ti;
        let net = Mlp::icnn(&[selector.invariants().len(), 4, 1], &mut rng).unwrap();
        TrainableModel::Energy(
            ConstitutiveModel::new(
                selector,
                Some(TiStructuralTensor::new(Vec3::new(0.0, 0.0, 1.0)).unwrap()),
                None,
                net,
                VolTerm::NearlyIncompressible,
                25.0,
                Scaling::unit(),
            )
            .unwrap(),
        )
    }

    fn tiny_dataset(seed: u64, n_paths: usize, n_rows: usize) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut paths = Vec::new();
        for pi in 0..n_paths {
            let mut rows = Vec::new();
            for _ in 0..n_rows {
                rows.push(Row {
                    f: crate::tensor::tests::rand_def_grad(&mut rng),
                    d0: Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                    p: crate::tensor::tests::rand_tensor(&mut rng, 1.0),
                    e0: Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                });
            }
            paths.push(LoadPath {
                id: format!("p{pi}"),
                rows,
            });
        }
        Dataset { paths }
    }

    /// The training loss gradient (through stress and field) matches finite
    /// differences over every parameter of a small energy model.
    #[test]
    fn training_gradient_matches_fd_over_parameters() {
        let model = tiny_energy_model(82);
        let ds = tiny_dataset(83, 3, 5);
        let ctx = build_contexts(&model, &ds).unwrap();

        let loss_of = |net: &Mlp| full_loss(net, &ctx).unwrap();

        let net = model.net().clone();
        let mut grads = MlpGrads::zeros_like(&net);
        let all: Vec<usize> = (0..ds.n_rows()).collect();
        batch_gradient(&net, &ctx, &all, &mut grads).unwrap();

        let mut probe = net.clone();
        let h = 1e-6;
        for li in 0..probe.layers.len() {
            for wi in 0..probe.layers[li].w.len() {
                let orig = probe.layers[li].w[wi];
                probe.layers[li].w[wi] = orig + h;
                let fp = loss_of(&probe);
                probe.layers[li].w[wi] = orig - h;
                let fm = loss_of(&probe);
                probe.layers[li].w[wi] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let an = grads.layers[li].0[wi];
                assert!(
                    (an - fd).abs() / an.abs().max(1.0) < 1e-5,
                    "layer {li} w[{wi}]: {an} vs {fd}"
                );
            }
            for bi in 0..probe.layers[li].b.len() {
                let orig = probe.layers[li].b[bi];
                probe.layers[li].b[bi] = orig + h;
                let fp = loss_of(&probe);
                probe.layers[li].b[bi] = orig - h;
                let fm = loss_of(&probe);
                probe.layers[li].b[bi] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let an = grads.layers[li].1[bi];
                assert!(
                    (an - fd).abs() / an.abs().max(1.0) < 1e-5,
                    "layer {li} b[{bi}]: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_model_and_records_initial_loss() {
        let model = tiny_energy_model(84);
        let ds = tiny_dataset(85, 2, 4);
        let cfg = TrainConfig::new(0.0, 1, 4, 7).unwrap();
        let before = mse_loss(&model, &ds).unwrap();
        let (trained, history) = train(&model, &ds, &cfg).unwrap();
        for (a, b) in trained.net().layers.iter().zip(model.net().layers.iter()) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
        assert_eq!(history.entries.len(), 1);
        assert!((history.entries[0].mse - before).abs() < 1e-13 * before.max(1.0));
    }

    #[test]
    fn training_is_deterministic_and_preserves_constraints() {
        let model = tiny_energy_model(86);
        let ds = tiny_dataset(87, 3, 6);
        let mut cfg = TrainConfig::new(0.01, 30, 8, 11).unwrap();
        cfg.restarts = 2;
        let (a, ha) = train(&model, &ds, &cfg).unwrap();
        let (b, hb) = train(&model, &ds, &cfg).unwrap();
        assert_eq!(ha, hb);
        for (la, lb) in a.net().layers.iter().zip(b.net().layers.iter()) {
            assert_eq!(la.w, lb.w);
            assert_eq!(la.b, lb.b);
        }
        assert_eq!(a.net().constraint_violation(), 0.0);
    }

    /// Convex toy problem: symmetric stretches with labels P = 2F are a
    /// learnable function of the direct-model inputs; 2,000 epochs (split
    /// into a coarse and a fine learning-rate stage) must reach a tiny loss.
    #[test]
    fn linear_target_sanity_task_converges() {
        let mut rng = ChaCha12Rng::seed_from_u64(88);
        let mut rows = Vec::new();
        for _ in 0..64 {
            let a = crate::tensor::tests::rand_tensor(&mut rng, 0.03);
            let f = Tensor2::identity() + (a + a.transpose()).scale(0.5);
            rows.push(Row {
                f,
                d0: Vec3::ZERO,
                p: f.scale(2.0),
                e0: Vec3::ZERO,
            });
        }
        let ds = Dataset {
            paths: vec![LoadPath {
                id: "toy".into(),
                rows,
            }],
        };
        let net = Mlp::ffnn(&[12, 32, 12], &mut rng).unwrap();
        let model = TrainableModel::Direct(DirectModel::new(net, Scaling::unit()).unwrap());
        let mut cfg = TrainConfig::new(0.01, 1400, 8, 3).unwrap();
        cfg.eval_every = 1400;
        let (coarse, _) = train(&model, &ds, &cfg).unwrap();
        let mut fine = TrainConfig::new(0.0008, 600, 8, 4).unwrap();
        fine.eval_every = 600;
        let (_, history) = train(&coarse, &ds, &fine).unwrap();
        assert!(
            history.final_mse() <= 1e-6,
            "final mse {}",
            history.final_mse()
        );
    }
}
