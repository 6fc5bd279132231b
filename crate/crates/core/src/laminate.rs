//! Analytical rank-one laminate homogenization: micro-field reconstruction
//! from interface amplitude vectors, the 5x5 Newton solve of the traction
//! and tangential-field jump conditions, and the volume-averaged effective
//! response used as a data generator.

use crate::dataset::{Dataset, LoadPath, Row};
use crate::error::{Error, Result};
use crate::tensor::{cross, Tensor2, Vec3};
use rayon::prelude::*;

/// Two-phase laminate description in scaled units (phase-a shear modulus 1).
#[derive(Debug, Clone)]
pub struct LaminateConfig {
    /// Second phase-a modulus relative to mu1.
    pub mu2: f64,
    /// Volumetric penalty relative to mu1.
    pub lambda: f64,
    /// Mechanical contrast of phase b.
    pub f_m: f64,
    /// Electric contrast of phase b.
    pub f_e: f64,
    /// Volume fraction of phase a.
    pub c_a: f64,
    /// Lamination normal.
    pub l0: Vec3,
    /// Tangent frame completing l0, columns of the 3x2 map T.
    pub t1: Vec3,
    pub t2: Vec3,
}

impl Default for LaminateConfig {
    fn default() -> Self {
        LaminateConfig {
            mu2: 0.1,
            lambda: 50.0,
            f_m: 20.0,
            f_e: 2.0,
            c_a: 0.5,
            l0: Vec3::new(0.0, 0.0, 1.0),
            t1: Vec3::new(1.0, 0.0, 0.0),
            t2: Vec3::new(0.0, 1.0, 0.0),
        }
    }
}

impl LaminateConfig {
    /// Default moduli with an arbitrary unit lamination normal; the tangent
    /// frame is completed to a right-handed orthonormal triad.
    pub fn with_normal(l0: Vec3) -> Result<Self> {
        let mut cfg = LaminateConfig::default();
        if (l0.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "lamination normal must be unit, |l0| = {}",
                l0.norm()
            )));
        }
        let seed = if l0[0].abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let t1 = {
            let p = seed - l0.scale(seed.dot(&l0));
            p.normalized()
        };
        let t2 = l0.cross(&t1);
        cfg.l0 = l0;
        cfg.t1 = t1;
        cfg.t2 = t2;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_a > 0.0 && self.c_a < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "volume fraction must lie in (0,1), got {}",
                self.c_a
            )));
        }
        for v in [self.mu2, self.lambda, self.f_m, self.f_e] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig("moduli and contrasts must be positive".into()));
            }
        }
        let frame = [self.t1, self.t2, self.l0];
        for i in 0..3 {
            for j in i..3 {
                let d = frame[i].dot(&frame[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (d - expect).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(
                        "t1, t2, l0 must be orthonormal".into(),
                    ));
                }
            }
        }
        if (self.t1.cross(&self.t2) - self.l0).norm() > 1e-12 {
            return Err(Error::InvalidConfig(
                "t1, t2, l0 must form a right-handed frame".into(),
            ));
        }
        Ok(())
    }

    pub fn c_b(&self) -> f64 {
        1.0 - self.c_a
    }

    fn t_map(&self, beta: &[f64; 2]) -> Vec3 {
        self.t1.scale(beta[0]) + self.t2.scale(beta[1])
    }
}

/// Laminate phase identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
}

/// Scaled phase energy with analytic first derivatives.
///
/// Phase a: I1/2 + (mu2/2) I2 + I5/(2J) + (lambda/2)(J-1)^2.
/// Phase b scales the mechanical terms by f_m and the electric term by 1/f_e.
pub fn phase_energy(
    phase: Phase,
    f: &Tensor2,
    d0_hat: &Vec3,
    cfg: &LaminateConfig,
) -> Result<(f64, Tensor2, Vec3)> {
    let j = f.det();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian { det: j });
    }
    let (mech, elec) = match phase {
        Phase::A => (1.0, 1.0),
        Phase::B => (cfg.f_m, 1.0 / cfg.f_e),
    };
    let h = f.cofactor();
    let d = f.mul_vec(d0_hat);
    let i1 = f.norm_sq();
    let i2 = h.norm_sq();
    let i5 = d.norm_sq();

    let value = mech * (0.5 * i1 + 0.5 * cfg.mu2 * i2 + 0.5 * cfg.lambda * (j - 1.0) * (j - 1.0))
        + elec * 0.5 * i5 / j;

    let d_f = (*f + cross(&h, f).scale(cfg.mu2) + h.scale(cfg.lambda * (j - 1.0))).scale(mech)
        + (d.outer(d0_hat).scale(1.0 / j) + h.scale(-0.5 * i5 / (j * j))).scale(elec);

    let d_d0 = f.tr_mul_vec(&d).scale(elec / j);

    Ok((value, d_f, d_d0))
}

/// Phase fields reconstructed from the macroscopic state and the interface
/// amplitudes: rank-one jump in F along l0, tangential jump in d0.
pub fn micro_fields(
    f: &Tensor2,
    d0_hat: &Vec3,
    alpha: &Vec3,
    beta: &[f64; 2],
    cfg: &LaminateConfig,
) -> (Tensor2, Vec3, Tensor2, Vec3) {
    let rank_one = alpha.outer(&cfg.l0);
    let tangential = cfg.t_map(beta);
    let f_a = *f + rank_one.scale(cfg.c_b());
    let f_b = *f - rank_one.scale(cfg.c_a);
    let d_a = *d0_hat + tangential.scale(cfg.c_b());
    let d_b = *d0_hat - tangential.scale(cfg.c_a);
    (f_a, d_a, f_b, d_b)
}

/// Amplitude unknowns with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeState {
    pub alpha: Vec3,
    pub beta: [f64; 2],
    pub iterations: usize,
    pub residual_norm: f64,
}

impl AmplitudeState {
    pub fn zero() -> Self {
        AmplitudeState {
            alpha: Vec3::ZERO,
            beta: [0.0, 0.0],
            iterations: 0,
            residual_norm: f64::INFINITY,
        }
    }
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
const LINE_SEARCH_HALVINGS: usize = 20;
const FD_STEP: f64 = 1e-6;

/// Jump residual ([[P]] l0 ; T^T [[e0]]) at given amplitudes, assembled from
/// the analytic phase derivatives.
fn residual(
    f: &Tensor2,
    d0_hat: &Vec3,
    unknowns: &[f64; 5],
    cfg: &LaminateConfig,
) -> Result<[f64; 5]> {
    let alpha = Vec3::new(unknowns[0], unknowns[1], unknowns[2]);
    let beta = [unknowns[3], unknowns[4]];
    let (f_a, d_a, f_b, d_b) = micro_fields(f, d0_hat, &alpha, &beta, cfg);
    let (_, p_a, e_a) = phase_energy(Phase::A, &f_a, &d_a, cfg)?;
    let (_, p_b, e_b) = phase_energy(Phase::B, &f_b, &d_b, cfg)?;
    let traction = (p_a - p_b).mul_vec(&cfg.l0);
    let field_jump = e_a - e_b;
    Ok([
        traction[0],
        traction[1],
        traction[2],
        cfg.t1.dot(&field_jump),
        cfg.t2.dot(&field_jump),
    ])
}

fn norm5(r: &[f64; 5]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// 5x5 Newton matrix by central differences of the analytic residual; this
/// realizes the K-block Hessian without hand-coded second derivatives.
fn newton_matrix(
    f: &Tensor2,
    d0_hat: &Vec3,
    unknowns: &[f64; 5],
    cfg: &LaminateConfig,
) -> Result<[[f64; 5]; 5]> {
    let mut m = [[0.0; 5]; 5];
    for k in 0..5 {
        let mut up = *unknowns;
        let mut dn = *unknowns;
        up[k] += FD_STEP;
        dn[k] -= FD_STEP;
        let rp = residual(f, d0_hat, &up, cfg)?;
        let rm = residual(f, d0_hat, &dn, cfg)?;
        for i in 0..5 {
            m[i][k] = (rp[i] - rm[i]) / (2.0 * FD_STEP);
        }
    }
    Ok(m)
}

/// Direct elimination with partial pivoting on the 5x5 system.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Result<[f64; 5]> {
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    for col in 0..5 {
        let piv = (col..5)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() <= 1e-14 * scale.max(1e-300) {
            return Err(Error::SingularSystem);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..5 {
            let fac = a[r][col] / a[col][col];
            for c in col..5 {
                a[r][c] -= fac * a[col][c];
            }
            b[r] -= fac * b[col];
        }
    }
    let mut x = [0.0; 5];
    for r in (0..5).rev() {
        let mut acc = b[r];
        for c in (r + 1)..5 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Solve the stationarity system for the amplitude vectors by Newton
/// iteration with a halving line search that also guards the phase
/// determinants. The initial state seeds the iteration (warm starting).
pub fn solve_amplitudes(
    f: &Tensor2,
    d0_hat: &Vec3,
    cfg: &LaminateConfig,
    init: &AmplitudeState,
) -> Result<AmplitudeState> {
    let mut x = [
        init.alpha[0],
        init.alpha[1],
        init.alpha[2],
        init.beta[0],
        init.beta[1],
    ];
    let mut r = residual(f, d0_hat, &x, cfg)?;
    let mut r_norm = norm5(&r);
    for iter in 0..NEWTON_MAX_ITER {
        if r_norm <= NEWTON_TOL {
            return Ok(AmplitudeState {
                alpha: Vec3::new(x[0], x[1], x[2]),
                beta: [x[3], x[4]],
                iterations: iter,
                residual_norm: r_norm,
            });
        }
        let m = newton_matrix(f, d0_hat, &x, cfg)?;
        let rhs = [-r[0], -r[1], -r[2], -r[3], -r[4]];
        let delta = solve5(m, rhs)?;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=LINE_SEARCH_HALVINGS {
            let mut cand = x;
            for k in 0..5 {
                cand[k] += step * delta[k];
            }
            // Reject the candidate when a phase determinant goes non-positive.
            match residual(f, d0_hat, &cand, cfg) {
                Ok(rc) => {
                    let rc_norm = norm5(&rc);
                    if rc_norm < r_norm {
                        x = cand;
                        r = rc;
                        r_norm = rc_norm;
                        accepted = true;
                        break;
                    }
                }
                Err(Error::NonPositiveJacobian { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                residual: r_norm,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: NEWTON_MAX_ITER,
        residual: r_norm,
    })
}

/// Effective energy, stress and electric field at the converged amplitudes:
/// volume averages of the phase quantities.
pub fn effective_response(
    f: &Tensor2,
    d0_hat: &Vec3,
    cfg: &LaminateConfig,
    warm: Option<&AmplitudeState>,
) -> Result<(f64, Tensor2, Vec3, AmplitudeState)> {
    let init = warm.copied().unwrap_or_else(AmplitudeState::zero);
    let state = solve_amplitudes(f, d0_hat, cfg, &init)?;
    let (f_a, d_a, f_b, d_b) = micro_fields(f, d0_hat, &state.alpha, &state.beta, cfg);
    let (e_a, p_a, e0_a) = phase_energy(Phase::A, &f_a, &d_a, cfg)?;
    let (e_b, p_b, e0_b) = phase_energy(Phase::B, &f_b, &d_b, cfg)?;
    let (c_a, c_b) = (cfg.c_a, cfg.c_b());
    Ok((
        c_a * e_a + c_b * e_b,
        p_a.scale(c_a) + p_b.scale(c_b),
        e0_a.scale(c_a) + e0_b.scale(c_b),
        state,
    ))
}

/// Newton matrix at a converged state, for positive-definiteness probes.
pub fn newton_matrix_at(
    f: &Tensor2,
    d0_hat: &Vec3,
    state: &AmplitudeState,
    cfg: &LaminateConfig,
) -> Result<[[f64; 5]; 5]> {
    let x = [
        state.alpha[0],
        state.alpha[1],
        state.alpha[2],
        state.beta[0],
        state.beta[1],
    ];
    newton_matrix(f, d0_hat, &x, cfg)
}

/// Which family of load paths to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadPathKind {
    /// The ten calibration sweeps.
    Calibration,
    /// Biaxial and mixed shear-tension hold-out paths.
    Test,
}

impl LoadPathKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "calib" => Some(LoadPathKind::Calibration),
            "test" => Some(LoadPathKind::Test),
            _ => None,
        }
    }
}

// Load magnitudes and axes are stand-ins for the reference load cases. The
// mechanical sweeps stay in the lamination plane: the invariant basis is
// deliberately incomplete (no polyconvex substitute for the tr(C^2 G)
// coupling exists), and mixing in-plane tension with out-of-plane shear
// produces a jointly unrepresentable response.
const UNIAXIAL_RANGE: (f64, f64) = (-0.3, 0.5);
const SHEAR_RANGE: (f64, f64) = (-0.5, 0.5);
const BIAXIAL_RANGE: (f64, f64) = (-0.2, 0.3);
const D0_MAX: f64 = 2.0;

fn uniaxial(gamma: f64) -> Tensor2 {
    let mut f = Tensor2::identity();
    f[(0, 0)] += gamma;
    f
}

fn simple_shear(gamma: f64) -> Tensor2 {
    let mut f = Tensor2::identity();
    f[(0, 1)] += gamma;
    f
}

fn sweep(a: f64, b: f64, steps: usize) -> Vec<f64> {
    crate::sampling::linspace(a, b, steps)
}

/// Macroscopic load paths: mechanical sweeps, electric sweeps at the
/// mechanical extremes, and the two mixed hold-out cases.
pub fn load_paths(kind: LoadPathKind, steps: usize) -> Result<Vec<(String, Vec<(Tensor2, Vec3)>)>> {
    if steps < 2 {
        return Err(Error::InvalidConfig("paths need at least two steps".into()));
    }
    let e1 = Vec3::new(1.0, 0.0, 0.0);
    let e3 = Vec3::new(0.0, 0.0, 1.0);
    let mut out = Vec::new();
    match kind {
        LoadPathKind::Calibration => {
            let uni: Vec<_> = sweep(UNIAXIAL_RANGE.0, UNIAXIAL_RANGE.1, steps)
                .into_iter()
                .map(|g| (uniaxial(g), Vec3::ZERO))
                .collect();
            out.push(("uniaxial".to_string(), uni));
            let shear: Vec<_> = sweep(SHEAR_RANGE.0, SHEAR_RANGE.1, steps)
                .into_iter()
                .map(|g| (simple_shear(g), Vec3::ZERO))
                .collect();
            out.push(("shear".to_string(), shear));

            let extremes = [
                ("uni-min", uniaxial(UNIAXIAL_RANGE.0)),
                ("uni-max", uniaxial(UNIAXIAL_RANGE.1)),
                ("shear-min", simple_shear(SHEAR_RANGE.0)),
                ("shear-max", simple_shear(SHEAR_RANGE.1)),
            ];
            for (tag, f) in extremes {
                for (axis_tag, axis) in [("d1", e1), ("d3", e3)] {
                    let rows: Vec<_> = sweep(0.0, D0_MAX, steps)
                        .into_iter()
                        .map(|a| (f, axis.scale(a)))
                        .collect();
                    out.push((format!("{tag}-{axis_tag}"), rows));
                }
            }
        }
        LoadPathKind::Test => {
            let gammas = sweep(BIAXIAL_RANGE.0, BIAXIAL_RANGE.1, steps);
            let amps = sweep(0.0, D0_MAX, steps);
            let biaxial: Vec<_> = gammas
                .iter()
                .zip(amps.iter())
                .map(|(&g, &a)| {
                    let mut f = Tensor2::identity();
                    f[(0, 0)] += g;
                    f[(1, 1)] += g;
                    (f, e3.scale(a))
                })
                .collect();
            out.push(("biaxial".to_string(), biaxial));

            let ss = sweep(0.0, 1.0, steps);
            let mixed: Vec<_> = ss
                .iter()
                .zip(amps.iter())
                .map(|(&s, &a)| {
                    let mut f = Tensor2::identity();
                    f[(0, 0)] += 0.3 * s;
                    f[(0, 1)] += 0.4 * s;
                    (f, e1.scale(a))
                })
                .collect();
            out.push(("shear-tension".to_string(), mixed));
        }
    }
    Ok(out)
}

/// Generate a laminate dataset by sweeping the load paths; steps within a
/// path run sequentially with warm starts, paths run in parallel.
pub fn build_laminate_dataset(
    cfg: &LaminateConfig,
    kind: LoadPathKind,
    steps: usize,
) -> Result<Dataset> {
    cfg.validate()?;
    let paths = load_paths(kind, steps)?;
    let built: Result<Vec<LoadPath>> = paths
        .par_iter()
        .map(|(id, states)| {
            let mut rows = Vec::with_capacity(states.len());
            let mut warm: Option<AmplitudeState> = None;
            for (f, d0) in states {
                let (_, p, e0, state) = effective_response(f, d0, cfg, warm.as_ref())?;
                warm = Some(state);
                rows.push(Row {
                    f: *f,
                    d0: *d0,
                    p,
                    e0,
                });
            }
            Ok(LoadPath {
                id: id.clone(),
                rows,
            })
        })
        .collect();
    let ds = Dataset { paths: built? };
    ds.validate()?;
    Ok(ds)
}
