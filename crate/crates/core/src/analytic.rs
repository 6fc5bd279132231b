//! Closed-form transversely isotropic electro-elastic potential used as the
//! ground-truth data generator and held-out oracle for the invariant-based
//! models. All outputs are emitted in scaled (dimensionless) units; raw
//! units are recovered through [`crate::constitutive::unscale_state`].

use crate::error::Result;
use crate::invariants::{eval_invariant, Frame, Invariant, Structural, TiStructuralTensor};
use crate::tensor::{Tensor2, Vec3};

/// Material parameters of the benchmark potential. Mechanical moduli carry
/// stress units, the permittivities carry C/(V m); only the ratios enter the
/// scaled energy.
#[derive(Debug, Clone)]
pub struct TiPotentialParams {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub a1: f64,
    pub a2: f64,
    pub structural: TiStructuralTensor,
}

impl Default for TiPotentialParams {
    fn default() -> Self {
        let mu1 = 1.0;
        let eps1 = 1.0;
        TiPotentialParams {
            mu1,
            mu2: mu1,
            mu3: 3.0 * mu1,
            lambda: 1e3 * mu1,
            eps1,
            eps2: 2.0 * eps1,
            a1: 2.0,
            a2: 2.0,
            structural: TiStructuralTensor::new(Vec3::new(0.0, 0.0, 1.0)).unwrap(),
        }
    }
}

struct Terms {
    value: f64,
    d_f: Tensor2,
    d_d0: Vec3,
}

fn assemble(f: &Tensor2, d0_hat: &Vec3, p: &TiPotentialParams) -> Result<Terms> {
    let frame = Frame::new(*f, *d0_hat)?;
    let st = Structural {
        ti: Some(&p.structural),
        cub: None,
    };
    let j = frame.j;
    let h = frame.h;

    let (ib1, ib1_df, _) = eval_invariant(Invariant::Ib1, &frame, &st)?;
    let (ib2s, ib2s_df, _) = eval_invariant(Invariant::Ib2s, &frame, &st)?;
    let (i5, i5_df, i5_dd0) = eval_invariant(Invariant::I5h, &frame, &st)?;
    let (j1, j1_df, _) = eval_invariant(Invariant::Jti1, &frame, &st)?;
    let (j2, j2_df, _) = eval_invariant(Invariant::Jti2, &frame, &st)?;
    let (j3, _, j3_dd0) = eval_invariant(Invariant::Jti3h, &frame, &st)?;

    let c_iso2 = p.mu2 / (2.0 * p.mu1);
    let c_log = p.mu3 / p.mu1;
    let c_ti = p.mu3 / (2.0 * p.mu1);
    let c_el = p.eps1 / (2.0 * p.eps2);
    let c_vol = p.lambda / (2.0 * p.mu1);

    let value = 0.5 * ib1 + c_iso2 * ib2s - c_log * j.ln() + 0.5 * i5 / j
        + c_ti * (j1.powf(p.a1) / p.a1 + j2.powf(p.a2) / p.a2)
        + c_el * j3
        + c_vol * (j - 1.0) * (j - 1.0);

    let d_f = ib1_df.scale(0.5)
        + ib2s_df.scale(c_iso2)
        + h.scale(-c_log / j)
        + i5_df.scale(0.5 / j)
        + h.scale(-0.5 * i5 / (j * j))
        + j1_df.scale(c_ti * j1.powf(p.a1 - 1.0))
        + j2_df.scale(c_ti * j2.powf(p.a2 - 1.0))
        + h.scale(2.0 * c_vol * (j - 1.0));

    let d_d0 = i5_dd0.scale(0.5 / j) + j3_dd0.scale(c_el);

    Ok(Terms { value, d_f, d_d0 })
}

/// Scaled internal energy of the benchmark potential.
pub fn ti_energy(f: &Tensor2, d0_hat: &Vec3, params: &TiPotentialParams) -> Result<f64> {
    Ok(assemble(f, d0_hat, params)?.value)
}

/// Scaled stress and electric field, assembled from the analytic invariant
/// derivative bundles.
pub fn ti_response(
    f: &Tensor2,
    d0_hat: &Vec3,
    params: &TiPotentialParams,
) -> Result<(Tensor2, Vec3)> {
    let t = assemble(f, d0_hat, params)?;
    Ok((t.d_f, t.d_d0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::tests::{rand_def_grad, rand_rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rand_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn energy_at_identity_with_defaults() {
        let p = TiPotentialParams::default();
        let e = ti_energy(&Tensor2::identity(), &Vec3::ZERO, &p).unwrap();
        assert!((e - 4.5).abs() < 1e-14);
    }

    #[test]
    fn response_vanishes_at_origin() {
        let p = TiPotentialParams::default();
        let (stress, field) = ti_response(&Tensor2::identity(), &Vec3::ZERO, &p).unwrap();
        assert!(stress.norm() < 1e-12);
        assert!(field.norm() < 1e-14);
    }

    #[test]
    fn energy_is_objective_and_ti_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(50);
        let p = TiPotentialParams::default();
        let f = rand_def_grad(&mut rng);
        let d0 = rand_vec(&mut rng, 1.5);
        let e = ti_energy(&f, &d0, &p).unwrap();
        for _ in 0..100 {
            let q = rand_rotation(&mut rng);
            let eq = ti_energy(&q.matmul(&f), &d0, &p).unwrap();
            assert!((e - eq).abs() <= 1e-12 * e.abs().max(1.0));
        }
        // Rotations about the preferred axis in the passive form.
        for _ in 0..50 {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let (s, c) = angle.sin_cos();
            let q = Tensor2::from_rows([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
            let eq = ti_energy(&f.matmul(&q), &q.tr_mul_vec(&d0), &p).unwrap();
            assert!((e - eq).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn energy_is_even_in_d0() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let p = TiPotentialParams::default();
        for _ in 0..100 {
            let f = rand_def_grad(&mut rng);
            let d0 = rand_vec(&mut rng, 2.0);
            let a = ti_energy(&f, &d0, &p).unwrap();
            let b = ti_energy(&f, &-d0, &p).unwrap();
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn response_matches_energy_fd() {
        let mut rng = ChaCha12Rng::seed_from_u64(52);
        let p = TiPotentialParams::default();
        for _ in 0..100 {
            let f = rand_def_grad(&mut rng);
            let d0 = rand_vec(&mut rng, 1.5);
            let (stress, field) = ti_response(&f, &d0, &p).unwrap();
            let step = 1e-6 * f.norm().max(1.0);
            for idx in 0..9 {
                let mut fp = f;
                let mut fm = f;
                fp.0[idx] += step;
                fm.0[idx] -= step;
                let fd = (ti_energy(&fp, &d0, &p).unwrap()
                    - ti_energy(&fm, &d0, &p).unwrap())
                    / (2.0 * step);
                assert!(
                    (stress.0[idx] - fd).abs() / stress.0[idx].abs().max(1.0) < 1e-7,
                    "dF[{idx}]: {} vs {}",
                    stress.0[idx],
                    fd
                );
            }
            for idx in 0..3 {
                let mut dp = d0;
                let mut dm = d0;
                dp[idx] += step;
                dm[idx] -= step;
                let fd = (ti_energy(&f, &dp, &p).unwrap()
                    - ti_energy(&f, &dm, &p).unwrap())
                    / (2.0 * step);
                assert!((field[idx] - fd).abs() / field[idx].abs().max(1.0) < 1e-7);
            }
        }
    }

    /// Pure dilatation with the preferred axis on e3 keeps the stress
    /// diagonal.
    #[test]
    fn pure_dilatation_stress_is_diagonal() {
        let p = TiPotentialParams::default();
        for c in [0.9, 1.0, 1.1, 1.3] {
            let f = Tensor2::diag(c, c, c);
            let (stress, _) = ti_response(&f, &Vec3::ZERO, &p).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(stress[(i, j)].abs() < 1e-12);
                    }
                }
            }
        }
    }
}
