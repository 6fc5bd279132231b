//! Electro-mechanical invariants with analytic first derivatives.
//!
//! Covers the isotropic set (I1, I2, J, I4, I5), the isochoric pair
//! (Ib1, Ib2 and the adapted Ib2s), the transversely isotropic family built
//! from a rank-one structural tensor, the cubic family built from a
//! fourth-order structural tensor, and the non-polyconvex I6 kept only as a
//! negative test surface.
//!
//! Electric invariants are formulated in whatever electric displacement
//! vector is supplied; the constitutive layer always feeds the scaled field,
//! which is why the names carry an `h` suffix.

use crate::error::{Error, Result};
use crate::tensor::{cross, Tensor2, Vec3};
use serde::{Deserialize, Serialize};

/// Stable identifiers for every invariant usable in model configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Invariant {
    /// ||F||^2
    I1,
    /// ||H||^2
    I2,
    /// det F
    J,
    /// -det F (second channel making the first layer sign-free in J)
    NegJ,
    /// ||d0||^2
    I4h,
    /// ||F d0||^2
    I5h,
    /// Isochoric J^{-2/3} ||F||^2
    Ib1,
    /// Polyconvex isochoric J^{-2} ||H||^3 = (Ib2s)^{3/2}
    Ib2,
    /// Non-polyconvex isochoric J^{-4/3} ||H||^2 (analytic benchmark only)
    Ib2s,
    /// ||F G||^2 with G = n (x) n
    Jti1,
    /// ||H G||^2
    Jti2,
    /// tr((d0 (x) d0) G)
    Jti3h,
    /// Jti1 + c_mix I1
    Jti1s,
    /// Jti2 + c_mix I2
    Jti2s,
    /// C : G^cub : C
    Jcub1,
    /// H^T H : G^cub : H^T H
    Jcub2,
    /// d0 (x) d0 : G^cub : I
    Jcub3h,
}

impl Invariant {
    pub fn name(&self) -> &'static str {
        match self {
            Invariant::I1 => "I1",
            Invariant::I2 => "I2",
            Invariant::J => "J",
            Invariant::NegJ => "negJ",
            Invariant::I4h => "I4h",
            Invariant::I5h => "I5h",
            Invariant::Ib1 => "Ib1",
            Invariant::Ib2 => "Ib2",
            Invariant::Ib2s => "Ib2s",
            Invariant::Jti1 => "Jti1",
            Invariant::Jti2 => "Jti2",
            Invariant::Jti3h => "Jti3h",
            Invariant::Jti1s => "Jti1s",
            Invariant::Jti2s => "Jti2s",
            Invariant::Jcub1 => "Jcub1",
            Invariant::Jcub2 => "Jcub2",
            Invariant::Jcub3h => "Jcub3h",
        }
    }

    pub fn parse(name: &str) -> Option<Invariant> {
        Some(match name {
            "I1" => Invariant::I1,
            "I2" => Invariant::I2,
            "J" => Invariant::J,
            "negJ" => Invariant::NegJ,
            "I4h" => Invariant::I4h,
            "I5h" => Invariant::I5h,
            "Ib1" => Invariant::Ib1,
            "Ib2" => Invariant::Ib2,
            "Ib2s" => Invariant::Ib2s,
            "Jti1" => Invariant::Jti1,
            "Jti2" => Invariant::Jti2,
            "Jti3h" => Invariant::Jti3h,
            "Jti1s" => Invariant::Jti1s,
            "Jti2s" => Invariant::Jti2s,
            "Jcub1" => Invariant::Jcub1,
            "Jcub2" => Invariant::Jcub2,
            "Jcub3h" => Invariant::Jcub3h,
            _ => return None,
        })
    }

    fn needs_ti(&self) -> bool {
        matches!(
            self,
            Invariant::Jti1
                | Invariant::Jti2
                | Invariant::Jti3h
                | Invariant::Jti1s
                | Invariant::Jti2s
        )
    }

    fn needs_cub(&self) -> bool {
        matches!(self, Invariant::Jcub1 | Invariant::Jcub2 | Invariant::Jcub3h)
    }
}

/// Transversely isotropic structural data: preferred direction, its dyad and
/// the mixing coefficient of the adapted invariants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TiStructuralTensor {
    n: Vec3,
    g: Tensor2,
    c_mix: f64,
}

impl TiStructuralTensor {
    pub const DEFAULT_C_MIX: f64 = 0.35;

    pub fn new(n: Vec3) -> Result<Self> {
        Self::with_mixing(n, Self::DEFAULT_C_MIX)
    }

    pub fn with_mixing(n: Vec3, c_mix: f64) -> Result<Self> {
        if (n.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "preferred direction must be a unit vector, |n| = {}",
                n.norm()
            )));
        }
        Ok(TiStructuralTensor {
            n,
            g: n.outer(&n),
            c_mix,
        })
    }

    pub fn direction(&self) -> Vec3 {
        self.n
    }

    pub fn dyad(&self) -> Tensor2 {
        self.g
    }

    pub fn c_mix(&self) -> f64 {
        self.c_mix
    }
}

/// Cubic structural data: three pairwise orthonormal axes defining the
/// fourth-order structural tensor sum a_i (x) a_i (x) a_i (x) a_i.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubStructuralTensor {
    axes: [Vec3; 3],
}

impl CubStructuralTensor {
    pub fn new(axes: [Vec3; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in i..3 {
                let d = axes[i].dot(&axes[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (d - expect).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "cubic axes must be orthonormal: a{}.a{} = {}",
                        i, j, d
                    )));
                }
            }
        }
        Ok(CubStructuralTensor { axes })
    }

    pub fn standard() -> Self {
        CubStructuralTensor {
            axes: [
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
        }
    }

    pub fn axes(&self) -> &[Vec3; 3] {
        &self.axes
    }
}

/// Structural tensors available during invariant evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Structural<'a> {
    pub ti: Option<&'a TiStructuralTensor>,
    pub cub: Option<&'a CubStructuralTensor>,
}

/// Kinematic state with all derived blocks precomputed once.
#[derive(Debug, Clone)]
pub struct Frame {
    pub f: Tensor2,
    pub h: Tensor2,
    pub j: f64,
    pub d0: Vec3,
    pub d: Vec3,
}

impl Frame {
    pub fn new(f: Tensor2, d0: Vec3) -> Result<Self> {
        let j = f.det();
        if !(j > 0.0) {
            return Err(Error::NonPositiveJacobian { det: j });
        }
        Ok(Frame {
            f,
            h: f.cofactor(),
            j,
            d0,
            d: f.mul_vec(&d0),
        })
    }
}

/// The five polyconvexity blocks treated as independent arguments.
#[derive(Debug, Clone, Copy)]
pub struct VState {
    pub f: Tensor2,
    pub h: Tensor2,
    pub j: f64,
    pub d0: Vec3,
    pub d: Vec3,
}

impl VState {
    /// Consistent extended state derived from a single (F, d0).
    pub fn from_frame(frame: &Frame) -> VState {
        VState {
            f: frame.f,
            h: frame.h,
            j: frame.j,
            d0: frame.d0,
            d: frame.d,
        }
    }
}

/// Invariant values with analytic first derivatives with respect to F and d0.
#[derive(Debug, Clone)]
pub struct InvariantBundle {
    pub names: Vec<Invariant>,
    pub values: Vec<f64>,
    pub d_f: Vec<Tensor2>,
    pub d_d0: Vec<Vec3>,
}

impl InvariantBundle {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn value(&self, inv: Invariant) -> Option<f64> {
        self.names
            .iter()
            .position(|n| *n == inv)
            .map(|i| self.values[i])
    }
}

fn require_ti<'a>(st: &Structural<'a>, inv: Invariant) -> Result<&'a TiStructuralTensor> {
    st.ti.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "invariant {} needs a transversely isotropic structural tensor",
            inv.name()
        ))
    })
}

fn require_cub<'a>(st: &Structural<'a>, inv: Invariant) -> Result<&'a CubStructuralTensor> {
    st.cub.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "invariant {} needs a cubic structural tensor",
            inv.name()
        ))
    })
}

/// Value and analytic (dF, dd0) of one invariant on a consistent frame.
pub fn eval_invariant(
    inv: Invariant,
    frame: &Frame,
    st: &Structural,
) -> Result<(f64, Tensor2, Vec3)> {
    let Frame { f, h, j, d0, d } = frame;
    let j = *j;
    Ok(match inv {
        Invariant::I1 => (f.norm_sq(), f.scale(2.0), Vec3::ZERO),
        Invariant::I2 => (h.norm_sq(), cross(h, f).scale(2.0), Vec3::ZERO),
        Invariant::J => (j, *h, Vec3::ZERO),
        Invariant::NegJ => (-j, h.scale(-1.0), Vec3::ZERO),
        Invariant::I4h => (d0.norm_sq(), Tensor2::ZERO, d0.scale(2.0)),
        Invariant::I5h => (
            d.norm_sq(),
            d.outer(d0).scale(2.0),
            f.tr_mul_vec(d).scale(2.0),
        ),
        Invariant::Ib1 => {
            let i1 = f.norm_sq();
            let s = j.powf(-2.0 / 3.0);
            (
                s * i1,
                f.scale(2.0 * s) + h.scale(-(2.0 / 3.0) * i1 * j.powf(-5.0 / 3.0)),
                Vec3::ZERO,
            )
        }
        Invariant::Ib2s => {
            let i2 = h.norm_sq();
            let s = j.powf(-4.0 / 3.0);
            (
                s * i2,
                cross(h, f).scale(2.0 * s) + h.scale(-(4.0 / 3.0) * i2 * j.powf(-7.0 / 3.0)),
                Vec3::ZERO,
            )
        }
        Invariant::Ib2 => {
            let (v, df, _) = eval_invariant(Invariant::Ib2s, frame, st)?;
            // Ib2 = (Ib2s)^{3/2}; Ib2s > 0 whenever det F > 0.
            (v.powf(1.5), df.scale(1.5 * v.sqrt()), Vec3::ZERO)
        }
        Invariant::Jti1 => {
            let ti = require_ti(st, inv)?;
            let fn_ = f.mul_vec(&ti.direction());
            (fn_.norm_sq(), fn_.outer(&ti.direction()).scale(2.0), Vec3::ZERO)
        }
        Invariant::Jti2 => {
            let ti = require_ti(st, inv)?;
            let hn = h.mul_vec(&ti.direction());
            let dh = hn.outer(&ti.direction()).scale(2.0);
            (hn.norm_sq(), cross(&dh, f), Vec3::ZERO)
        }
        Invariant::Jti3h => {
            let ti = require_ti(st, inv)?;
            let p = d0.dot(&ti.direction());
            (p * p, Tensor2::ZERO, ti.direction().scale(2.0 * p))
        }
        Invariant::Jti1s => {
            let ti = require_ti(st, inv)?;
            let (v1, df1, _) = eval_invariant(Invariant::Jti1, frame, st)?;
            let c = ti.c_mix();
            (v1 + c * f.norm_sq(), df1 + f.scale(2.0 * c), Vec3::ZERO)
        }
        Invariant::Jti2s => {
            let ti = require_ti(st, inv)?;
            let (v2, df2, _) = eval_invariant(Invariant::Jti2, frame, st)?;
            let c = ti.c_mix();
            (
                v2 + c * h.norm_sq(),
                df2 + cross(h, f).scale(2.0 * c),
                Vec3::ZERO,
            )
        }
        Invariant::Jcub1 => {
            let cub = require_cub(st, inv)?;
            let mut value = 0.0;
            let mut df = Tensor2::ZERO;
            for a in cub.axes() {
                let fa = f.mul_vec(a);
                let c = fa.norm_sq();
                value += c * c;
                df += fa.outer(a).scale(4.0 * c);
            }
            (value, df, Vec3::ZERO)
        }
        Invariant::Jcub2 => {
            let cub = require_cub(st, inv)?;
            let mut value = 0.0;
            let mut dh = Tensor2::ZERO;
            for a in cub.axes() {
                let ha = h.mul_vec(a);
                let c = ha.norm_sq();
                value += c * c;
                dh += ha.outer(a).scale(4.0 * c);
            }
            (value, cross(&dh, f), Vec3::ZERO)
        }
        Invariant::Jcub3h => {
            let cub = require_cub(st, inv)?;
            let mut value = 0.0;
            let mut dd = Vec3::ZERO;
            for a in cub.axes() {
                let p = d0.dot(a);
                value += p * p;
                dd = dd + a.scale(2.0 * p);
            }
            (value, Tensor2::ZERO, dd)
        }
    })
}

/// Invariant value on independent polyconvexity blocks (no derivatives).
pub fn eval_invariant_on_v(inv: Invariant, v: &VState, st: &Structural) -> Result<f64> {
    Ok(match inv {
        Invariant::I1 => v.f.norm_sq(),
        Invariant::I2 => v.h.norm_sq(),
        Invariant::J => v.j,
        Invariant::NegJ => -v.j,
        Invariant::I4h => v.d0.norm_sq(),
        Invariant::I5h => v.d.norm_sq(),
        Invariant::Ib1 => v.j.powf(-2.0 / 3.0) * v.f.norm_sq(),
        Invariant::Ib2s => v.j.powf(-4.0 / 3.0) * v.h.norm_sq(),
        Invariant::Ib2 => (v.j.powf(-4.0 / 3.0) * v.h.norm_sq()).powf(1.5),
        Invariant::Jti1 => {
            let ti = require_ti(st, inv)?;
            v.f.mul_vec(&ti.direction()).norm_sq()
        }
        Invariant::Jti2 => {
            let ti = require_ti(st, inv)?;
            v.h.mul_vec(&ti.direction()).norm_sq()
        }
        Invariant::Jti3h => {
            let ti = require_ti(st, inv)?;
            let p = v.d0.dot(&ti.direction());
            p * p
        }
        Invariant::Jti1s => {
            let ti = require_ti(st, inv)?;
            v.f.mul_vec(&ti.direction()).norm_sq() + ti.c_mix() * v.f.norm_sq()
        }
        Invariant::Jti2s => {
            let ti = require_ti(st, inv)?;
            v.h.mul_vec(&ti.direction()).norm_sq() + ti.c_mix() * v.h.norm_sq()
        }
        Invariant::Jcub1 => {
            let cub = require_cub(st, inv)?;
            cub.axes()
                .iter()
                .map(|a| {
                    let c = v.f.mul_vec(a).norm_sq();
                    c * c
                })
                .sum()
        }
        Invariant::Jcub2 => {
            let cub = require_cub(st, inv)?;
            cub.axes()
                .iter()
                .map(|a| {
                    let c = v.h.mul_vec(a).norm_sq();
                    c * c
                })
                .sum()
        }
        Invariant::Jcub3h => {
            let cub = require_cub(st, inv)?;
            cub.axes()
                .iter()
                .map(|a| {
                    let p = v.d0.dot(a);
                    p * p
                })
                .sum()
        }
    })
}

/// Bundle of an arbitrary list of invariants on one kinematic state.
pub fn bundle(invs: &[Invariant], frame: &Frame, st: &Structural) -> Result<InvariantBundle> {
    let mut out = InvariantBundle {
        names: Vec::with_capacity(invs.len()),
        values: Vec::with_capacity(invs.len()),
        d_f: Vec::with_capacity(invs.len()),
        d_d0: Vec::with_capacity(invs.len()),
    };
    for &inv in invs {
        let (v, df, dd0) = eval_invariant(inv, frame, st)?;
        out.names.push(inv);
        out.values.push(v);
        out.d_f.push(df);
        out.d_d0.push(dd0);
    }
    Ok(out)
}

/// Isotropic set {I1, I2, J, I4, I5}.
pub fn iso_invariants(f: &Tensor2, d0: &Vec3) -> Result<InvariantBundle> {
    let frame = Frame::new(*f, *d0)?;
    bundle(
        &[
            Invariant::I1,
            Invariant::I2,
            Invariant::J,
            Invariant::I4h,
            Invariant::I5h,
        ],
        &frame,
        &Structural::default(),
    )
}

/// Isochoric set {Ib1, Ib2, Ib2s}.
pub fn isochoric_invariants(f: &Tensor2) -> Result<InvariantBundle> {
    let frame = Frame::new(*f, Vec3::ZERO)?;
    bundle(
        &[Invariant::Ib1, Invariant::Ib2, Invariant::Ib2s],
        &frame,
        &Structural::default(),
    )
}

/// Transversely isotropic set {Jti1, Jti2, Jti3, Jti1s, Jti2s}.
pub fn ti_invariants(
    f: &Tensor2,
    d0: &Vec3,
    st: &TiStructuralTensor,
) -> Result<InvariantBundle> {
    let frame = Frame::new(*f, *d0)?;
    bundle(
        &[
            Invariant::Jti1,
            Invariant::Jti2,
            Invariant::Jti3h,
            Invariant::Jti1s,
            Invariant::Jti2s,
        ],
        &frame,
        &Structural {
            ti: Some(st),
            cub: None,
        },
    )
}

/// Cubic set {Jcub1, Jcub2, Jcub3}.
pub fn cub_invariants(
    f: &Tensor2,
    d0: &Vec3,
    st: &CubStructuralTensor,
) -> Result<InvariantBundle> {
    let frame = Frame::new(*f, *d0)?;
    bundle(
        &[Invariant::Jcub1, Invariant::Jcub2, Invariant::Jcub3h],
        &frame,
        &Structural {
            ti: None,
            cub: Some(st),
        },
    )
}

/// I6 = ||H d0||^2 with H and d0 treated as independent arguments.
///
/// Not polyconvex; kept only so the negative-curvature witness of the
/// counterexample direction (dH, dd0) = (H, -d0) can be tested.
pub fn i6(h: &Tensor2, d0: &Vec3) -> (f64, Tensor2, Vec3) {
    let hd = h.mul_vec(d0);
    (
        hd.norm_sq(),
        hd.outer(d0).scale(2.0),
        h.tr_mul_vec(&hd).scale(2.0),
    )
}

/// Whether every invariant in the list has its structural data present.
pub fn check_structural(invs: &[Invariant], st: &Structural) -> Result<()> {
    for inv in invs {
        if inv.needs_ti() && st.ti.is_none() {
            return Err(Error::InvalidConfig(format!(
                "invariant {} needs a transversely isotropic structural tensor",
                inv.name()
            )));
        }
        if inv.needs_cub() && st.cub.is_none() {
            return Err(Error::InvalidConfig(format!(
                "invariant {} needs a cubic structural tensor",
                inv.name()
            )));
        }
    }
    Ok(())
}
