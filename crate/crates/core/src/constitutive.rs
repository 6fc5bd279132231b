//! Physics-augmented constitutive model: an input-convex network over a
//! named invariant set plus an analytical volumetric term. Stress and
//! electric field follow from the chain rule through the invariant
//! derivatives, so thermodynamic consistency holds by construction.

use crate::error::{Error, Result};
use crate::invariants::{
    bundle, check_structural, eval_invariant_on_v, CubStructuralTensor, Frame, Invariant,
    InvariantBundle, Structural, TiStructuralTensor, VState,
};
use crate::network::Mlp;
use crate::tensor::{Tensor2, Vec3};
use serde::{Deserialize, Serialize};

/// Volumetric energy family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolTerm {
    /// alpha (J + 1/J - 2)^2, enforcing the growth condition as J -> 0+.
    Compressible,
    /// alpha (J - 1)^2 for nearly incompressible response.
    NearlyIncompressible,
}

impl VolTerm {
    pub fn name(&self) -> &'static str {
        match self {
            VolTerm::Compressible => "compressible",
            VolTerm::NearlyIncompressible => "nearly-incompressible",
        }
    }

    pub fn parse(s: &str) -> Option<VolTerm> {
        match s {
            "compressible" => Some(VolTerm::Compressible),
            "nearly-incompressible" => Some(VolTerm::NearlyIncompressible),
            _ => None,
        }
    }
}

/// Volumetric energy value with first and second J-derivatives.
pub fn pvol(j: f64, term: VolTerm, alpha: f64) -> Result<(f64, f64, f64)> {
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian { det: j });
    }
    Ok(match term {
        VolTerm::Compressible => {
            let g = j + 1.0 / j - 2.0;
            let g1 = 1.0 - 1.0 / (j * j);
            let g2 = 2.0 / (j * j * j);
            (
                alpha * g * g,
                2.0 * alpha * g * g1,
                2.0 * alpha * (g1 * g1 + g * g2),
            )
        }
        VolTerm::NearlyIncompressible => {
            let g = j - 1.0;
            (alpha * g * g, 2.0 * alpha * g, 2.0 * alpha)
        }
    })
}

/// Named invariant sets used by the calibrated models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selector {
    /// Compressible isotropic: I1, I2, J, -J, I4, I5.
    Iso,
    /// Nearly incompressible isotropic: Ib1, Ib2, J, -J, I4, I5.
    IsoNi,
    /// Transversely isotropic (laminate data): I1, I2, J, -J, I4, I5, Jti1, Jti2, Jti3.
    Ti,
    /// Adapted transversely isotropic: Ib1, Ib2, J, -J, I5, Jti1s, Jti2s.
    TiStar,
    /// Cubic: I1, I2, J, -J, I4, I5, Jcub1, Jcub2, Jcub3.
    Cub,
}

impl Selector {
    pub fn invariants(&self) -> &'static [Invariant] {
        match self {
            Selector::Iso => &[
                Invariant::I1,
                Invariant::I2,
                Invariant::J,
                Invariant::NegJ,
                Invariant::I4h,
                Invariant::I5h,
            ],
            Selector::IsoNi => &[
                Invariant::Ib1,
                Invariant::Ib2,
                Invariant::J,
                Invariant::NegJ,
                Invariant::I4h,
                Invariant::I5h,
            ],
            Selector::Ti => &[
                Invariant::I1,
                Invariant::I2,
                Invariant::J,
                Invariant::NegJ,
                Invariant::I4h,
                Invariant::I5h,
                Invariant::Jti1,
                Invariant::Jti2,
                Invariant::Jti3h,
            ],
            Selector::TiStar => &[
                Invariant::Ib1,
                Invariant::Ib2,
                Invariant::J,
                Invariant::NegJ,
                Invariant::I5h,
                Invariant::Jti1s,
                Invariant::Jti2s,
            ],
            Selector::Cub => &[
                Invariant::I1,
                Invariant::I2,
                Invariant::J,
                Invariant::NegJ,
                Invariant::I4h,
                Invariant::I5h,
                Invariant::Jcub1,
                Invariant::Jcub2,
                Invariant::Jcub3h,
            ],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Selector::Iso => "iso",
            Selector::IsoNi => "iso-ni",
            Selector::Ti => "ti",
            Selector::TiStar => "ti-star",
            Selector::Cub => "cub",
        }
    }

    pub fn parse(s: &str) -> Option<Selector> {
        match s {
            "iso" => Some(Selector::Iso),
            "iso-ni" => Some(Selector::IsoNi),
            "ti" => Some(Selector::Ti),
            "ti-star" => Some(Selector::TiStar),
            "cub" => Some(Selector::Cub),
            _ => None,
        }
    }

    pub fn all() -> [Selector; 5] {
        [
            Selector::Iso,
            Selector::IsoNi,
            Selector::Ti,
            Selector::TiStar,
            Selector::Cub,
        ]
    }

    /// Selectors whose mechanical invariants are built from the full F
    /// (as opposed to its isochoric part).
    pub fn is_full_f(&self) -> bool {
        matches!(self, Selector::Iso | Selector::Ti | Selector::Cub)
    }
}

/// Scaling constants relating raw and dimensionless (hatted) fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mu1: f64,
    pub eps1: f64,
}

impl Scaling {
    pub fn unit() -> Scaling {
        Scaling { mu1: 1.0, eps1: 1.0 }
    }

    pub fn new(mu1: f64, eps1: f64) -> Result<Scaling> {
        if !(mu1 > 0.0) || !(eps1 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scaling constants must be positive: mu1 = {mu1}, eps1 = {eps1}"
            )));
        }
        Ok(Scaling { mu1, eps1 })
    }
}

/// A state carrying raw or scaled fields; `scale_state`/`unscale_state`
/// move between the two representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    pub f: Tensor2,
    pub d0: Vec3,
    pub p: Tensor2,
    pub e0: Vec3,
}

/// Raw fields -> dimensionless fields: d0 / sqrt(mu1 eps1), P / mu1,
/// sqrt(mu1/eps1) e0. F is dimensionless already.
pub fn scale_state(state: &FieldState, scaling: &Scaling) -> FieldState {
    let Scaling { mu1, eps1 } = *scaling;
    FieldState {
        f: state.f,
        d0: state.d0.scale(1.0 / (mu1 * eps1).sqrt()),
        p: state.p.scale(1.0 / mu1),
        e0: state.e0.scale((mu1 / eps1).sqrt()),
    }
}

/// Inverse of [`scale_state`].
pub fn unscale_state(state: &FieldState, scaling: &Scaling) -> FieldState {
    let Scaling { mu1, eps1 } = *scaling;
    FieldState {
        f: state.f,
        d0: state.d0.scale((mu1 * eps1).sqrt()),
        p: state.p.scale(mu1),
        e0: state.e0.scale((eps1 / mu1).sqrt()),
    }
}

/// Invariant-based energy model: selector + structural tensors + ICNN +
/// volumetric term. Works on (F, scaled d0) and returns scaled outputs.
#[derive(Debug, Clone)]
pub struct ConstitutiveModel {
    pub selector: Selector,
    pub ti: Option<TiStructuralTensor>,
    pub cub: Option<CubStructuralTensor>,
    pub net: Mlp,
    pub vol: VolTerm,
    pub alpha: f64,
    pub scaling: Scaling,
}

impl ConstitutiveModel {
    pub fn new(
        selector: Selector,
        ti: Option<TiStructuralTensor>,
        cub: Option<CubStructuralTensor>,
        net: Mlp,
        vol: VolTerm,
        alpha: f64,
        scaling: Scaling,
    ) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "volumetric penalty must be positive, got {alpha}"
            )));
        }
        let invs = selector.invariants();
        if net.input_dim() != invs.len() {
            return Err(Error::ShapeMismatch {
                expected: invs.len(),
                got: net.input_dim(),
            });
        }
        if net.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                expected: 1,
                got: net.output_dim(),
            });
        }
        let model = ConstitutiveModel {
            selector,
            ti,
            cub,
            net,
            vol,
            alpha,
            scaling,
        };
        check_structural(invs, &model.structural())?;
        Ok(model)
    }

    pub fn structural(&self) -> Structural<'_> {
        Structural {
            ti: self.ti.as_ref(),
            cub: self.cub.as_ref(),
        }
    }

    /// Invariant bundle (values and derivatives) for one state.
    pub fn invariant_bundle(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<InvariantBundle> {
        let frame = Frame::new(*f, *d0_hat)?;
        bundle(self.selector.invariants(), &frame, &self.structural())
    }

    /// Scaled internal energy e_hat = ICNN(invariants) + P_vol(J).
    pub fn energy(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<f64> {
        let b = self.invariant_bundle(f, d0_hat)?;
        let core = self.net.forward(&b.values)?[0];
        let (v, _, _) = pvol(f.det(), self.vol, self.alpha)?;
        Ok(core + v)
    }

    /// Scaled stress and electric field via the chain rule:
    /// P_hat = sum_k g_k dI_k/dF + P_vol'(J) H, e0_hat = sum_k g_k dI_k/dd0.
    pub fn stress_and_field(&self, f: &Tensor2, d0_hat: &Vec3) -> Result<(Tensor2, Vec3)> {
        let b = self.invariant_bundle(f, d0_hat)?;
        let (_, g) = self.net.grad_input(&b.values)?;
        let (_, dv, _) = pvol(f.det(), self.vol, self.alpha)?;
        let mut p = f.cofactor().scale(dv);
        let mut e0 = Vec3::ZERO;
        for k in 0..b.len() {
            p += b.d_f[k].scale(g[k]);
            e0 = e0 + b.d_d0[k].scale(g[k]);
        }
        Ok((p, e0))
    }

    /// Energy over the extended argument set with F, H, J, d0, d treated as
    /// independent blocks; the surface on which polyconvexity is probed.
    pub fn energy_on_v(&self, v: &VState) -> Result<f64> {
        if !(v.j > 0.0) {
            return Err(Error::NonPositiveJacobian { det: v.j });
        }
        let st = self.structural();
        let invs = self.selector.invariants();
        let mut x = Vec::with_capacity(invs.len());
        for &inv in invs {
            x.push(eval_invariant_on_v(inv, v, &st)?);
        }
        let core = self.net.forward(&x)?[0];
        let (vol, _, _) = pvol(v.j, self.vol, self.alpha)?;
        Ok(core + vol)
    }
}
