//! Exact 3x3 tensor algebra: determinant, cofactor, the tensor cross
//! product, symmetric eigendecomposition and the polar / isochoric-volumetric
//! decompositions used by the sampling and invariant layers.
//!
//! Index convention is row-major with the first index spatial and the second
//! material, i.e. `F[(i, j)]` is the component F_iJ.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

/// Second-order tensor on R^3, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor2(pub [f64; 9]);

/// Vector in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Vector cross product (used to complete orthonormal frames).
    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[1] * other.0[2] - self.0[2] * other.0[1],
            self.0[2] * other.0[0] - self.0[0] * other.0[2],
            self.0[0] * other.0[1] - self.0[1] * other.0[0],
        ])
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    /// Dyadic product a (x) b.
    pub fn outer(&self, other: &Vec3) -> Tensor2 {
        let mut t = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                t[3 * i + j] = self.0[i] * other.0[j];
            }
        }
        Tensor2(t)
    }

    pub fn normalized(&self) -> Vec3 {
        self.scale(1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self.scale(-1.0)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([0.0; 9]);

    pub fn identity() -> Tensor2 {
        Tensor2([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Tensor2 {
        let mut t = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                t[3 * i + j] = rows[i][j];
            }
        }
        Tensor2(t)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Tensor2 {
        Tensor2([a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c])
    }

    pub fn transpose(&self) -> Tensor2 {
        let m = &self.0;
        Tensor2([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[4] + self.0[8]
    }

    /// Frobenius inner product A : B.
    pub fn ddot(&self, other: &Tensor2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        let mut t = self.0;
        for c in t.iter_mut() {
            *c *= s;
        }
        Tensor2(t)
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let m = &self.0;
        Vec3([
            m[0] * v.0[0] + m[1] * v.0[1] + m[2] * v.0[2],
            m[3] * v.0[0] + m[4] * v.0[1] + m[5] * v.0[2],
            m[6] * v.0[0] + m[7] * v.0[1] + m[8] * v.0[2],
        ])
    }

    /// A^T v without forming the transpose.
    pub fn tr_mul_vec(&self, v: &Vec3) -> Vec3 {
        let m = &self.0;
        Vec3([
            m[0] * v.0[0] + m[3] * v.0[1] + m[6] * v.0[2],
            m[1] * v.0[0] + m[4] * v.0[1] + m[7] * v.0[2],
            m[2] * v.0[0] + m[5] * v.0[1] + m[8] * v.0[2],
        ])
    }

    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        let a = &self.0;
        let b = &other.0;
        let mut t = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                t[3 * i + j] =
                    a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
            }
        }
        Tensor2(t)
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    /// Cofactor tensor H with H_iJ the signed 2x2 minor of entry (i, J).
    /// Equals (1/2) F x F, and det(F) F^{-T} when F is invertible.
    pub fn cofactor(&self) -> Tensor2 {
        let m = &self.0;
        Tensor2([
            m[4] * m[8] - m[5] * m[7],
            m[5] * m[6] - m[3] * m[8],
            m[3] * m[7] - m[4] * m[6],
            m[2] * m[7] - m[1] * m[8],
            m[0] * m[8] - m[2] * m[6],
            m[1] * m[6] - m[0] * m[7],
            m[1] * m[5] - m[2] * m[4],
            m[2] * m[3] - m[0] * m[5],
            m[0] * m[4] - m[1] * m[3],
        ])
    }

    /// Inverse via the adjugate. Errors when |det| is zero to working precision.
    pub fn inverse(&self) -> Result<Tensor2> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return Err(Error::SingularSystem);
        }
        Ok(self.cofactor().transpose().scale(1.0 / d))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, rhs: Tensor2) -> Tensor2 {
        let mut t = self.0;
        for (c, r) in t.iter_mut().zip(rhs.0.iter()) {
            *c += r;
        }
        Tensor2(t)
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        for (c, r) in self.0.iter_mut().zip(rhs.0.iter()) {
            *c += r;
        }
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, rhs: Tensor2) -> Tensor2 {
        let mut t = self.0;
        for (c, r) in t.iter_mut().zip(rhs.0.iter()) {
            *c -= r;
        }
        Tensor2(t)
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        self.scale(s)
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[3 * i + j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[3 * i + j]
    }
}

/// Tensor cross product (A x B)_iI = E_ijk E_IJK A_jJ B_kK.
///
/// Bilinear and symmetric in its arguments; cofactor(F) = (1/2) F x F.
pub fn cross(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    // Expanded double Levi-Civita contraction: each output entry combines the
    // complementary 2x2 blocks of A and B.
    let mut t = [0.0; 9];
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for cap_i in 0..3 {
            let (j1, j2) = ((cap_i + 1) % 3, (cap_i + 2) % 3);
            t[3 * i + cap_i] = a.0[3 * i1 + j1] * b.0[3 * i2 + j2]
                - a.0[3 * i1 + j2] * b.0[3 * i2 + j1]
                - a.0[3 * i2 + j1] * b.0[3 * i1 + j2]
                + a.0[3 * i2 + j2] * b.0[3 * i1 + j1];
        }
    }
    Tensor2(t)
}

/// Right stretch data from the polar decomposition F = R U.
#[derive(Debug, Clone, Copy)]
pub struct Stretch {
    /// Symmetric positive-definite right stretch U = sqrt(F^T F).
    pub u: Tensor2,
    /// Volumetric factor J = det F.
    pub j: f64,
    /// Unimodular part of the stretch, det = 1.
    pub u_bar: Tensor2,
}

/// Eigendecomposition of a symmetric tensor by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the orthogonal tensor whose columns are the
/// corresponding eigenvectors. Off-diagonal magnitudes are driven below 1e-14
/// relative to the matrix scale.
pub fn sym_eigen(a: &Tensor2) -> (Vec3, Tensor2) {
    let mut m = a.0;
    let mut v = Tensor2::identity().0;
    let scale = a.max_abs().max(1e-300);
    let tol = 1e-14 * scale;
    for _ in 0..64 {
        let off = (m[1] * m[1] + m[2] * m[2] + m[5] * m[5]).sqrt();
        if off <= tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = m[3 * p + q];
            if apq.abs() <= tol * 1e-2 {
                continue;
            }
            let app = m[3 * p + p];
            let aqq = m[3 * q + q];
            let theta = 0.5 * (aqq - app) / apq;
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // Apply the rotation on both sides and accumulate eigenvectors.
            for k in 0..3 {
                let mkp = m[3 * k + p];
                let mkq = m[3 * k + q];
                m[3 * k + p] = c * mkp - s * mkq;
                m[3 * k + q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let mpk = m[3 * p + k];
                let mqk = m[3 * q + k];
                m[3 * p + k] = c * mpk - s * mqk;
                m[3 * q + k] = s * mpk + c * mqk;
            }
            for k in 0..3 {
                let vkp = v[3 * k + p];
                let vkq = v[3 * k + q];
                v[3 * k + p] = c * vkp - s * vkq;
                v[3 * k + q] = s * vkp + c * vkq;
            }
        }
    }
    (Vec3([m[0], m[4], m[8]]), Tensor2(v))
}

/// Symmetric function application via eigendecomposition: Q f(L) Q^T.
fn sym_map(a: &Tensor2, f: impl Fn(f64) -> f64) -> Tensor2 {
    let (vals, q) = sym_eigen(a);
    let qf = q.matmul(&Tensor2::diag(f(vals[0]), f(vals[1]), f(vals[2])));
    qf.matmul(&q.transpose())
}

/// Square root of a symmetric positive-semidefinite tensor.
pub fn sym_sqrt(a: &Tensor2) -> Tensor2 {
    sym_map(a, |x| x.max(0.0).sqrt())
}

/// Matrix exponential of a symmetric tensor (exact via eigendecomposition).
pub fn sym_exp(a: &Tensor2) -> Tensor2 {
    sym_map(a, f64::exp)
}

/// Polar decomposition data: U = sqrt(F^T F), J = det F, U_bar = J^{-1/3} U.
///
/// Requires det F > 0.
pub fn polar_stretch(f: &Tensor2) -> Result<Stretch> {
    let j = f.det();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian { det: j });
    }
    let c = f.transpose().matmul(f);
    let u = sym_sqrt(&c);
    let u_bar = u.scale(j.powf(-1.0 / 3.0));
    Ok(Stretch { u, j, u_bar })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    pub(crate) fn rand_tensor(rng: &mut impl Rng, scale: f64) -> Tensor2 {
        let mut t = [0.0; 9];
        for c in t.iter_mut() {
            *c = rng.gen_range(-scale..scale);
        }
        Tensor2(t)
    }

    /// Random deformation gradient with det > 0.2: identity plus a bounded
    /// perturbation, resampled until safely invertible.
    pub(crate) fn rand_def_grad(rng: &mut impl Rng) -> Tensor2 {
        loop {
            let f = Tensor2::identity() + rand_tensor(rng, 0.4);
            if f.det() > 0.2 {
                return f;
            }
        }
    }

    /// Random rotation from a uniform unit quaternion.
    pub(crate) fn rand_rotation(rng: &mut impl Rng) -> Tensor2 {
        let q: [f64; 4] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if n < 1e-3 {
            return rand_rotation(rng);
        }
        let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        Tensor2::from_rows([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// Independent inverse oracle: Gaussian elimination with partial pivoting.
    fn gauss_inverse(a: &Tensor2) -> Tensor2 {
        let mut m = [[0.0f64; 6]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = a[(i, j)];
            }
            m[i][3 + i] = 1.0;
        }
        for col in 0..3 {
            let piv = (col..3)
                .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                .unwrap();
            m.swap(col, piv);
            let d = m[col][col];
            for j in 0..6 {
                m[col][j] /= d;
            }
            for r in 0..3 {
                if r != col {
                    let f = m[r][col];
                    for j in 0..6 {
                        m[r][j] -= f * m[col][j];
                    }
                }
            }
        }
        Tensor2::from_rows([
            [m[0][3], m[0][4], m[0][5]],
            [m[1][3], m[1][4], m[1][5]],
            [m[2][3], m[2][4], m[2][5]],
        ])
    }

    #[test]
    fn cross_of_identity_is_twice_identity() {
        let i = Tensor2::identity();
        let c = cross(&i, &i);
        assert!((c - i.scale(2.0)).norm() < 1e-15);
    }

    #[test]
    fn cross_is_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = rand_tensor(&mut rng, 2.0);
            let b = rand_tensor(&mut rng, 2.0);
            assert!((cross(&a, &b) - cross(&b, &a)).norm() < 1e-13);
        }
    }

    #[test]
    fn half_cross_equals_cofactor() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let f = rand_tensor(&mut rng, 2.0);
            let lhs = cross(&f, &f).scale(0.5);
            assert!((lhs - f.cofactor()).max_abs() < 1e-13);
        }
    }

    #[test]
    fn cofactor_examples() {
        assert!((Tensor2::identity().cofactor() - Tensor2::identity()).norm() < 1e-15);
        let f = Tensor2::diag(2.0, 3.0, 4.0);
        assert!((f.cofactor() - Tensor2::diag(12.0, 8.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn cofactor_matches_det_inverse_transpose() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..300 {
            let f = rand_def_grad(&mut rng);
            let oracle = gauss_inverse(&f).transpose().scale(f.det());
            assert!((f.cofactor() - oracle).max_abs() < 1e-12);
        }
    }

    #[test]
    fn det_examples_and_cross_identity() {
        assert!((Tensor2::identity().det() - 1.0).abs() < 1e-15);
        assert!((Tensor2::diag(2.0, 3.0, 4.0).det() - 24.0).abs() < 1e-13);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..500 {
            let f = rand_tensor(&mut rng, 2.0);
            let via_cross = f.ddot(&cross(&f, &f)) / 6.0;
            assert!((f.det() - via_cross).abs() < 1e-13 * f.norm_sq().max(1.0));
        }
    }

    #[test]
    fn det_and_cofactor_are_multiplicative() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..300 {
            let a = rand_tensor(&mut rng, 1.5);
            let b = rand_tensor(&mut rng, 1.5);
            let ab = a.matmul(&b);
            assert!((ab.det() - a.det() * b.det()).abs() < 1e-11);
            let cof = a.cofactor().matmul(&b.cofactor());
            assert!((ab.cofactor() - cof).max_abs() < 1e-11);
        }
    }

    #[test]
    fn polar_stretch_identity_and_diag() {
        let s = polar_stretch(&Tensor2::identity()).unwrap();
        assert!((s.u - Tensor2::identity()).norm() < 1e-12);
        assert!((s.j - 1.0).abs() < 1e-14);

        let f = Tensor2::diag(4.0, 1.0, 1.0);
        let s = polar_stretch(&f).unwrap();
        assert!((s.u - f).norm() < 1e-10);
        assert!((s.j - 4.0).abs() < 1e-12);
        let expect = f.scale(4.0_f64.powf(-1.0 / 3.0));
        assert!((s.u_bar - expect).norm() < 1e-10);
        assert!((s.u_bar.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polar_stretch_recovers_constructed_stretch() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..200 {
            let q = rand_rotation(&mut rng);
            // Positive-definite stretch built directly from principal data.
            let axes = rand_rotation(&mut rng);
            let lam = Tensor2::diag(
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
            );
            let u0 = axes.matmul(&lam).matmul(&axes.transpose());
            let f = q.matmul(&u0);
            let s = polar_stretch(&f).unwrap();
            assert!((s.u - u0).max_abs() < 1e-10);
            // Reconstructed rotation is orthogonal and reproduces F.
            let r = f.matmul(&s.u.inverse().unwrap());
            assert!((r.transpose().matmul(&r) - Tensor2::identity()).norm() < 1e-10);
            assert!((r.matmul(&s.u) - f).norm() / f.norm() < 1e-10);
        }
    }

    #[test]
    fn polar_stretch_rejects_nonpositive_det() {
        let f = Tensor2::diag(-1.0, 1.0, 1.0);
        assert!(polar_stretch(&f).is_err());
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = rand_tensor(&mut rng, 2.0);
            let s = (a + a.transpose()).scale(0.5);
            let (vals, q) = sym_eigen(&s);
            let rebuilt = q
                .matmul(&Tensor2::diag(vals[0], vals[1], vals[2]))
                .matmul(&q.transpose());
            assert!((rebuilt - s).max_abs() < 1e-12);
            assert!((q.transpose().matmul(&q) - Tensor2::identity()).norm() < 1e-12);
        }
    }
}
