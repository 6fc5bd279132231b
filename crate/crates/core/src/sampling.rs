//! Concentric sampling of the deformation space: deviatoric directions in
//! the five-dimensional space of symmetric traceless tensors, amplitudes
//! along each direction mapped through the matrix exponential, and an
//! independent sphere sampling of the scaled electric displacement field.

use crate::analytic::{ti_response, TiPotentialParams};
use crate::dataset::{Dataset, LoadPath, Row};
use crate::error::{Error, Result};
use crate::tensor::{sym_exp, Tensor2, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Sampling layout for the analytic benchmark dataset.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub n_dev_dirs: usize,
    /// Deviatoric amplitudes, ascending.
    pub dev_amps: Vec<f64>,
    pub j_values: Vec<f64>,
    pub n_sphere: usize,
    /// Electric amplitudes, ascending.
    pub d0_amps: Vec<f64>,
    pub seed: u64,
    /// Cross every stretch sample with every electric sample instead of
    /// pairing amplitude steps one-to-one.
    pub full_grid: bool,
}

impl SamplingPlan {
    /// Desk-scale defaults: 30 directions x 50 amplitudes in [0.1, 1],
    /// J = 1, 20 sphere directions x 50 amplitudes in [0, 4].
    pub fn desk(seed: u64) -> SamplingPlan {
        SamplingPlan {
            n_dev_dirs: 30,
            dev_amps: linspace(0.1, 1.0, 50),
            j_values: vec![1.0],
            n_sphere: 20,
            d0_amps: linspace(0.0, 4.0, 50),
            seed,
            full_grid: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dev_dirs == 0 || self.n_sphere == 0 {
            return Err(Error::InvalidConfig("plan needs at least one direction".into()));
        }
        if self.dev_amps.is_empty() || self.d0_amps.is_empty() || self.j_values.is_empty() {
            return Err(Error::InvalidConfig("plan needs non-empty amplitude lists".into()));
        }
        for amps in [&self.dev_amps, &self.d0_amps] {
            if amps.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidConfig("amplitudes must be ascending".into()));
            }
        }
        if !self.full_grid && self.dev_amps.len() != self.d0_amps.len() {
            return Err(Error::InvalidConfig(format!(
                "paired sampling needs equally many deviatoric and electric amplitudes \
                 ({} vs {}); use the full grid for unequal lists",
                self.dev_amps.len(),
                self.d0_amps.len()
            )));
        }
        if self.j_values.iter().any(|j| !(*j > 0.0)) {
            return Err(Error::InvalidConfig("volume ratios must be positive".into()));
        }
        Ok(())
    }

    /// Number of sub-datasets the plan will emit.
    pub fn n_paths(&self) -> usize {
        let base = self.n_dev_dirs * self.n_sphere * self.j_values.len();
        if self.full_grid {
            base * self.dev_amps.len()
        } else {
            base
        }
    }

    pub fn n_rows(&self) -> usize {
        if self.full_grid {
            self.n_paths() * self.d0_amps.len()
        } else {
            self.n_paths() * self.dev_amps.len()
        }
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive; just `[a]` for n = 1.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Orthonormal (Frobenius) basis of the symmetric traceless tensors.
pub fn dev_basis() -> [Tensor2; 5] {
    let s2 = std::f64::consts::SQRT_2;
    let s6 = 6.0_f64.sqrt();
    [
        Tensor2::diag(1.0 / s2, -1.0 / s2, 0.0),
        Tensor2::diag(1.0 / s6, 1.0 / s6, -2.0 / s6),
        Tensor2::from_rows([[0.0, 1.0 / s2, 0.0], [1.0 / s2, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        Tensor2::from_rows([[0.0, 0.0, 1.0 / s2], [0.0, 0.0, 0.0], [1.0 / s2, 0.0, 0.0]]),
        Tensor2::from_rows([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0 / s2], [0.0, 1.0 / s2, 0.0]]),
    ]
}

/// Uniform directions on the 4-sphere via normalized Gaussians.
pub fn dev_directions(n: usize, seed: u64) -> Vec<[f64; 5]> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(n);
    while dirs.len() < n {
        let mut c = [0.0; 5];
        for ci in c.iter_mut() {
            *ci = StandardNormal.sample(&mut rng);
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        for ci in c.iter_mut() {
            *ci /= norm;
        }
        dirs.push(c);
    }
    dirs
}

/// Stretch U = J^{1/3} exp(amplitude * D) with D the unit deviatoric
/// direction; det U = J exactly up to eigendecomposition roundoff.
pub fn sample_stretch(direction: &[f64; 5], amplitude: f64, j: f64) -> Tensor2 {
    let basis = dev_basis();
    let mut d = Tensor2::ZERO;
    for (c, b) in direction.iter().zip(basis.iter()) {
        d += b.scale(*c);
    }
    sym_exp(&d.scale(amplitude)).scale(j.powf(1.0 / 3.0))
}

/// Fibonacci-lattice points on the unit sphere.
pub fn sphere_points(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Build the analytic benchmark dataset: one sub-dataset per (deviatoric
/// direction, sphere direction) pair. In the paired (default) mode a
/// sub-dataset walks both amplitude lists in lockstep; in full-grid mode
/// every stretch sample is crossed with every electric amplitude.
pub fn build_ti_dataset(plan: &SamplingPlan, potential: &TiPotentialParams) -> Result<Dataset> {
    plan.validate()?;
    let dirs = dev_directions(plan.n_dev_dirs, plan.seed);
    let sphere = sphere_points(plan.n_sphere);
    let multi_j = plan.j_values.len() > 1;

    // Path descriptors first so generation can run in parallel while the
    // output order stays a pure function of the plan.
    struct Desc {
        id: String,
        dir: [f64; 5],
        sphere: Vec3,
        j: f64,
        dev_amp: Option<f64>,
    }
    let mut descs = Vec::with_capacity(plan.n_paths());
    for (di, dir) in dirs.iter().enumerate() {
        for (ji, &j) in plan.j_values.iter().enumerate() {
            let j_tag = if multi_j {
                format!("-j{:02}", ji)
            } else {
                String::new()
            };
            if plan.full_grid {
                for (ai, &amp) in plan.dev_amps.iter().enumerate() {
                    for (si, sph) in sphere.iter().enumerate() {
                        descs.push(Desc {
                            id: format!("dev{:03}-amp{:02}-sph{:03}{}", di, ai, si, j_tag),
                            dir: *dir,
                            sphere: *sph,
                            j,
                            dev_amp: Some(amp),
                        });
                    }
                }
            } else {
                for (si, sph) in sphere.iter().enumerate() {
                    descs.push(Desc {
                        id: format!("dev{:03}-sph{:03}{}", di, si, j_tag),
                        dir: *dir,
                        sphere: *sph,
                        j,
                        dev_amp: None,
                    });
                }
            }
        }
    }

    let paths: Result<Vec<LoadPath>> = descs
        .par_iter()
        .map(|desc| {
            let mut rows = Vec::new();
            match desc.dev_amp {
                Some(amp) => {
                    let f = sample_stretch(&desc.dir, amp, desc.j);
                    for &da in &plan.d0_amps {
                        let d0 = desc.sphere.scale(da);
                        let (p, e0) = ti_response(&f, &d0, potential)?;
                        rows.push(Row { f, d0, p, e0 });
                    }
                }
                None => {
                    for (k, &amp) in plan.dev_amps.iter().enumerate() {
                        let f = sample_stretch(&desc.dir, amp, desc.j);
                        let d0 = desc.sphere.scale(plan.d0_amps[k]);
                        let (p, e0) = ti_response(&f, &d0, potential)?;
                        rows.push(Row { f, d0, p, e0 });
                    }
                }
            }
            Ok(LoadPath {
                id: desc.id.clone(),
                rows,
            })
        })
        .collect();

    let ds = Dataset { paths: paths? };
    ds.validate()?;
    Ok(ds)
}
