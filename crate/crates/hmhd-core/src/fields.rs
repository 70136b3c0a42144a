//! Three-component vector fields over 2-D and 3-D grids.
//!
//! On a 2-D grid the three components depend on (x1, x2) only: the 2.5-D
//! convention.  Divergence-free generation on such grids places the
//! horizontal pair in the rotated-gradient direction (a stream function)
//! while the out-of-plane component is unconstrained.

use ndarray::{Dimension, IxDyn};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{HmhdError, Result};
use crate::spectral::{l2_inner, Grid, SpectralScalar};
use crate::tolerances::TOL_DIVFREE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FieldKind {
    Velocity,
    Magnetic,
    Vorticity,
    Current,
    Generic,
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub kind: FieldKind,
    comps: [SpectralScalar; 3],
}

impl VectorField {
    pub fn new(kind: FieldKind, comps: [SpectralScalar; 3]) -> VectorField {
        let g = comps[0].grid().clone();
        assert!(
            comps.iter().all(|c| c.grid() == &g),
            "vector components must share a grid"
        );
        VectorField { kind, comps }
    }

    pub fn zero(grid: &Grid, kind: FieldKind) -> VectorField {
        VectorField {
            kind,
            comps: [
                SpectralScalar::zero(grid),
                SpectralScalar::zero(grid),
                SpectralScalar::zero(grid),
            ],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    /// Component accessor, 1-based to match the physics notation.
    pub fn comp(&self, i: usize) -> &SpectralScalar {
        assert!((1..=3).contains(&i));
        &self.comps[i - 1]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut SpectralScalar {
        assert!((1..=3).contains(&i));
        &mut self.comps[i - 1]
    }

    pub fn comps(&self) -> &[SpectralScalar; 3] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [SpectralScalar; 3] {
        &mut self.comps
    }

    pub fn into_comps(self) -> [SpectralScalar; 3] {
        self.comps
    }

    /// Horizontal/vertical split: f = f_h + f_v with f_h = (f1, f2, 0) and
    /// f_v = (0, 0, f3).  Coefficients are moved, not recomputed, so the sum
    /// reproduces the field bit for bit.
    pub fn split_hv(&self) -> (VectorField, VectorField) {
        let zero = SpectralScalar::zero(self.grid());
        let h = VectorField::new(
            self.kind,
            [self.comps[0].clone(), self.comps[1].clone(), zero.clone()],
        );
        let v = VectorField::new(self.kind, [zero.clone(), zero, self.comps[2].clone()]);
        (h, v)
    }

    pub fn divergence(&self) -> SpectralScalar {
        let mut d = self.comps[0].partial_derivative(1);
        d.add_scaled(&self.comps[1].partial_derivative(2), 1.0);
        if self.grid().dim() == 3 {
            d.add_scaled(&self.comps[2].partial_derivative(3), 1.0);
        }
        d
    }

    /// Curl with the 2.5-D convention on 2-D grids (d/dx3 = 0):
    /// (d2 f3 - d3 f2, d3 f1 - d1 f3, d1 f2 - d2 f1).
    pub fn curl(&self) -> VectorField {
        let c1 = {
            let mut v = self.comps[2].partial_derivative(2);
            v.add_scaled(&self.comps[1].partial_derivative(3), -1.0);
            v
        };
        let c2 = {
            let mut v = self.comps[0].partial_derivative(3);
            v.add_scaled(&self.comps[2].partial_derivative(1), -1.0);
            v
        };
        let c3 = {
            let mut v = self.comps[1].partial_derivative(1);
            v.add_scaled(&self.comps[0].partial_derivative(2), -1.0);
            v
        };
        VectorField::new(FieldKind::Generic, [c1, c2, c3])
    }

    /// Current density j = curl b.
    pub fn current_density(&self) -> VectorField {
        let mut j = self.curl();
        j.kind = FieldKind::Current;
        j
    }

    /// Leray projection onto divergence-free fields.  On 2-D grids only the
    /// horizontal pair is projected (the out-of-plane component never enters
    /// the divergence); the zero mode is untouched.
    pub fn leray_project(&self) -> VectorField {
        let grid = self.grid().clone();
        let dim = grid.dim();
        let mut out = self.clone();
        let dims = grid.dims().to_vec();
        let shape = IxDyn(&dims);
        let mut it = ndarray::indices(shape).into_iter();
        let mut xi = [0.0f64; 3];
        loop {
            let Some(idx) = it.next() else { break };
            let ix = idx.slice();
            let mut k2 = 0.0f64;
            for a in 0..dim {
                xi[a] = grid.wavenumber(a, ix[a]);
                k2 += xi[a] * xi[a];
            }
            if k2 == 0.0 {
                continue;
            }
            let mut dot = Complex64::ZERO;
            for a in 0..dim {
                dot += out.comps[a].coeffs()[IxDyn(ix)] * xi[a];
            }
            if dot == Complex64::ZERO {
                continue;
            }
            for a in 0..dim {
                let c = &mut out.comps[a].coeffs_mut()[IxDyn(ix)];
                *c -= dot * (xi[a] / k2);
            }
        }
        out
    }

    /// ‖div f‖_{L2} / ‖grad f‖_{L2}, the relative solenoidality defect.
    pub fn div_residual_rel(&self) -> f64 {
        let div = self.divergence().l2_norm();
        let mut grad_sq = 0.0f64;
        for c in &self.comps {
            let s = c.sobolev_seminorm(1.0);
            grad_sq += s * s;
        }
        let grad = grad_sq.sqrt();
        if grad == 0.0 {
            if div == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            div / grad
        }
    }

    pub fn is_div_free(&self) -> bool {
        self.div_residual_rel() <= TOL_DIVFREE
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| {
                let n = c.l2_norm();
                n * n
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn sobolev_seminorm(&self, s: f64) -> f64 {
        self.comps
            .iter()
            .map(|c| {
                let n = c.sobolev_seminorm(s);
                n * n
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField::new(
            self.kind,
            [
                self.comps[0].scaled(s),
                self.comps[1].scaled(s),
                self.comps[2].scaled(s),
            ],
        )
    }

    pub fn add_scaled(&mut self, other: &VectorField, s: f64) {
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            a.add_scaled(b, s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    /// Pointwise Euclidean magnitude |f|, sampled on a 2x-refined grid;
    /// returns its maximum.
    pub fn linf(&self) -> f64 {
        let dims: Vec<usize> = self
            .grid()
            .dims()
            .iter()
            .zip(self.grid().band())
            .map(|(&n, &b)| (2 * n).max(2 * b + 2).next_power_of_two())
            .collect();
        let p: Vec<_> = self.comps.iter().map(|c| c.to_physical_on(&dims)).collect();
        let mut m = 0.0f64;
        for i in 0..p[0].len() {
            let s = p[0].as_slice().unwrap()[i].powi(2)
                + p[1].as_slice().unwrap()[i].powi(2)
                + p[2].as_slice().unwrap()[i].powi(2);
            m = m.max(s);
        }
        m.sqrt()
    }

    /// Maximum pointwise Frobenius magnitude of the gradient tensor.
    pub fn grad_linf(&self) -> f64 {
        let dims: Vec<usize> = self
            .grid()
            .dims()
            .iter()
            .zip(self.grid().band())
            .map(|(&n, &b)| (2 * n).max(2 * b + 2).next_power_of_two())
            .collect();
        let dim = self.grid().dim();
        let mut sq: Option<ndarray::ArrayD<f64>> = None;
        for c in &self.comps {
            for axis in 1..=dim {
                let d = c.partial_derivative(axis).to_physical_on(&dims);
                match &mut sq {
                    None => sq = Some(d.mapv(|v| v * v)),
                    Some(acc) => {
                        ndarray::Zip::from(acc).and(&d).for_each(|a, &b| *a += b * b)
                    }
                }
            }
        }
        sq.map(|a| a.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt())
            .unwrap_or(0.0)
    }

    /// Re-expresses a 2-D (2.5-D) field on a 3-D grid, constant along x3.
    pub fn embed_in_3d(&self, n3: usize) -> Result<VectorField> {
        if self.grid().dim() != 2 {
            return Err(HmhdError::invalid("embed_in_3d expects a 2-D field"));
        }
        let g2 = self.grid();
        let g3 = Grid::new(
            vec![g2.dims()[0], g2.dims()[1], n3],
            vec![g2.lengths()[0], g2.lengths()[1], crate::spectral::TAU],
            vec![g2.band()[0], g2.band()[1], 0],
        )?;
        let mut comps: Vec<SpectralScalar> = Vec::with_capacity(3);
        for c in &self.comps {
            let mut c3 = SpectralScalar::zero(&g3);
            for (idx, v) in c.coeffs().indexed_iter() {
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let ix = idx.slice();
                c3.coeffs_mut()[IxDyn(&[ix[0], ix[1], 0])] = *v;
            }
            comps.push(c3);
        }
        Ok(VectorField::new(
            self.kind,
            [comps[0].clone(), comps[1].clone(), comps[2].clone()],
        ))
    }
}

/// Cross product a x b truncated to `target`'s band, each component an
/// alias-free quadratic product.
pub fn cross_product_on(a: &VectorField, b: &VectorField, target: &Grid) -> VectorField {
    let term = |i: usize, j: usize| crate::spectral::product_on(&[a.comp(i), b.comp(j)], target);
    let c1 = {
        let mut v = term(2, 3);
        v.add_scaled(&term(3, 2), -1.0);
        v
    };
    let c2 = {
        let mut v = term(3, 1);
        v.add_scaled(&term(1, 3), -1.0);
        v
    };
    let c3 = {
        let mut v = term(1, 2);
        v.add_scaled(&term(2, 1), -1.0);
        v
    };
    VectorField::new(FieldKind::Generic, [c1, c2, c3])
}

/// Cross product with every retained mode exact; the result lives on the
/// product grid (band = sum of the factors' bands).
pub fn cross_product_full(a: &VectorField, b: &VectorField) -> VectorField {
    let term = |i: usize, j: usize| crate::spectral::product(&[a.comp(i), b.comp(j)]);
    let c1 = {
        let mut v = term(2, 3);
        v.add_scaled(&term(3, 2), -1.0);
        v
    };
    let c2 = {
        let mut v = term(3, 1);
        v.add_scaled(&term(1, 3), -1.0);
        v
    };
    let c3 = {
        let mut v = term(1, 2);
        v.add_scaled(&term(2, 1), -1.0);
        v
    };
    VectorField::new(FieldKind::Generic, [c1, c2, c3])
}

/// L2 inner product of two vector fields on a common discretization.
pub fn vector_l2_inner(a: &VectorField, b: &VectorField) -> f64 {
    (1..=3).map(|i| l2_inner(a.comp(i), b.comp(i))).sum()
}

fn box_muller(rng: &mut ChaCha20Rng) -> (f64, f64) {
    // Uniforms in (0, 1]: 53-bit mantissa of the next u64, shifted off zero.
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) / 9007199254740992.0;
    let u2 = ((rng.next_u64() >> 11) as f64 + 1.0) / 9007199254740992.0;
    let r = (-2.0 * u1.ln()).sqrt();
    let th = crate::spectral::TAU * u2;
    (r * th.cos(), r * th.sin())
}

/// Random divergence-free field with a power-law spectrum.
///
/// Determinism contract: a ChaCha20 stream seeded with `seed` (the
/// generator's 64-bit seeding convention) is consumed in lexicographic order
/// over the frequency box [-k_max, k_max]^dim; for every lattice point and
/// every component, two unit normals are produced by the Box-Muller map from
/// two consecutive 53-bit uniforms.  Draws are consumed whether or not the
/// mode is kept, so equal arguments reproduce identical bytes.  Modes with
/// Euclidean radius in [1, k_max] get a complex Gaussian coefficient with
/// standard deviation |k|^{-slope}; everything else (the mean included) is
/// zero.  The field is then Hermitian-symmetrized and Leray-projected (on
/// 2-D grids the projection acts on the horizontal pair, leaving the
/// out-of-plane component free, which realizes the stream-function form).
pub fn random_divfree(grid: &Grid, seed: u64, k_max: usize, slope: f64) -> Result<VectorField> {
    if k_max == 0 {
        return Err(HmhdError::invalid("k_max must be at least 1"));
    }
    for a in 0..grid.dim() {
        if k_max > grid.band()[a] {
            return Err(HmhdError::invalid(format!(
                "k_max {} exceeds grid band limit {} on axis {}",
                k_max,
                grid.band()[a],
                a + 1
            )));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let k = k_max as i64;
    let mut f = VectorField::zero(grid, FieldKind::Magnetic);
    let mut tuple = vec![-k; dim];
    'outer: loop {
        let r2: i64 = tuple.iter().map(|t| t * t).sum();
        let keep = r2 >= 1 && r2 <= k * k;
        let amp = if keep {
            ((r2 as f64).sqrt()).powf(-slope)
        } else {
            0.0
        };
        for c in 0..3 {
            let (g_re, g_im) = box_muller(&mut rng);
            if keep {
                let mut idx = Vec::with_capacity(dim);
                for (a, &t) in tuple.iter().enumerate() {
                    let n = grid.dims()[a] as i64;
                    idx.push(if t >= 0 { t as usize } else { (n + t) as usize });
                }
                f.comp_mut(c + 1).coeffs_mut()[IxDyn(&idx)] =
                    Complex64::new(g_re, g_im) * (amp * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
        // lexicographic advance
        for a in (0..dim).rev() {
            tuple[a] += 1;
            if tuple[a] <= k {
                continue 'outer;
            }
            tuple[a] = -k;
        }
        break;
    }
    // Hermitian part: c(k) <- (c(k) + conj(c(-k))) / 2.
    for c in 1..=3 {
        let src = f.comp(c).clone();
        let dims = grid.dims().to_vec();
        for (idx, v) in f.comp_mut(c).coeffs_mut().indexed_iter_mut() {
            let ix = idx.slice();
            let neg: Vec<i64> = (0..dim)
                .map(|a| {
                    let n = dims[a];
                    let fr = if ix[a] <= n / 2 {
                        ix[a] as i64
                    } else {
                        ix[a] as i64 - n as i64
                    };
                    -fr
                })
                .collect();
            let mirrored = src.coeff(&neg);
            *v = (*v + mirrored.conj()) * 0.5;
        }
    }
    Ok(f.leray_project())
}

/// FNV-1a over the coefficient bytes; stable identifier for provenance.
pub fn field_hash(f: &VectorField) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for &d in f.grid().dims() {
        eat(&(d as u64).to_le_bytes());
    }
    for &b in f.grid().band() {
        eat(&(b as u64).to_le_bytes());
    }
    for c in 1..=3 {
        for v in f.comp(c).coeffs().iter() {
            eat(&v.re.to_le_bytes());
            eat(&v.im.to_le_bytes());
        }
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize, k: usize) -> Grid {
        Grid::new_square(2, n, k).unwrap()
    }

    #[test]
    fn curl_examples() {
        let g = grid2(16, 5);
        // b = (0, 0, sin x1) -> curl = (0, -cos x1, 0)
        let sin1 = SpectralScalar::from_modes(&g, &[(vec![1, 0], Complex64::new(0.0, -0.5))]).unwrap();
        let zero = SpectralScalar::zero(&g);
        let b = VectorField::new(FieldKind::Magnetic, [zero.clone(), zero.clone(), sin1]);
        let c = b.curl();
        let cos1 = SpectralScalar::from_modes(&g, &[(vec![1, 0], Complex64::new(0.5, 0.0))]).unwrap();
        assert!(c.comp(1).max_abs_coeff() < 1e-15);
        assert!((&c.comp(2).scaled(-1.0) - &cos1).max_abs_coeff() < 1e-15);
        assert!(c.comp(3).max_abs_coeff() < 1e-15);

        // b = (sin x2, 0, 0) -> curl = (0, 0, -cos x2)
        let sin2 = SpectralScalar::from_modes(&g, &[(vec![0, 1], Complex64::new(0.0, -0.5))]).unwrap();
        let b = VectorField::new(FieldKind::Magnetic, [sin2, zero.clone(), zero.clone()]);
        let c = b.curl();
        let cos2 = SpectralScalar::from_modes(&g, &[(vec![0, 1], Complex64::new(0.5, 0.0))]).unwrap();
        assert!(c.comp(1).max_abs_coeff() < 1e-15);
        assert!(c.comp(2).max_abs_coeff() < 1e-15);
        assert!((&c.comp(3).scaled(-1.0) - &cos2).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn leray_annihilates_gradients() {
        let g = grid2(16, 5);
        // phi = sin(x1 + x2); grad phi = (cos(x1+x2), cos(x1+x2), 0)
        let cos11 = SpectralScalar::from_modes(&g, &[(vec![1, 1], Complex64::new(0.5, 0.0))]).unwrap();
        let gradt =
            VectorField::new(FieldKind::Generic, [cos11.clone(), cos11, SpectralScalar::zero(&g)]);
        let p = gradt.leray_project();
        assert!(p.comp(1).max_abs_coeff() < 1e-13);
        assert!(p.comp(2).max_abs_coeff() < 1e-13);
    }

    #[test]
    fn random_field_is_divfree_and_deterministic() {
        let g = grid2(32, 10);
        let b1 = random_divfree(&g, 42, 8, 2.0).unwrap();
        let b2 = random_divfree(&g, 42, 8, 2.0).unwrap();
        for c in 1..=3 {
            for (x, y) in b1.comp(c).coeffs().iter().zip(b2.comp(c).coeffs().iter()) {
                assert_eq!(x, y);
            }
        }
        assert!(b1.div_residual_rel() <= 1e-12, "{}", b1.div_residual_rel());
        assert!(b1.l2_norm() > 0.0);
        let b3 = random_divfree(&g, 43, 8, 2.0).unwrap();
        assert!((b3.comp(1) - b1.comp(1)).max_abs_coeff() > 0.0);
        // zero mean
        assert!(b1.comp(1).coeff(&[0, 0]).norm() == 0.0);
    }

    #[test]
    fn leray_is_idempotent_and_selfadjoint() {
        let g = grid2(32, 10);
        let f = random_divfree(&g, 7, 8, 1.0).unwrap();
        // perturb away from div-free
        let extra = SpectralScalar::from_modes(&g, &[(vec![2, 3], Complex64::new(0.4, 0.2))]).unwrap();
        let mut v = f.clone();
        v.comp_mut(1).add_scaled(&extra, 1.0);
        let p1 = v.leray_project();
        let p2 = p1.leray_project();
        for c in 1..=3 {
            let d = (p2.comp(c) - p1.comp(c)).max_abs_coeff();
            assert!(d <= 1e-13 * p1.comp(c).max_abs_coeff().max(1.0));
        }
        let w = random_divfree(&g, 8, 8, 1.0).unwrap();
        let lhs = vector_l2_inner(&v.leray_project(), &w);
        let rhs = vector_l2_inner(&v, &w.leray_project());
        let scale = v.l2_norm() * w.l2_norm();
        assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn split_reassembles_exactly() {
        let g = grid2(16, 5);
        let f = random_divfree(&g, 3, 4, 2.0).unwrap();
        let (h, v) = f.split_hv();
        let mut sum = h.clone();
        sum.add_scaled(&v, 1.0);
        for c in 1..=3 {
            for (x, y) in sum.comp(c).coeffs().iter().zip(f.comp(c).coeffs().iter()) {
                assert_eq!(x, y);
            }
        }
    }
}
