//! Nonlinear terms: the Hall term, its advective rewriting and transport
//! operators.  Quadratic products inside these operators are evaluated
//! alias-free and truncated back to the field's own band (3/2-rule style);
//! the fully padded variants used by the identity ledger live in `spectral`.

use crate::error::{HmhdError, Result};
use crate::fields::{cross_product_on, FieldKind, VectorField};
use crate::spectral::{product, product_on, SpectralScalar};

/// curl(j x b) with j = curl b, dealiased to b's grid band.
pub fn hall_term(b: &VectorField) -> VectorField {
    let j = b.current_density();
    cross_product_on(&j, b, b.grid()).curl()
}

/// curl((b.grad) b): equals `hall_term` pointwise because the difference
/// (j x b) - (b.grad) b is the gradient of |b|^2 / 2, killed by the curl.
pub fn hall_term_alt(b: &VectorField) -> VectorField {
    advect(b, b).curl()
}

/// (u.grad) f, component-wise sum over u_k d_k f_j, truncated to f's band.
pub fn advect(u: &VectorField, f: &VectorField) -> VectorField {
    let grid = f.grid().clone();
    let dim = grid.dim();
    let mut comps: Vec<SpectralScalar> = Vec::with_capacity(3);
    for jc in 1..=3 {
        let mut acc = SpectralScalar::zero(&grid);
        for k in 1..=dim {
            let d = f.comp(jc).partial_derivative(k);
            acc.add_scaled(&product_on(&[u.comp(k), &d], &grid), 1.0);
        }
        comps.push(acc);
    }
    VectorField::new(
        FieldKind::Generic,
        [comps[0].clone(), comps[1].clone(), comps[2].clone()],
    )
}

/// (u.grad) g for a scalar g.
pub fn advect_scalar(u: &VectorField, g: &SpectralScalar) -> SpectralScalar {
    let grid = g.grid().clone();
    let mut acc = SpectralScalar::zero(&grid);
    for k in 1..=grid.dim() {
        let d = g.partial_derivative(k);
        acc.add_scaled(&product_on(&[u.comp(k), &d], &grid), 1.0);
    }
    acc
}

/// L2 norms of the two 2.5-D structural cancellations, each evaluated
/// term by term with exact products:
/// (omega.grad) u3 = d2 u3 d1 u3 - d1 u3 d2 u3 and its magnetic analogue
/// (j.grad) b3 = d2 b3 d1 b3 - d1 b3 d2 b3.  Both vanish identically; the
/// returned norms measure only floating-point noise.
pub fn vorticity_cancellation_residuals(u: &VectorField, b: &VectorField) -> Result<(f64, f64)> {
    if u.grid().dim() != 2 || b.grid().dim() != 2 {
        return Err(HmhdError::invalid(
            "the planar cancellations are defined on 2-D grids only",
        ));
    }
    let resid = |f3: &SpectralScalar| -> f64 {
        let d1 = f3.partial_derivative(1);
        let d2 = f3.partial_derivative(2);
        let p = product(&[&d2, &d1]);
        let q = product(&[&d1, &d2]);
        (&p - &q).l2_norm()
    };
    Ok((resid(u.comp(3)), resid(b.comp(3))))
}

/// Right-hand side of the out-of-plane vorticity equation in 2.5-D:
/// d_t omega3 = -(u.grad) omega3 - (-Lap)^alpha omega3 + [curl(j x b)]_3,
/// with omega3 = d1 u2 - d2 u1.
pub fn omega3_rhs(u: &VectorField, b: &VectorField, alpha: f64) -> Result<SpectralScalar> {
    if u.grid().dim() != 2 {
        return Err(HmhdError::invalid("omega3_rhs is a 2.5-D operator"));
    }
    let mut om3 = u.comp(2).partial_derivative(1);
    om3.add_scaled(&u.comp(1).partial_derivative(2), -1.0);
    let mut rhs = advect_scalar(u, &om3).scaled(-1.0);
    rhs.add_scaled(&om3.fractional_laplacian(2.0 * alpha), -1.0);
    let hall = hall_term(b);
    rhs.add_scaled(hall.comp(3), 1.0);
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_divfree, vector_l2_inner};
    use crate::spectral::Grid;
    use num_complex::Complex64;

    #[test]
    fn hall_term_of_single_mode_vanishes() {
        // b = (sin x2, 0, 0): j = (0, 0, -cos x2), j x b = (0, 0, 0) x ... =
        // (0*b3 - j3*b2, j3*b1 - 0, 0) = (0, -cos x2 sin x2, 0) is a pure
        // gradient in disguise; its curl vanishes identically.
        let g = Grid::new_square(2, 32, 10).unwrap();
        let sin2 =
            SpectralScalar::from_modes(&g, &[(vec![0, 1], Complex64::new(0.0, -0.5))]).unwrap();
        let zero = SpectralScalar::zero(&g);
        let b = VectorField::new(FieldKind::Magnetic, [sin2, zero.clone(), zero]);
        let h = hall_term(&b);
        for c in 1..=3 {
            assert!(h.comp(c).max_abs_coeff() < 1e-15, "component {c}");
        }
    }

    #[test]
    fn hall_energy_neutrality() {
        let g = Grid::new_square(2, 64, 10).unwrap();
        let b = random_divfree(&g, 11, 10, 2.0).unwrap();
        let h = hall_term(&b);
        let pairing = vector_l2_inner(&h, &b);
        let j = b.current_density();
        let scale = j.l2_norm() * b.sobolev_seminorm(1.0) * b.l2_norm();
        assert!(pairing.abs() <= 1e-12 * scale.max(1.0), "pairing {pairing} scale {scale}");
    }

    #[test]
    fn advection_skew_symmetry() {
        let g = Grid::new_square(2, 64, 10).unwrap();
        let u = random_divfree(&g, 21, 8, 2.0).unwrap();
        let f = random_divfree(&g, 22, 8, 2.0).unwrap();
        let a = advect(&u, &f);
        let val = vector_l2_inner(&a, &f);
        let scale = u.l2_norm() * f.sobolev_seminorm(1.0) * f.l2_norm();
        assert!(val.abs() <= 1e-12 * scale.max(1.0), "val {val}");
    }

    #[test]
    fn planar_cancellations_are_noise_level() {
        let g = Grid::new_square(2, 64, 10).unwrap();
        let u = random_divfree(&g, 31, 10, 2.0).unwrap();
        let b = random_divfree(&g, 32, 10, 2.0).unwrap();
        let (ru, rb) = vorticity_cancellation_residuals(&u, &b).unwrap();
        let su = u.comp(3).sobolev_seminorm(1.0).powi(2);
        let sb = b.comp(3).sobolev_seminorm(1.0).powi(2);
        assert!(ru <= 1e-13 * su.max(1.0), "ru {ru}");
        assert!(rb <= 1e-13 * sb.max(1.0), "rb {rb}");
    }
}
