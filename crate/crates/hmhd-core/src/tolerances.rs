//! Central tolerance constants.
//!
//! Every numerical check in the crate pulls its threshold from here, so the
//! accuracy model lives in one place.  Identities are checked as
//! `|residual| <= tol * scale` where `scale` is the largest magnitude among
//! the sub-terms entering the identity; the constants below are therefore
//! relative to the natural size of the expression, not absolute.

/// Spectral round trips (physical -> spectral -> physical) and other purely
/// linear, diagonal operations.  These cost a handful of ulps per FFT pass.
pub const TOL_ROUNDTRIP: f64 = 1e-13;

/// Exact linear vector-calculus identities (curl of gradient, divergence of
/// curl, derivative/multiplier commutation).  Diagonal in Fourier space, so
/// only a few rounding steps accumulate.
pub const TOL_LINEAR: f64 = 1e-13;

/// Bilinear and trilinear identities evaluated with alias-free quadrature
/// (integration by parts, skew symmetry, pairwise cancellations).  The
/// quadrature is exact; the budget covers the floating-point reduction over
/// the grid.
pub const TOL_BILINEAR: f64 = 1e-12;

/// Identities whose terms carry up to four derivatives.  The |k|^4 weights
/// inflate intermediate magnitudes, so one extra digit is allowed.
pub const TOL_FOURTH_ORDER: f64 = 1e-11;

/// Relative divergence (‖div f‖ / ‖grad f‖) below which a field is treated
/// as divergence-free.
pub const TOL_DIVFREE: f64 = 1e-12;

/// Relative divergence allowed to accumulate along a time integration.
pub const TOL_DIVFREE_EVOLVED: f64 = 1e-11;

/// Energy-budget defect (relative) for integrating-factor RK4 runs at the
/// documented step sizes.
pub const TOL_ENERGY_BUDGET: f64 = 1e-6;

/// Sup-in-time relative mismatch for the rescaling-equivariance test.
pub const TOL_SCALING: f64 = 1e-6;

/// The L2 prefactor of the rescaling map is a finite product/quotient of
/// exact coefficient sums; machine precision applies.
pub const TOL_PREFACTOR: f64 = 1e-12;

/// A deliberately non-solenoidal control field must break the solenoidal
/// identities by at least this relative amount, or the control is void.
pub const NEG_CONTROL_MIN: f64 = 1e-6;

/// Step-halving error ratio window for the fourth-order scheme (16 +/- 20%).
pub const RK4_RATIO_LO: f64 = 12.8;
/// Upper end of the step-halving window.
pub const RK4_RATIO_HI: f64 = 19.2;

/// Sobolev ceiling treated as numerical blow-up.
pub const H3_CEILING: f64 = 1e6;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_sane() {
        assert!(TOL_ROUNDTRIP <= TOL_BILINEAR);
        assert!(TOL_BILINEAR <= TOL_FOURTH_ORDER);
        assert!(TOL_FOURTH_ORDER < TOL_ENERGY_BUDGET);
        assert!(RK4_RATIO_LO < 16.0 && 16.0 < RK4_RATIO_HI);
    }
}
