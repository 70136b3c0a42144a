//! Per-sample diagnostics, the dual vorticity assembly check, and the
//! scaling-invariance study.

use serde::{Deserialize, Serialize};

use crate::error::{HmhdError, Result};
use crate::evolve::{DtMode, ModelSpec, Scheme, SimState, Stepper, StepperConfig, System};
use crate::fields::VectorField;
use crate::ledger::{grad_mag, DerivCache};
use crate::nonlinear::{advect_scalar, hall_term, omega3_rhs};
use crate::spectral::SpectralScalar;

/// Exponent pairs for the criterion integrands |u_h|_{L^p}^r and
/// |grad^2 b_h|_{L^p}^r.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CritConfig {
    pub p_u: f64,
    pub r_u: f64,
    pub p_b: f64,
    pub r_b: f64,
}

impl Default for CritConfig {
    fn default() -> Self {
        CritConfig {
            p_u: 6.0,
            r_u: 4.0,
            p_b: 2.0,
            r_b: 4.0,
        }
    }
}

impl CritConfig {
    /// The integrands only control regularity when the exponent relations
    /// 3/p + 2/r <= 1 (velocity) and 3/p + 2/r <= 2 (curvature) hold.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if 3.0 / self.p_u + 2.0 / self.r_u > 1.0 + 1e-12 {
            w.push(format!(
                "velocity exponents (p={}, r={}) violate 3/p + 2/r <= 1; the integrand is recorded but is not a regularity criterion",
                self.p_u, self.r_u
            ));
        }
        if 3.0 / self.p_b + 2.0 / self.r_b > 2.0 + 1e-12 {
            w.push(format!(
                "curvature exponents (p={}, r={}) violate 3/p + 2/r <= 2; the integrand is recorded but is not a regularity criterion",
                self.p_b, self.r_b
            ));
        }
        w
    }
}

/// One diagnostics sample.  The sup norm of j stands in for its BMO norm;
/// every consumer of `crit_j_linf_sq` must treat it as the (larger)
/// surrogate, which is also flagged in the CSV header.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2_b: f64,
    pub l2_u: f64,
    pub h1_b: f64,
    pub h2_b: f64,
    pub h3_b: f64,
    pub dissipation_h: f64,
    pub dissipation_v: f64,
    pub energy_defect: f64,
    pub div_rel_b: f64,
    pub div_rel_u: f64,
    pub crit_u_lp: f64,
    pub crit_curv_lp: f64,
    pub crit_j_linf_sq: f64,
    pub linf_j: f64,
    pub z3_residual: f64,
}

impl DiagnosticsRecord {
    pub fn csv_header() -> &'static str {
        "t,l2_b,l2_u,h1_b,h2_b,h3_b,dissipation_h,dissipation_v,energy_defect,div_rel_b,div_rel_u,crit_u_lp,crit_curv_lp,crit_j_linf_sq_bmo_surrogate,linf_j,z3_residual"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.t,
            self.l2_b,
            self.l2_u,
            self.h1_b,
            self.h2_b,
            self.h3_b,
            self.dissipation_h,
            self.dissipation_v,
            self.energy_defect,
            self.div_rel_b,
            self.div_rel_u,
            self.crit_u_lp,
            self.crit_curv_lp,
            self.crit_j_linf_sq,
            self.linf_j,
            self.z3_residual
        )
    }
}

/// L^p norm of the pointwise magnitude of a set of scalars (collocation
/// quadrature on a refined grid; p = inf gives the max).
fn magnitude_lp(fields: &[&SpectralScalar], p: f64) -> f64 {
    if fields.is_empty() {
        return 0.0;
    }
    let grid = fields[0].grid();
    let dims: Vec<usize> = grid
        .dims()
        .iter()
        .zip(grid.band())
        .map(|(&n, &b)| (2 * n).max(2 * b + 2).next_power_of_two())
        .collect();
    let phys: Vec<_> = fields.iter().map(|f| f.to_physical_on(&dims)).collect();
    let n = phys[0].len();
    let mut acc = 0.0f64;
    let mut mx = 0.0f64;
    for i in 0..n {
        let mut s = 0.0;
        for ph in &phys {
            let v = ph.as_slice().unwrap()[i];
            s += v * v;
        }
        if p.is_infinite() {
            mx = mx.max(s);
        } else {
            acc += s.powf(p / 2.0);
        }
    }
    if p.is_infinite() {
        mx.sqrt()
    } else {
        (grid.volume() * acc / n as f64).powf(1.0 / p)
    }
}

pub fn record(state: &SimState, spec: &ModelSpec, crit: &CritConfig) -> DiagnosticsRecord {
    let b = &state.b;
    let exps = spec.b_exponents();
    let j = b.current_density();
    let linf_j = j.linf();

    let crit_u_lp = match &state.u {
        Some(u) => magnitude_lp(&[u.comp(1), u.comp(2)], crit.p_u).powf(crit.r_u),
        None => 0.0,
    };
    let curv: Vec<SpectralScalar> = {
        let mut v = Vec::new();
        for c in 1..=2 {
            for d in [[2, 0, 0], [1, 1, 0], [0, 2, 0], [1, 1, 0]] {
                // the [1,1] entry appears twice: ordered index pairs
                v.push(b.comp(c).derivative_multi(&d));
            }
        }
        v
    };
    let curv_refs: Vec<&SpectralScalar> = curv.iter().collect();
    let crit_curv_lp = magnitude_lp(&curv_refs, crit.p_b).powf(crit.r_b);

    let z3 = match (spec.system, &state.u) {
        (System::HallmhdMixed, Some(u)) => {
            z3_residual(u, b, spec.alpha, spec.eps).unwrap_or(f64::NAN)
        }
        _ => 0.0,
    };

    DiagnosticsRecord {
        t: state.t,
        l2_b: b.l2_norm(),
        l2_u: state.u.as_ref().map_or(0.0, |u| u.l2_norm()),
        h1_b: b.sobolev_seminorm(1.0),
        h2_b: b.sobolev_seminorm(2.0),
        h3_b: b.sobolev_seminorm(3.0),
        dissipation_h: b.comp(1).sobolev_seminorm(exps[0] / 2.0).powi(2)
            + b.comp(2).sobolev_seminorm(exps[1] / 2.0).powi(2),
        dissipation_v: b.comp(3).sobolev_seminorm(exps[2] / 2.0).powi(2),
        energy_defect: state.energy_defect(),
        div_rel_b: b.div_residual_rel(),
        div_rel_u: state.u.as_ref().map_or(0.0, |u| u.div_residual_rel()),
        crit_u_lp,
        crit_curv_lp,
        crit_j_linf_sq: linf_j * linf_j,
        linf_j,
        z3_residual: z3,
    }
}

/// Relative disagreement between two assemblies of the tendency of
/// z3 = omega3 + b3: component-wise (vorticity equation plus the vertical
/// magnetic equation, Hall terms entering separately) versus the combined
/// equation in which the Hall contribution appears only through the factor
/// (1 - eps).  Both are full tendencies including dissipation.
pub fn z3_residual(u: &VectorField, b: &VectorField, alpha: f64, eps: f64) -> Result<f64> {
    if b.grid().dim() != 2 {
        return Err(HmhdError::invalid("z3_residual expects 2-D fields"));
    }
    let omega3 = {
        let mut w = u.comp(2).partial_derivative(1);
        w.add_scaled(&u.comp(1).partial_derivative(2), -1.0);
        w
    };
    let hall3 = {
        let h = hall_term(b);
        h.comp(3).clone()
    };
    let bgradu3 = {
        // (b . grad u)_3 on the exact product grid, truncated to the state band
        let adv = crate::nonlinear::advect(b, u);
        adv.comp(3).clone()
    };

    // component-wise: vorticity equation + vertical magnetic equation
    let mut a1 = advect_scalar(u, &omega3).scaled(-1.0);
    a1.add_scaled(&omega3.fractional_laplacian(2.0 * alpha), -1.0);
    a1.add_scaled(&hall3, 1.0);
    a1.add_scaled(&advect_scalar(u, b.comp(3)), -1.0);
    a1.add_scaled(&hall3, -eps);
    a1.add_scaled(&b.comp(3).fractional_laplacian(2.0 * alpha), -1.0);
    a1.add_scaled(&bgradu3, 1.0);

    // combined: single advection and dissipation of z3
    let mut z3 = omega3.clone();
    z3.add_scaled(b.comp(3), 1.0);
    let mut a2 = advect_scalar(u, &z3).scaled(-1.0);
    a2.add_scaled(&z3.fractional_laplacian(2.0 * alpha), -1.0);
    a2.add_scaled(&bgradu3, 1.0);
    a2.add_scaled(&hall3, 1.0 - eps);

    let mut diff = a1.clone();
    diff.add_scaled(&a2, -1.0);
    let scale = a1.l2_norm().max(a2.l2_norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(diff.l2_norm() / scale)
}

/// Relative disagreement between the curl of the assembled velocity tendency
/// and the directly assembled vorticity tendency (both including
/// dissipation with exponent 2 alpha on omega3).
pub fn omega3_consistency_residual(
    u: &VectorField,
    b: &VectorField,
    spec: &ModelSpec,
) -> Result<f64> {
    let (_, du) = crate::evolve::nonlinear_rhs(spec, b, Some(u))?;
    let du = du.ok_or_else(|| HmhdError::invalid("system has no velocity tendency"))?;
    let omega3 = {
        let mut w = u.comp(2).partial_derivative(1);
        w.add_scaled(&u.comp(1).partial_derivative(2), -1.0);
        w
    };
    let mut lhs = du.comp(2).partial_derivative(1);
    lhs.add_scaled(&du.comp(1).partial_derivative(2), -1.0);
    lhs.add_scaled(&omega3.fractional_laplacian(2.0 * spec.alpha), -1.0);
    let rhs = omega3_rhs(u, b, spec.alpha)?;
    let mut diff = lhs.clone();
    diff.add_scaled(&rhs, -1.0);
    let scale = lhs.l2_norm().max(rhs.l2_norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(diff.l2_norm() / scale)
}

/// Integrand bound for the 2.5-D pairing, evaluated along a trajectory
/// sample (kept separate from the ledger so trajectory code does not build
/// full ledgers).
pub fn bound_sample(b: &VectorField) -> Result<f64> {
    if b.grid().dim() == 2 {
        crate::ledger::bound_functional_25d(b)
    } else {
        crate::ledger::bound_functional_3d(b, crate::ledger::BoundVariant::Solenoidal)
    }
}

/// |grad^2 b_h| magnitude helper exposed for ratio studies.
pub fn curvature_linf(b: &VectorField) -> f64 {
    let mut cache = DerivCache::refined(b);
    let g2h = grad_mag(&mut cache, &[1, 2], 2, b.grid().dim());
    g2h.iter().fold(0.0f64, |m, &v| m.max(v))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub lambda: u32,
    pub beta: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Relative L2 gap between the rescaled coarse trajectory endpoint and
    /// the rescaled-initial-data trajectory endpoint.
    pub mismatch: f64,
    /// |b_lambda(0)|^2 / |b(0)|^2 on the fixed torus.
    pub norm_ratio: f64,
    /// norm_ratio normalized per fundamental cell (divided by lambda^dim).
    pub prefactor_measured: f64,
    /// lambda^(4 beta - 4 - dim); equals 1 at the critical beta = 1 + dim/4.
    pub prefactor_predicted: f64,
}

/// Spectral implementation of b -> lambda^(2 beta - 2) b(lambda x): every
/// mode k moves to lambda k with its coefficient scaled.  Requires the grid
/// to retain band lambda * K.
pub fn rescale_field(b: &VectorField, lambda: u32, beta: f64) -> Result<VectorField> {
    if lambda == 0 {
        return Err(HmhdError::invalid("lambda must be a positive integer"));
    }
    let l = lambda as usize;
    let g = b.grid();
    let new_band: Vec<usize> = g.band().iter().map(|&k| k * l).collect();
    let gnew = g.with_band(new_band).map_err(|_| {
        HmhdError::invalid(format!(
            "grid cannot hold the rescaled band (lambda {lambda} times band {:?} exceeds the Nyquist limit)",
            g.band()
        ))
    })?;
    let amp = (lambda as f64).powf(2.0 * beta - 2.0);
    let mut comps = Vec::with_capacity(3);
    for c in 1..=3 {
        let src = b.comp(c);
        let mut dst = SpectralScalar::zero(&gnew);
        {
            let out = dst.coeffs_mut();
            for (idx, &v) in src.coeffs().indexed_iter() {
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let mut tgt = Vec::with_capacity(g.dim());
                for a in 0..g.dim() {
                    let kf = g.freq(a, idx[a]) * l as i64;
                    let n = g.dims()[a] as i64;
                    tgt.push(if kf >= 0 { kf } else { n + kf } as usize);
                }
                out[ndarray::IxDyn(&tgt)] = v * amp;
            }
        }
        comps.push(dst);
    }
    let c3 = comps.pop().unwrap();
    let c2 = comps.pop().unwrap();
    let c1 = comps.pop().unwrap();
    Ok(VectorField::new(b.kind, [c1, c2, c3]))
}

/// Runs the same single-field model twice: once from b0 with step dt to
/// t_end, once from the rescaled data with step dt / lambda^(2 beta) to
/// t_end / lambda^(2 beta), and compares the endpoint of the second run
/// with the rescaling of the endpoint of the first.
pub fn scaling_test(
    b0: &VectorField,
    beta: f64,
    lambda: u32,
    t_end: f64,
    dt: f64,
) -> Result<ScalingReport> {
    if lambda < 2 {
        return Err(HmhdError::invalid("lambda must be an integer >= 2"));
    }
    if b0.grid().dim() != 2 {
        return Err(HmhdError::invalid("the scaling study runs on 2-D grids"));
    }
    let mut spec = ModelSpec::new(System::ElectronGeneral);
    spec.beta = beta;
    spec.validate()?;

    let factor = (lambda as f64).powf(2.0 * beta);
    let b0_l = rescale_field(b0, lambda, beta)?;

    let run = |init: &VectorField, dt: f64, t_end: f64| -> Result<VectorField> {
        let mut cfg = StepperConfig::new(t_end);
        cfg.dt = DtMode::Fixed(dt);
        cfg.scheme = Scheme::IfRk4;
        let mut st = SimState::new(init.clone(), None);
        let mut stepper = Stepper::new(spec, cfg, init.grid())?;
        stepper.run(&mut st, |_| Ok(()))?;
        Ok(st.b)
    };

    let a_end = run(b0, dt, t_end)?;
    let b_end = run(&b0_l, dt / factor, t_end / factor)?;
    let a_end_rescaled = rescale_field(&a_end, lambda, beta)?;

    let mut diff = b_end.clone();
    diff.add_scaled(&a_end_rescaled, -1.0);
    let scale = a_end_rescaled.l2_norm().max(b_end.l2_norm());
    let mismatch = if scale == 0.0 {
        0.0
    } else {
        diff.l2_norm() / scale
    };

    let n0 = b0.l2_norm().powi(2);
    let norm_ratio = if n0 == 0.0 {
        0.0
    } else {
        b0_l.l2_norm().powi(2) / n0
    };
    let dimf = b0.grid().dim() as f64;
    let lam = lambda as f64;
    Ok(ScalingReport {
        lambda,
        beta,
        t_end,
        dt,
        mismatch,
        norm_ratio,
        prefactor_measured: norm_ratio / lam.powf(dimf),
        prefactor_predicted: lam.powf(4.0 * beta - 4.0 - dimf),
    })
}
