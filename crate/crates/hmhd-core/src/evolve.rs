//! Time integration of the 2.5-D systems with an integrating factor for the
//! (possibly fractional, possibly anisotropic) dissipation.
//!
//! The linear part is applied exactly through decay multipliers
//! exp(-coef |xi|^p h); only non-positive exponents ever enter an exp call.
//! Nonlinear terms are evaluated on padded grids so that all retained modes
//! of every quadratic product are alias-free, which makes the advective and
//! Hall terms exactly energy-neutral in the truncated system.  The
//! dissipation integral is accumulated inside the stepper with the same
//! Runge-Kutta weights as the solution update, so the energy balance
//! N(t) + 2 int_0^t D ds = N(0) is satisfied up to time-discretization
//! error alone.

use ndarray::ArrayD;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HmhdError, Result};
use crate::fields::{FieldKind, VectorField};
use crate::spectral::{Grid, SpectralScalar};
use crate::tolerances::H3_CEILING;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// Magnetic field only; horizontal components damped by Lambda^3,
    /// vertical by Lambda^(2 alpha).
    ElectronAniso,
    /// Magnetic field only; all components damped by Lambda^(2 beta).
    ElectronGeneral,
    /// Velocity and magnetic field; u damped by (Lambda^(2 alpha),
    /// Lambda^(2 alpha), Lambda^2), b by (Lambda^3, Lambda^3,
    /// Lambda^(2 alpha)).
    HallmhdMixed,
    /// Velocity and magnetic field, classical Laplacian dissipation.
    HallmhdClassical,
}

impl System {
    pub fn parse(s: &str) -> Result<System> {
        match s {
            "electron_aniso" => Ok(System::ElectronAniso),
            "electron_general" => Ok(System::ElectronGeneral),
            "hallmhd_mixed" => Ok(System::HallmhdMixed),
            "hallmhd_classical" => Ok(System::HallmhdClassical),
            other => Err(HmhdError::config(format!(
                "unknown system `{other}` (expected electron_aniso, electron_general, hallmhd_mixed or hallmhd_classical)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            System::ElectronAniso => "electron_aniso",
            System::ElectronGeneral => "electron_general",
            System::HallmhdMixed => "hallmhd_mixed",
            System::HallmhdClassical => "hallmhd_classical",
        }
    }

    pub fn has_velocity(&self) -> bool {
        matches!(self, System::HallmhdMixed | System::HallmhdClassical)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelSpec {
    pub system: System,
    /// Hall coefficient.
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Velocity dissipation coefficient.
    pub nu: f64,
    /// Magnetic dissipation coefficient.
    pub eta: f64,
}

impl ModelSpec {
    pub fn new(system: System) -> ModelSpec {
        ModelSpec {
            system,
            eps: 1.0,
            alpha: 0.6,
            beta: 1.5,
            nu: 1.0,
            eta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("nu", self.nu),
            ("eta", self.eta),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(HmhdError::config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.eps.is_finite() {
            return Err(HmhdError::config("eps must be finite"));
        }
        Ok(())
    }

    /// Non-fatal parameter advisories.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let uses_alpha = matches!(self.system, System::ElectronAniso | System::HallmhdMixed);
        if uses_alpha && (self.alpha <= 0.5 || self.alpha >= 1.0) {
            w.push(format!(
                "alpha = {} lies outside (1/2, 1); runs remain well defined but leave the weakly damped regime of interest",
                self.alpha
            ));
        }
        w
    }

    /// Dissipation multiplier exponents p (Lambda^p) for the b components.
    pub fn b_exponents(&self) -> [f64; 3] {
        match self.system {
            System::ElectronAniso | System::HallmhdMixed => [3.0, 3.0, 2.0 * self.alpha],
            System::ElectronGeneral => [2.0 * self.beta; 3],
            System::HallmhdClassical => [2.0; 3],
        }
    }

    /// Dissipation multiplier exponents for the u components, if present.
    pub fn u_exponents(&self) -> Option<[f64; 3]> {
        match self.system {
            System::HallmhdMixed => Some([2.0 * self.alpha, 2.0 * self.alpha, 2.0]),
            System::HallmhdClassical => Some([2.0; 3]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtMode {
    Fixed(f64),
    /// dt = cfl / (max|u| K + max|grad b| K^2), K the largest retained
    /// wavenumber.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    IfRk4,
    IfRk2,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "if_rk4" => Ok(Scheme::IfRk4),
            "if_rk2" => Ok(Scheme::IfRk2),
            other => Err(HmhdError::config(format!(
                "unknown scheme `{other}` (expected if_rk4 or if_rk2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepperConfig {
    pub dt: DtMode,
    pub cfl: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    /// Diagnostics are emitted every this many steps (and at t = 0 and
    /// t_end).
    pub diagnostics_stride: usize,
    /// A run aborts when the homogeneous H^3 norm of b exceeds this.
    pub h3_ceiling: f64,
}

impl StepperConfig {
    pub fn new(t_end: f64) -> StepperConfig {
        StepperConfig {
            dt: DtMode::Adaptive,
            cfl: 0.25,
            scheme: Scheme::IfRk4,
            t_end,
            diagnostics_stride: 10,
            h3_ceiling: H3_CEILING,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub b: VectorField,
    pub u: Option<VectorField>,
    pub step_count: u64,
    pub last_dt: f64,
    /// Accumulated dissipation integral int_0^t D ds.
    pub diss_integral: f64,
    /// N(0) = |u(0)|^2 + |b(0)|^2.
    pub energy0: f64,
}

impl SimState {
    pub fn new(b: VectorField, u: Option<VectorField>) -> SimState {
        let energy0 = energy(&b, u.as_ref());
        SimState {
            t: 0.0,
            b,
            u,
            step_count: 0,
            last_dt: 0.0,
            diss_integral: 0.0,
            energy0,
        }
    }

    pub fn energy(&self) -> f64 {
        energy(&self.b, self.u.as_ref())
    }

    /// Relative defect of the energy balance N(t) + 2 int D = N(0).
    pub fn energy_defect(&self) -> f64 {
        if self.energy0 == 0.0 {
            return 0.0;
        }
        ((self.energy() + 2.0 * self.diss_integral - self.energy0) / self.energy0).abs()
    }
}

pub fn energy(b: &VectorField, u: Option<&VectorField>) -> f64 {
    let mut e = b.l2_norm().powi(2);
    if let Some(u) = u {
        e += u.l2_norm().powi(2);
    }
    e
}

/// Flat view of the evolved components: b1 b2 b3 [u1 u2 u3].
struct Pack {
    b: VectorField,
    u: Option<VectorField>,
}

impl Pack {
    fn comps(&self) -> Vec<&SpectralScalar> {
        let mut v: Vec<&SpectralScalar> = self.b.comps().iter().collect();
        if let Some(u) = &self.u {
            v.extend(u.comps().iter());
        }
        v
    }

    fn comps_mut(&mut self) -> Vec<&mut SpectralScalar> {
        let mut v: Vec<&mut SpectralScalar> = self.b.comps_mut().iter_mut().collect();
        if let Some(u) = &mut self.u {
            v.extend(u.comps_mut().iter_mut());
        }
        v
    }

    fn axpy(&mut self, s: f64, other: &Pack) {
        self.b.add_scaled(&other.b, s);
        if let Some(u) = &mut self.u {
            u.add_scaled(other.u.as_ref().expect("pack shape mismatch"), s);
        }
    }

    fn decayed(&self, tables: &[ArrayD<f64>]) -> Pack {
        let mut out = self.clone();
        for (f, t) in out.comps_mut().into_iter().zip(tables) {
            let cs = f.coeffs_mut().as_slice_mut().unwrap();
            let ts = t.as_slice().unwrap();
            for i in 0..cs.len() {
                cs[i] *= ts[i];
            }
        }
        out
    }

    fn clone(&self) -> Pack {
        Pack {
            b: self.b.clone(),
            u: self.u.clone(),
        }
    }
}

/// Decay multiplier samples for one dt, per evolved component.
struct DecayTables {
    dt: f64,
    e2: Vec<ArrayD<f64>>,
    e: Vec<ArrayD<f64>>,
}

pub struct Stepper {
    spec: ModelSpec,
    cfg: StepperConfig,
    grid: Grid,
    /// |xi|^p tables per evolved component, scaled by the dissipation
    /// coefficient.
    sym: Vec<ArrayD<f64>>,
    tables: Option<DecayTables>,
    quad_dims: Vec<usize>,
}

impl Stepper {
    pub fn new(spec: ModelSpec, cfg: StepperConfig, grid: &Grid) -> Result<Stepper> {
        spec.validate()?;
        if grid.dim() != 2 {
            return Err(HmhdError::invalid(
                "time evolution is implemented on 2-D grids (2.5-D fields)",
            ));
        }
        if cfg.t_end < 0.0 || !cfg.t_end.is_finite() {
            return Err(HmhdError::config("t_end must be finite and non-negative"));
        }
        if let DtMode::Fixed(dt) = cfg.dt {
            if dt <= 0.0 || !dt.is_finite() {
                return Err(HmhdError::config("dt must be finite and positive"));
            }
        }
        if cfg.cfl <= 0.0 {
            return Err(HmhdError::config("cfl must be positive"));
        }
        let mut sym = Vec::new();
        let mut push_exps = |exps: [f64; 3], coef: f64| {
            for p in exps {
                sym.push(symbol_table(grid, p, coef));
            }
        };
        push_exps(spec.b_exponents(), spec.eta);
        if let Some(ue) = spec.u_exponents() {
            push_exps(ue, spec.nu);
        }
        let quad_dims = grid
            .band()
            .iter()
            .map(|&k| (3 * k + 1).max(2 * k + 2).max(4).next_power_of_two())
            .collect();
        Ok(Stepper {
            spec,
            cfg,
            grid: grid.clone(),
            sym,
            tables: None,
            quad_dims,
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn tables_for(&mut self, dt: f64) -> &DecayTables {
        let rebuild = match &self.tables {
            Some(t) => t.dt != dt,
            None => true,
        };
        if rebuild {
            let e2: Vec<ArrayD<f64>> = self
                .sym
                .iter()
                .map(|s| s.mapv(|v| (-v * dt / 2.0).exp()))
                .collect();
            let e = e2.iter().map(|t| t.mapv(|v| v * v)).collect();
            self.tables = Some(DecayTables { dt, e2, e });
        }
        self.tables.as_ref().unwrap()
    }

    /// Exact dissipation integral along the pure decay of `p` over one step:
    /// (N(p) - N(E p)) / 2, summed mode by mode.
    fn linear_dissipation(&self, p: &Pack, tables: &DecayTables) -> f64 {
        let vol = self.grid.volume();
        p.comps()
            .iter()
            .zip(&tables.e)
            .map(|(f, e)| {
                let cs = f.coeffs().as_slice().unwrap();
                let es = e.as_slice().unwrap();
                let mut acc = 0.0;
                for i in 0..cs.len() {
                    acc += (1.0 - es[i] * es[i]) * cs[i].norm_sqr();
                }
                vol * acc / 2.0
            })
            .sum()
    }

    /// Instantaneous dissipation rate D = sum_c coef_c |Lambda^{p_c/2} f_c|^2.
    fn diss_rate(&self, p: &Pack) -> f64 {
        let vol = self.grid.volume();
        p.comps()
            .iter()
            .zip(&self.sym)
            .map(|(f, s)| {
                let cs = f.coeffs().as_slice().unwrap();
                let ss = s.as_slice().unwrap();
                let mut acc = 0.0;
                for i in 0..cs.len() {
                    acc += ss[i] * cs[i].norm_sqr();
                }
                vol * acc
            })
            .sum()
    }

    fn rhs(&self, p: &Pack) -> Pack {
        let db;
        let du;
        match &p.u {
            None => {
                db = electron_rhs(&p.b, self.spec.eps, &self.quad_dims);
                du = None;
            }
            Some(u) => {
                let (ddu, ddb) = hallmhd_rhs(u, &p.b, self.spec.eps, &self.quad_dims);
                db = ddb;
                du = Some(ddu);
            }
        }
        let mut out = Pack { b: db, u: du };
        for f in out.comps_mut() {
            let zero = vec![0usize; f.grid().dim()];
            f.coeffs_mut()[ndarray::IxDyn(&zero)] = num_complex::Complex64::new(0.0, 0.0);
        }
        out
    }

    fn choose_dt(&self, state: &SimState) -> Result<f64> {
        let remaining = self.cfg.t_end - state.t;
        let dt = match self.cfg.dt {
            DtMode::Fixed(dt) => dt,
            DtMode::Adaptive => {
                let k = self.grid.max_band() as f64;
                let mut speed = state.b.grad_linf() * k * k;
                if let Some(u) = &state.u {
                    speed += u.linf() * k;
                }
                if speed <= 0.0 {
                    remaining
                } else {
                    self.cfg.cfl / speed
                }
            }
        };
        let dt = dt.min(remaining);
        if dt <= 1e-12 {
            return Err(HmhdError::Blowup {
                t: state.t,
                what: format!("time step collapsed to {dt:.3e}"),
            });
        }
        Ok(dt)
    }

    /// Advances one step; returns the dt taken.
    pub fn step(&mut self, state: &mut SimState) -> Result<f64> {
        let h = self.choose_dt(state)?;
        self.tables_for(h);
        let scheme = self.cfg.scheme;
        let tables = self.tables.as_ref().unwrap();
        let v0 = Pack {
            b: state.b.clone(),
            u: state.u.clone(),
        };
        // The dissipation integral is split into the closed-form integral
        // along the pure decay of v0 plus a Runge-Kutta quadrature of the
        // nonlinear correction D(stage) - D(decayed v0).  The correction
        // integrand is smooth in the step even when the decay itself is
        // stiff, and the split is exact for pure diffusion.
        let lin = self.linear_dissipation(&v0, tables);
        let (v1, diss) = match scheme {
            Scheme::IfRk4 => {
                let n1 = self.rhs(&v0);
                let mut va = v0.clone();
                va.axpy(h / 2.0, &n1);
                let va = va.decayed(&tables.e2);
                let n2 = self.rhs(&va);
                let w_half = v0.decayed(&tables.e2);
                let d_half = self.diss_rate(&w_half);
                let mut vb = w_half;
                vb.axpy(h / 2.0, &n2);
                let n3 = self.rhs(&vb);
                let w_full = v0.decayed(&tables.e);
                let d_full = self.diss_rate(&w_full);
                let mut vc = w_full.clone();
                vc.axpy(h, &n3.decayed(&tables.e2));
                let n4 = self.rhs(&vc);
                let corr = h / 6.0
                    * (2.0 * (self.diss_rate(&va) - d_half)
                        + 2.0 * (self.diss_rate(&vb) - d_half)
                        + (self.diss_rate(&vc) - d_full));
                let mut v1 = w_full;
                v1.axpy(h / 6.0, &n1.decayed(&tables.e));
                v1.axpy(h / 3.0, &n2.decayed(&tables.e2));
                v1.axpy(h / 3.0, &n3.decayed(&tables.e2));
                v1.axpy(h / 6.0, &n4);
                (v1, lin + corr)
            }
            Scheme::IfRk2 => {
                let n1 = self.rhs(&v0);
                let mut va = v0.clone();
                va.axpy(h / 2.0, &n1);
                let va = va.decayed(&tables.e2);
                let n2 = self.rhs(&va);
                let w_half = v0.decayed(&tables.e2);
                let corr = h * (self.diss_rate(&va) - self.diss_rate(&w_half));
                let mut v1 = v0.decayed(&tables.e);
                v1.axpy(h, &n2.decayed(&tables.e2));
                (v1, lin + corr)
            }
        };
        state.b = v1.b.leray_project();
        state.u = v1.u.map(|u| u.leray_project());
        state.t += h;
        state.step_count += 1;
        state.last_dt = h;
        state.diss_integral += diss;

        if !state.b.is_finite() || state.u.as_ref().map_or(false, |u| !u.is_finite()) {
            return Err(HmhdError::Blowup {
                t: state.t,
                what: "non-finite coefficients".to_string(),
            });
        }
        let h3 = state.b.sobolev_seminorm(3.0);
        if h3 > self.cfg.h3_ceiling {
            return Err(HmhdError::Blowup {
                t: state.t,
                what: format!("H^3 norm {h3:.3e} exceeded ceiling {:.3e}", self.cfg.h3_ceiling),
            });
        }
        Ok(h)
    }

    /// Runs to t_end, invoking `on_sample` at t = 0, every
    /// `diagnostics_stride`-th step, and at the final time.
    pub fn run<F: FnMut(&SimState) -> Result<()>>(
        &mut self,
        state: &mut SimState,
        mut on_sample: F,
    ) -> Result<()> {
        if state.step_count == 0 {
            on_sample(state)?;
        }
        let stride = self.cfg.diagnostics_stride.max(1);
        while state.t < self.cfg.t_end - 1e-14 {
            self.step(state)?;
            let done = state.t >= self.cfg.t_end - 1e-14;
            if done || state.step_count % stride as u64 == 0 {
                on_sample(state)?;
            }
        }
        Ok(())
    }
}

/// Nonlinear part of the tendencies (dissipation excluded, Hall coefficient
/// applied, velocity tendency Leray-projected, zero modes cleared).
pub fn nonlinear_rhs(
    spec: &ModelSpec,
    b: &VectorField,
    u: Option<&VectorField>,
) -> Result<(VectorField, Option<VectorField>)> {
    if b.grid().dim() != 2 {
        return Err(HmhdError::invalid(
            "tendencies are implemented on 2-D grids (2.5-D fields)",
        ));
    }
    let quad_dims: Vec<usize> = b
        .grid()
        .band()
        .iter()
        .map(|&k| (3 * k + 1).max(2 * k + 2).max(4).next_power_of_two())
        .collect();
    let (mut db, mut du) = match (spec.system.has_velocity(), u) {
        (false, _) => (electron_rhs(b, spec.eps, &quad_dims), None),
        (true, Some(u)) => {
            let (du, db) = hallmhd_rhs(u, b, spec.eps, &quad_dims);
            (db, Some(du))
        }
        (true, None) => {
            return Err(HmhdError::invalid(
                "this system evolves a velocity field but none was supplied",
            ))
        }
    };
    let clear = |f: &mut VectorField| {
        for c in 1..=3 {
            let zero = vec![0usize; f.grid().dim()];
            f.comp_mut(c).coeffs_mut()[ndarray::IxDyn(&zero)] =
                num_complex::Complex64::new(0.0, 0.0);
        }
    };
    clear(&mut db);
    if let Some(du) = &mut du {
        clear(du);
    }
    Ok((db, du))
}

fn symbol_table(grid: &Grid, p: f64, coef: f64) -> ArrayD<f64> {
    let mut out = ArrayD::zeros(ndarray::IxDyn(grid.dims()));
    let dim = grid.dim();
    for (idx, v) in out.indexed_iter_mut() {
        let mut r2 = 0.0;
        for a in 0..dim {
            let xi = grid.wavenumber(a, idx[a]);
            r2 += xi * xi;
        }
        *v = if r2 == 0.0 { 0.0 } else { coef * r2.powf(p / 2.0) };
    }
    out
}

fn physical_batch(fs: Vec<SpectralScalar>, dims: &[usize]) -> Vec<ArrayD<f64>> {
    fs.par_iter().map(|f| f.to_physical_on(dims)).collect()
}

fn spectral_batch(arrays: Vec<ArrayD<f64>>, mgrid: &Grid, out: &Grid) -> Vec<SpectralScalar> {
    arrays
        .into_par_iter()
        .map(|a| {
            SpectralScalar::from_physical(mgrid, &a)
                .expect("quadrature grid shape mismatch")
                .restricted_to(out)
        })
        .collect()
}

fn quad_grid(grid: &Grid, dims: &[usize]) -> Grid {
    Grid::new(dims.to_vec(), grid.lengths().to_vec(), grid.band().to_vec())
        .expect("quadrature grid construction")
}

/// db = -eps curl(j x b), assembled with one shared set of transforms.
fn electron_rhs(b: &VectorField, eps: f64, quad_dims: &[usize]) -> VectorField {
    let grid = b.grid();
    let j = b.current_density();
    let mut inputs: Vec<SpectralScalar> = Vec::with_capacity(6);
    for c in 1..=3 {
        inputs.push(j.comp(c).clone());
    }
    for c in 1..=3 {
        inputs.push(b.comp(c).clone());
    }
    let phys = physical_batch(inputs, quad_dims);
    let n = phys[0].len();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut pz = vec![0.0; n];
    {
        let s = |i: usize| phys[i].as_slice().unwrap();
        let (j1, j2, j3, b1, b2, b3) = (s(0), s(1), s(2), s(3), s(4), s(5));
        for i in 0..n {
            px[i] = j2[i] * b3[i] - j3[i] * b2[i];
            py[i] = j3[i] * b1[i] - j1[i] * b3[i];
            pz[i] = j1[i] * b2[i] - j2[i] * b1[i];
        }
    }
    let mgrid = quad_grid(grid, quad_dims);
    let shape = ndarray::IxDyn(quad_dims);
    let arrays = vec![
        ArrayD::from_shape_vec(shape.clone(), px).unwrap(),
        ArrayD::from_shape_vec(shape.clone(), py).unwrap(),
        ArrayD::from_shape_vec(shape, pz).unwrap(),
    ];
    let mut spec = spectral_batch(arrays, &mgrid, grid);
    let p3 = spec.pop().unwrap();
    let p2 = spec.pop().unwrap();
    let p1 = spec.pop().unwrap();
    let p = VectorField::new(FieldKind::Magnetic, [p1, p2, p3]);
    p.curl().scaled(-eps)
}

/// du = P(-(u.grad)u + (b.grad)b), db = -(u.grad)b + (b.grad)u - eps curl(j x b),
/// all quadratic products formed on one shared padded grid.
fn hallmhd_rhs(u: &VectorField, b: &VectorField, eps: f64, quad_dims: &[usize]) -> (VectorField, VectorField) {
    let grid = b.grid();
    let j = b.current_density();
    // transforms: u (3), b (3), d_k u (6), d_k b (6), j (3)
    let mut inputs: Vec<SpectralScalar> = Vec::with_capacity(21);
    for c in 1..=3 {
        inputs.push(u.comp(c).clone());
    }
    for c in 1..=3 {
        inputs.push(b.comp(c).clone());
    }
    for k in 1..=2 {
        for c in 1..=3 {
            inputs.push(u.comp(c).partial_derivative(k));
        }
    }
    for k in 1..=2 {
        for c in 1..=3 {
            inputs.push(b.comp(c).partial_derivative(k));
        }
    }
    for c in 1..=3 {
        inputs.push(j.comp(c).clone());
    }
    let phys = physical_batch(inputs, quad_dims);
    let n = phys[0].len();
    let s = |i: usize| phys[i].as_slice().unwrap();
    let up = [s(0), s(1), s(2)];
    let bp = [s(3), s(4), s(5)];
    let du_ = [[s(6), s(7), s(8)], [s(9), s(10), s(11)]]; // du_[k-1][c-1] = d_k u_c
    let db_ = [[s(12), s(13), s(14)], [s(15), s(16), s(17)]];
    let jp = [s(18), s(19), s(20)];

    let mut out: Vec<Vec<f64>> = (0..9).map(|_| vec![0.0; n]).collect();
    for i in 0..n {
        for c in 0..3 {
            let adv_uu = up[0][i] * du_[0][c][i] + up[1][i] * du_[1][c][i];
            let adv_bb = bp[0][i] * db_[0][c][i] + bp[1][i] * db_[1][c][i];
            let adv_ub = up[0][i] * db_[0][c][i] + up[1][i] * db_[1][c][i];
            let adv_bu = bp[0][i] * du_[0][c][i] + bp[1][i] * du_[1][c][i];
            out[c][i] = -adv_uu + adv_bb;
            out[3 + c][i] = -adv_ub + adv_bu;
        }
        out[6][i] = jp[1][i] * bp[2][i] - jp[2][i] * bp[1][i];
        out[7][i] = jp[2][i] * bp[0][i] - jp[0][i] * bp[2][i];
        out[8][i] = jp[0][i] * bp[1][i] - jp[1][i] * bp[0][i];
    }
    drop(phys);
    let mgrid = quad_grid(grid, quad_dims);
    let shape = ndarray::IxDyn(quad_dims);
    let arrays: Vec<ArrayD<f64>> = out
        .into_iter()
        .map(|v| ArrayD::from_shape_vec(shape.clone(), v).unwrap())
        .collect();
    let mut spec = spectral_batch(arrays, &mgrid, grid);
    let hall3 = spec.pop().unwrap();
    let hall2 = spec.pop().unwrap();
    let hall1 = spec.pop().unwrap();
    let dbt3 = spec.pop().unwrap();
    let dbt2 = spec.pop().unwrap();
    let dbt1 = spec.pop().unwrap();
    let dut3 = spec.pop().unwrap();
    let dut2 = spec.pop().unwrap();
    let dut1 = spec.pop().unwrap();

    let du = VectorField::new(FieldKind::Velocity, [dut1, dut2, dut3]).leray_project();
    let mut db = VectorField::new(FieldKind::Magnetic, [dbt1, dbt2, dbt3]);
    let hall = VectorField::new(FieldKind::Magnetic, [hall1, hall2, hall3]).curl();
    db.add_scaled(&hall, -eps);
    (du, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_divfree;
    use crate::spectral::Grid;
    use num_complex::Complex64;

    fn single_mode_b(grid: &Grid) -> VectorField {
        // b = (0, 0, cos x1): divergence-free, j = (0, sin x1, 0)
        let b3 = SpectralScalar::from_modes(grid, &[(vec![1, 0], Complex64::new(0.5, 0.0))]).unwrap();
        VectorField::new(
            FieldKind::Magnetic,
            [SpectralScalar::zero(grid), SpectralScalar::zero(grid), b3],
        )
    }

    #[test]
    fn pure_diffusion_decays_exactly() {
        let g = Grid::new_square(2, 16, 4).unwrap();
        let b = single_mode_b(&g);
        let mut spec = ModelSpec::new(System::ElectronGeneral);
        spec.beta = 1.0; // Laplacian; |xi| = 1 so decay rate is exactly 1
        spec.eps = 0.0;
        let mut cfg = StepperConfig::new(1.0);
        cfg.dt = DtMode::Fixed(0.25);
        let mut st = SimState::new(b.scaled(1.0), None);
        let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
        stepper.run(&mut st, |_| Ok(())).unwrap();
        let expect = 0.5 * (-1.0f64).exp();
        let got = st.b.comp(3).coeff(&[1, 0]).re;
        assert!((got - expect).abs() < 1e-14, "got {got}, expect {expect}");
        assert!(st.energy_defect() < 1e-13);
    }

    #[test]
    fn electron_run_conserves_energy_budget() {
        let g = Grid::new_square(2, 32, 8).unwrap();
        let b = random_divfree(&g, 3, 6, 2.0).unwrap();
        let b = b.scaled(0.2 / b.l2_norm());
        let mut spec = ModelSpec::new(System::ElectronAniso);
        spec.alpha = 0.6;
        let mut cfg = StepperConfig::new(0.2);
        cfg.dt = DtMode::Fixed(2e-3);
        let mut st = SimState::new(b, None);
        let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
        stepper.run(&mut st, |_| Ok(())).unwrap();
        assert!(st.energy_defect() < 1e-9, "defect {}", st.energy_defect());
        assert!(st.b.div_residual_rel() < 1e-11);
    }

    #[test]
    fn hallmhd_run_conserves_energy_budget() {
        let g = Grid::new_square(2, 32, 8).unwrap();
        let b = random_divfree(&g, 4, 6, 2.0).unwrap();
        let b = b.scaled(0.2 / b.l2_norm());
        let u = random_divfree(&g, 5, 6, 2.0).unwrap();
        let u = u.scaled(0.2 / u.l2_norm());
        let mut spec = ModelSpec::new(System::HallmhdMixed);
        spec.alpha = 0.6;
        let mut cfg = StepperConfig::new(0.2);
        cfg.dt = DtMode::Fixed(2e-3);
        let mut st = SimState::new(b, Some(u));
        let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
        stepper.run(&mut st, |_| Ok(())).unwrap();
        assert!(st.energy_defect() < 1e-9, "defect {}", st.energy_defect());
        assert!(st.b.div_residual_rel() < 1e-11);
        assert!(st.u.as_ref().unwrap().div_residual_rel() < 1e-11);
    }

    #[test]
    fn mean_mode_is_conserved() {
        let g = Grid::new_square(2, 16, 4).unwrap();
        let mut b = random_divfree(&g, 7, 3, 2.0).unwrap();
        // a mean magnetic field is admissible and must be conserved exactly
        b.comp_mut(3).coeffs_mut()[ndarray::IxDyn(&[0, 0])] = Complex64::new(0.37, 0.0);
        let spec = ModelSpec::new(System::ElectronAniso);
        let mut cfg = StepperConfig::new(0.05);
        cfg.dt = DtMode::Fixed(1e-2);
        let mut st = SimState::new(b, None);
        let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
        stepper.run(&mut st, |_| Ok(())).unwrap();
        let m = st.b.comp(3).coeff(&[0, 0]);
        assert_eq!(m, Complex64::new(0.37, 0.0));
    }

    #[test]
    fn adaptive_dt_reaches_t_end() {
        let g = Grid::new_square(2, 16, 4).unwrap();
        let b = random_divfree(&g, 8, 3, 2.0).unwrap();
        let spec = ModelSpec::new(System::ElectronAniso);
        let cfg = StepperConfig::new(0.01);
        let mut st = SimState::new(b, None);
        let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
        stepper.run(&mut st, |_| Ok(())).unwrap();
        assert!((st.t - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rk4_halving_ratio_is_fourth_order() {
        let g = Grid::new_square(2, 32, 6).unwrap();
        let b = random_divfree(&g, 11, 5, 1.5).unwrap();
        let b = b.scaled(0.5 / b.l2_norm());
        let mut spec = ModelSpec::new(System::ElectronAniso);
        spec.alpha = 0.6;
        let run = |dt: f64| {
            let mut cfg = StepperConfig::new(0.1);
            cfg.dt = DtMode::Fixed(dt);
            let mut st = SimState::new(b.scaled(1.0), None);
            let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
            stepper.run(&mut st, |_| Ok(())).unwrap();
            st.b
        };
        let c = run(2e-3);
        let m = run(1e-3);
        let f = run(5e-4);
        let diff = |a: &VectorField, b: &VectorField| {
            let mut x = a.scaled(1.0);
            x.add_scaled(b, -1.0);
            x.l2_norm()
        };
        let e1 = diff(&c, &m);
        let e2 = diff(&m, &f);
        let ratio = e1 / e2;
        assert!(
            (12.8..=19.2).contains(&ratio),
            "ratio {ratio} (e1 {e1:.3e}, e2 {e2:.3e})"
        );
    }

    #[test]
    fn blowup_is_reported_with_time() {
        let g = Grid::new_square(2, 16, 4).unwrap();
        let b = random_divfree(&g, 9, 3, 2.0).unwrap();
        let spec = ModelSpec::new(System::ElectronAniso);
        let mut cfg = StepperConfig::new(1.0);
        cfg.dt = DtMode::Fixed(1e-2);
        cfg.h3_ceiling = 1e-12; // force the ceiling immediately
        let mut st = SimState::new(b, None);
        let mut stepper = Stepper::new(spec, cfg, &g).unwrap();
        let err = stepper.run(&mut st, |_| Ok(())).unwrap_err();
        match err {
            HmhdError::Blowup { t, .. } => assert!(t > 0.0),
            other => panic!("expected blow-up, got {other}"),
        }
    }
}
