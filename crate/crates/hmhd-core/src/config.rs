//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! Unknown and duplicate keys are rejected by name; `parse` and `to_text`
//! round-trip.

use crate::error::{HmhdError, Result};
use crate::evolve::{DtMode, Scheme, System};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub band: usize,
    pub system: System,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub nu: f64,
    pub eta: f64,
    pub seed: u64,
    pub k_max: usize,
    pub slope: f64,
    /// b is rescaled so its homogeneous H^3 norm equals this (0 disables).
    pub amplitude_h3: f64,
    pub u_seed: u64,
    /// u is rescaled so its L^2 norm equals this (0 disables).
    pub u_amplitude_l2: f64,
    pub dt_mode: String,
    pub dt: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub stride: usize,
    pub h3_ceiling: f64,
    pub out_dir: String,
    pub snapshot_stride: usize,
    pub crit_p_u: f64,
    pub crit_r_u: f64,
    pub crit_p_b: f64,
    pub crit_r_b: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 64,
            band: 31,
            system: System::ElectronAniso,
            alpha: 0.6,
            beta: 1.5,
            eps: 1.0,
            nu: 1.0,
            eta: 1.0,
            seed: 1,
            k_max: 8,
            slope: 2.0,
            amplitude_h3: 1.0,
            u_seed: 2,
            u_amplitude_l2: 1.0,
            dt_mode: "fixed".to_string(),
            dt: 1e-3,
            cfl: 0.25,
            scheme: Scheme::IfRk4,
            t_end: 1.0,
            stride: 10,
            h3_ceiling: crate::tolerances::H3_CEILING,
            out_dir: "out".to_string(),
            snapshot_stride: 100,
            crit_p_u: 6.0,
            crit_r_u: 4.0,
            crit_p_b: 2.0,
            crit_r_b: 4.0,
        }
    }
}

/// Every recognized key with a short description, in canonical order.
pub const KEY_DOCS: &[(&str, &str)] = &[
    ("grid.n", "per-axis grid size (even, >= 4)"),
    ("grid.band", "retained band limit per axis (default n/2 - 1)"),
    (
        "model.system",
        "electron_aniso | electron_general | hallmhd_mixed | hallmhd_classical",
    ),
    ("model.alpha", "vertical/mixed dissipation exponent parameter"),
    ("model.beta", "uniform dissipation exponent parameter (electron_general)"),
    ("model.eps", "Hall coefficient"),
    ("model.nu", "velocity dissipation coefficient"),
    ("model.eta", "magnetic dissipation coefficient"),
    ("init.seed", "seed for the random divergence-free b"),
    ("init.k_max", "largest excited wavenumber of the initial data"),
    ("init.slope", "spectral decay exponent of the initial data"),
    ("init.amplitude_h3", "rescale b so |b|_{H^3} equals this (0 = keep)"),
    ("init.u_seed", "seed for the random divergence-free u (velocity systems)"),
    ("init.u_amplitude_l2", "rescale u so |u|_{L^2} equals this (0 = keep)"),
    ("step.dt_mode", "fixed | adaptive"),
    ("step.dt", "time step for fixed mode"),
    ("step.cfl", "CFL number for adaptive mode"),
    ("step.scheme", "if_rk4 | if_rk2"),
    ("step.t_end", "final time"),
    ("step.stride", "diagnostics every this many steps"),
    ("step.h3_ceiling", "abort when |b|_{H^3} exceeds this"),
    ("output.dir", "output directory (created if missing)"),
    ("output.snapshot_stride", "snapshot every this many steps"),
    ("crit.p_u", "Lebesgue exponent for the velocity criterion integrand"),
    ("crit.r_u", "time exponent for the velocity criterion integrand"),
    ("crit.p_b", "Lebesgue exponent for the curvature criterion integrand"),
    ("crit.r_b", "time exponent for the curvature criterion integrand"),
];

fn parse_num<T: std::str::FromStr>(key: &str, val: &str) -> Result<T> {
    val.parse().map_err(|_| {
        HmhdError::config(format!("key `{key}`: cannot parse value `{val}`"))
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut band_given = false;
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| {
                HmhdError::config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let val = val.trim();
            if seen.iter().any(|k| k == key) {
                return Err(HmhdError::config(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            match key {
                "grid.n" => cfg.n = parse_num(key, val)?,
                "grid.band" => {
                    cfg.band = parse_num(key, val)?;
                    band_given = true;
                }
                "model.system" => cfg.system = System::parse(val)?,
                "model.alpha" => cfg.alpha = parse_num(key, val)?,
                "model.beta" => cfg.beta = parse_num(key, val)?,
                "model.eps" => cfg.eps = parse_num(key, val)?,
                "model.nu" => cfg.nu = parse_num(key, val)?,
                "model.eta" => cfg.eta = parse_num(key, val)?,
                "init.seed" => cfg.seed = parse_num(key, val)?,
                "init.k_max" => cfg.k_max = parse_num(key, val)?,
                "init.slope" => cfg.slope = parse_num(key, val)?,
                "init.amplitude_h3" => cfg.amplitude_h3 = parse_num(key, val)?,
                "init.u_seed" => cfg.u_seed = parse_num(key, val)?,
                "init.u_amplitude_l2" => cfg.u_amplitude_l2 = parse_num(key, val)?,
                "step.dt_mode" => {
                    if val != "fixed" && val != "adaptive" {
                        return Err(HmhdError::config(format!(
                            "key `step.dt_mode`: expected fixed or adaptive, got `{val}`"
                        )));
                    }
                    cfg.dt_mode = val.to_string();
                }
                "step.dt" => cfg.dt = parse_num(key, val)?,
                "step.cfl" => cfg.cfl = parse_num(key, val)?,
                "step.scheme" => cfg.scheme = Scheme::parse(val)?,
                "step.t_end" => cfg.t_end = parse_num(key, val)?,
                "step.stride" => cfg.stride = parse_num(key, val)?,
                "step.h3_ceiling" => cfg.h3_ceiling = parse_num(key, val)?,
                "output.dir" => cfg.out_dir = val.to_string(),
                "output.snapshot_stride" => cfg.snapshot_stride = parse_num(key, val)?,
                "crit.p_u" => cfg.crit_p_u = parse_num(key, val)?,
                "crit.r_u" => cfg.crit_r_u = parse_num(key, val)?,
                "crit.p_b" => cfg.crit_p_b = parse_num(key, val)?,
                "crit.r_b" => cfg.crit_r_b = parse_num(key, val)?,
                other => {
                    return Err(HmhdError::config(format!("unknown key `{other}`")));
                }
            }
        }
        if !band_given {
            cfg.band = cfg.n / 2 - 1;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(HmhdError::config(format!(
                "grid.n must be even and >= 4, got {}",
                self.n
            )));
        }
        if self.band > self.n / 2 - 1 {
            return Err(HmhdError::config(format!(
                "grid.band {} exceeds the limit {} for n = {}",
                self.band,
                self.n / 2 - 1,
                self.n
            )));
        }
        if self.k_max > self.band {
            return Err(HmhdError::config(format!(
                "init.k_max {} exceeds grid.band {}",
                self.k_max, self.band
            )));
        }
        if self.dt_mode == "fixed" && (self.dt <= 0.0 || !self.dt.is_finite()) {
            return Err(HmhdError::config("step.dt must be positive and finite"));
        }
        Ok(())
    }

    pub fn dt_mode(&self) -> DtMode {
        if self.dt_mode == "adaptive" {
            DtMode::Adaptive
        } else {
            DtMode::Fixed(self.dt)
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("grid.n", self.n.to_string());
        push("grid.band", self.band.to_string());
        push("model.system", self.system.name().to_string());
        push("model.alpha", fmt_f64(self.alpha));
        push("model.beta", fmt_f64(self.beta));
        push("model.eps", fmt_f64(self.eps));
        push("model.nu", fmt_f64(self.nu));
        push("model.eta", fmt_f64(self.eta));
        push("init.seed", self.seed.to_string());
        push("init.k_max", self.k_max.to_string());
        push("init.slope", fmt_f64(self.slope));
        push("init.amplitude_h3", fmt_f64(self.amplitude_h3));
        push("init.u_seed", self.u_seed.to_string());
        push("init.u_amplitude_l2", fmt_f64(self.u_amplitude_l2));
        push("step.dt_mode", self.dt_mode.clone());
        push("step.dt", fmt_f64(self.dt));
        push("step.cfl", fmt_f64(self.cfl));
        push(
            "step.scheme",
            match self.scheme {
                Scheme::IfRk4 => "if_rk4".to_string(),
                Scheme::IfRk2 => "if_rk2".to_string(),
            },
        );
        push("step.t_end", fmt_f64(self.t_end));
        push("step.stride", self.stride.to_string());
        push("step.h3_ceiling", fmt_f64(self.h3_ceiling));
        push("output.dir", self.out_dir.clone());
        push("output.snapshot_stride", self.snapshot_stride.to_string());
        push("crit.p_u", fmt_f64(self.crit_p_u));
        push("crit.r_u", fmt_f64(self.crit_r_u));
        push("crit.p_b", fmt_f64(self.crit_p_b));
        push("crit.r_b", fmt_f64(self.crit_r_b));
        s
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that parses back to the same bits
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().unwrap(), v);
    s
}
