//! Binary state snapshots for exact restart.
//!
//! Little-endian layout: magic `HMHD`, version (u32), dim (u32), per-axis
//! sizes (u32 each), per-axis band limits (u32 each), model tag (u32),
//! alpha/beta/eps (f64), time (f64), then restart bookkeeping (nu, eta,
//! step count, last dt, accumulated dissipation, initial energy, velocity
//! flag), then the spectral coefficients of b and, if present, u: each
//! component in C row-major order as (re, im) f64 pairs.

use crate::error::{HmhdError, Result};
use crate::evolve::{ModelSpec, SimState, System};
use crate::fields::{FieldKind, VectorField};
use crate::spectral::{Grid, SpectralScalar};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"HMHD";
pub const VERSION: u32 = 1;

fn system_tag(s: System) -> u32 {
    match s {
        System::ElectronAniso => 0,
        System::ElectronGeneral => 1,
        System::HallmhdMixed => 2,
        System::HallmhdClassical => 3,
    }
}

fn system_from_tag(tag: u32) -> Result<System> {
    Ok(match tag {
        0 => System::ElectronAniso,
        1 => System::ElectronGeneral,
        2 => System::HallmhdMixed,
        3 => System::HallmhdClassical,
        other => {
            return Err(HmhdError::Snapshot(format!("unknown model tag {other}")))
        }
    })
}

struct Writer<W: Write> {
    w: W,
}

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn field(&mut self, f: &VectorField) -> Result<()> {
        for c in 1..=3 {
            for z in f.comp(c).coeffs().iter() {
                self.f64(z.re)?;
                self.f64(z.im)?;
            }
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn field(&mut self, grid: &Grid, kind: FieldKind) -> Result<VectorField> {
        let dims = grid.dims().to_vec();
        let count: usize = dims.iter().product();
        let mut comps = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let re = self.f64()?;
                let im = self.f64()?;
                data.push(Complex64::new(re, im));
            }
            let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
                .map_err(|e| HmhdError::Snapshot(e.to_string()))?;
            let mut s = SpectralScalar::zero(grid);
            s.coeffs_mut().assign(&arr);
            comps.push(s);
        }
        let comps: [SpectralScalar; 3] = match comps.try_into() {
            Ok(c) => c,
            Err(_) => unreachable!(),
        };
        Ok(VectorField::new(kind, comps))
    }
}

pub fn write_snapshot<W: Write>(w: W, spec: &ModelSpec, state: &SimState) -> Result<()> {
    let grid = state.b.grid();
    let mut wr = Writer { w };
    wr.w.write_all(&MAGIC)?;
    wr.u32(VERSION)?;
    wr.u32(grid.dim() as u32)?;
    for &n in grid.dims() {
        wr.u32(n as u32)?;
    }
    for &k in grid.band() {
        wr.u32(k as u32)?;
    }
    wr.u32(system_tag(spec.system))?;
    wr.f64(spec.alpha)?;
    wr.f64(spec.beta)?;
    wr.f64(spec.eps)?;
    wr.f64(state.t)?;
    wr.f64(spec.nu)?;
    wr.f64(spec.eta)?;
    wr.u64(state.step_count)?;
    wr.f64(state.last_dt)?;
    wr.f64(state.diss_integral)?;
    wr.f64(state.energy0)?;
    wr.u32(state.u.is_some() as u32)?;
    wr.field(&state.b)?;
    if let Some(u) = &state.u {
        wr.field(u)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: R) -> Result<(ModelSpec, SimState)> {
    let mut rd = Reader { r };
    let mut magic = [0u8; 4];
    rd.r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(HmhdError::Snapshot("bad magic".to_string()));
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(HmhdError::Snapshot(format!(
            "unsupported version {version}"
        )));
    }
    let dim = rd.u32()? as usize;
    if !(2..=3).contains(&dim) {
        return Err(HmhdError::Snapshot(format!("bad dimension {dim}")));
    }
    let mut dims = Vec::with_capacity(dim);
    for _ in 0..dim {
        dims.push(rd.u32()? as usize);
    }
    let mut band = Vec::with_capacity(dim);
    for _ in 0..dim {
        band.push(rd.u32()? as usize);
    }
    let system = system_from_tag(rd.u32()?)?;
    let alpha = rd.f64()?;
    let beta = rd.f64()?;
    let eps = rd.f64()?;
    let t = rd.f64()?;
    let nu = rd.f64()?;
    let eta = rd.f64()?;
    let step_count = rd.u64()?;
    let last_dt = rd.f64()?;
    let diss_integral = rd.f64()?;
    let energy0 = rd.f64()?;
    let has_u = rd.u32()? != 0;

    let lengths = vec![crate::spectral::TAU; dim];
    let grid = Grid::new(dims, lengths, band)?;
    let b = rd.field(&grid, FieldKind::Magnetic)?;
    let u = if has_u {
        Some(rd.field(&grid, FieldKind::Velocity)?)
    } else {
        None
    };

    let spec = ModelSpec {
        system,
        eps,
        alpha,
        beta,
        nu,
        eta,
    };
    let state = SimState {
        t,
        b,
        u,
        step_count,
        last_dt,
        diss_integral,
        energy0,
    };
    Ok((spec, state))
}

pub fn save(path: &Path, spec: &ModelSpec, state: &SimState) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(f);
    write_snapshot(&mut buf, spec, state)?;
    use std::io::Write as _;
    buf.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ModelSpec, SimState)> {
    let f = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(f))
}
