//! Fourier representation of periodic scalar fields on the 2- and 3-torus.
//!
//! Coefficients follow the convention f(x) = sum_k c_k exp(i k.x) with signed
//! integer wavenumbers; index m on an axis of n points maps to the frequency
//! m for m <= n/2 and m - n otherwise.  Real fields are kept Hermitian and
//! Nyquist modes are identically zero (the per-axis band limit is at most
//! n/2 - 1).  Products are evaluated on grids large enough that every
//! retained mode of the result is alias-free.

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{HmhdError, Result};

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

fn fft_plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let key = (n, matches!(dir, FftDirection::Forward));
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, dir))
        .clone()
}

fn fft_along(data: &mut ArrayD<Complex64>, axis: usize, dir: FftDirection) {
    let n = data.shape()[axis];
    let fft = fft_plan(n, dir);
    let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
    let mut lane_buf = vec![Complex64::ZERO; n];
    for mut lane in data.lanes_mut(Axis(axis)) {
        if let Some(slice) = lane.as_slice_mut() {
            fft.process_with_scratch(slice, &mut scratch);
        } else {
            for (dst, src) in lane_buf.iter_mut().zip(lane.iter()) {
                *dst = *src;
            }
            fft.process_with_scratch(&mut lane_buf, &mut scratch);
            for (dst, src) in lane.iter_mut().zip(lane_buf.iter()) {
                *dst = *src;
            }
        }
    }
}

/// Discretization of a periodic box: points per axis, physical periods and
/// the per-axis band limit actually carried by fields on this grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    lengths: Vec<f64>,
    band: Vec<usize>,
}

impl Grid {
    /// Square grid with period 2*pi and a uniform band limit.
    pub fn new_square(dim: usize, n: usize, band: usize) -> Result<Grid> {
        Grid::new(vec![n; dim], vec![TAU; dim], vec![band; dim])
    }

    pub fn new(dims: Vec<usize>, lengths: Vec<f64>, band: Vec<usize>) -> Result<Grid> {
        let d = dims.len();
        if d != 2 && d != 3 {
            return Err(HmhdError::invalid(format!("dimension must be 2 or 3, got {d}")));
        }
        if lengths.len() != d || band.len() != d {
            return Err(HmhdError::invalid("dims/lengths/band size mismatch"));
        }
        for (a, &n) in dims.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(HmhdError::invalid(format!(
                    "axis {} has {} points; need an even count >= 4",
                    a + 1,
                    n
                )));
            }
            if band[a] > n / 2 - 1 {
                return Err(HmhdError::invalid(format!(
                    "band limit {} on axis {} exceeds n/2 - 1 = {}",
                    band[a],
                    a + 1,
                    n / 2 - 1
                )));
            }
            if !(lengths[a] > 0.0) {
                return Err(HmhdError::invalid("period must be positive"));
            }
        }
        Ok(Grid { dims, lengths, band })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn max_band(&self) -> usize {
        *self.band.iter().max().unwrap()
    }

    /// Product of the periods, i.e. the measure of the box.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Signed integer frequency for index `idx` on `axis` (0-based axis).
    #[inline]
    pub fn freq(&self, axis: usize, idx: usize) -> i64 {
        let n = self.dims[axis];
        if idx <= n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// Physical wavenumber component 2*pi*freq/period.
    #[inline]
    pub fn wavenumber(&self, axis: usize, idx: usize) -> f64 {
        TAU * self.freq(axis, idx) as f64 / self.lengths[axis]
    }

    /// Same discretization with a different band limit.
    pub fn with_band(&self, band: Vec<usize>) -> Result<Grid> {
        Grid::new(self.dims.clone(), self.lengths.clone(), band)
    }

    fn same_geometry(&self, other: &Grid) -> bool {
        self.dims.len() == other.dims.len() && self.lengths == other.lengths
    }
}

fn signed_freq(n: usize, idx: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

fn idx_for_freq(n: usize, f: i64) -> usize {
    if f >= 0 {
        f as usize
    } else {
        (n as i64 + f) as usize
    }
}

fn next_fft_size(req: usize) -> usize {
    req.max(4).next_power_of_two()
}

/// Band-limited periodic scalar, stored as its full complex spectrum.
#[derive(Debug, Clone)]
pub struct SpectralScalar {
    grid: Grid,
    coeffs: ArrayD<Complex64>,
}

impl SpectralScalar {
    pub fn zero(grid: &Grid) -> SpectralScalar {
        SpectralScalar {
            grid: grid.clone(),
            coeffs: ArrayD::zeros(IxDyn(grid.dims())),
        }
    }

    /// Builds a real field from the listed (frequency, coefficient) pairs by
    /// setting c(k) = v and c(-k) = conj(v) for each entry.
    pub fn from_modes(grid: &Grid, modes: &[(Vec<i64>, Complex64)]) -> Result<SpectralScalar> {
        let mut f = SpectralScalar::zero(grid);
        for (k, v) in modes {
            if k.len() != grid.dim() {
                return Err(HmhdError::invalid("mode frequency arity mismatch"));
            }
            let mut idx = Vec::with_capacity(k.len());
            let mut idx_neg = Vec::with_capacity(k.len());
            for (a, &ka) in k.iter().enumerate() {
                if ka.unsigned_abs() as usize > grid.band()[a] {
                    return Err(HmhdError::invalid(format!(
                        "mode {:?} exceeds the band limit {:?}",
                        k,
                        grid.band()
                    )));
                }
                idx.push(idx_for_freq(grid.dims()[a], ka));
                idx_neg.push(idx_for_freq(grid.dims()[a], -ka));
            }
            if idx == idx_neg {
                f.coeffs[IxDyn(&idx)] += Complex64::new(v.re, 0.0);
            } else {
                f.coeffs[IxDyn(&idx)] += *v;
                f.coeffs[IxDyn(&idx_neg)] += v.conj();
            }
        }
        Ok(f)
    }

    /// Collocation samples -> spectrum.  The input is sampled on this grid's
    /// own points; content beyond the band limit is discarded (dealiasing).
    pub fn from_physical(grid: &Grid, samples: &ArrayD<f64>) -> Result<SpectralScalar> {
        if samples.shape() != grid.dims() {
            return Err(HmhdError::invalid("sample shape does not match grid"));
        }
        let mut data = samples.mapv(|v| Complex64::new(v, 0.0));
        for a in 0..grid.dim() {
            fft_along(&mut data, a, FftDirection::Forward);
        }
        let scale = 1.0 / grid.dims().iter().product::<usize>() as f64;
        data.mapv_inplace(|v| v * scale);
        let mut f = SpectralScalar { grid: grid.clone(), coeffs: data };
        f.enforce_band();
        Ok(f)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &ArrayD<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.coeffs
    }

    /// Coefficient at the signed frequency tuple, zero outside the array.
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        assert_eq!(k.len(), self.grid.dim());
        let mut idx = Vec::with_capacity(k.len());
        for (a, &ka) in k.iter().enumerate() {
            let n = self.grid.dims()[a];
            if ka.unsigned_abs() as usize > n / 2 {
                return Complex64::ZERO;
            }
            idx.push(idx_for_freq(n, ka));
        }
        self.coeffs[IxDyn(&idx)]
    }

    /// Zeroes every coefficient beyond the grid's band limit (this includes
    /// all Nyquist planes).
    pub fn enforce_band(&mut self) {
        let grid = self.grid.clone();
        for (idx, v) in self.coeffs.indexed_iter_mut() {
            let ix = idx.slice();
            for a in 0..grid.dim() {
                let f = signed_freq(grid.dims()[a], ix[a]);
                if f.unsigned_abs() as usize > grid.band()[a] {
                    *v = Complex64::ZERO;
                    break;
                }
            }
        }
    }

    /// Largest per-axis |frequency| actually carrying a nonzero coefficient.
    pub fn content_band(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.grid.dim()];
        for (idx, v) in self.coeffs.indexed_iter() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let ix = idx.slice();
            for a in 0..self.grid.dim() {
                let f = signed_freq(self.grid.dims()[a], ix[a]).unsigned_abs() as usize;
                out[a] = out[a].max(f);
            }
        }
        out
    }

    /// Inverse transform to this grid's own collocation points.
    pub fn to_physical(&self) -> ArrayD<f64> {
        self.to_physical_on(self.grid.dims())
    }

    /// Inverse transform onto `dims` collocation points (padding or
    /// restriction by signed frequency; every axis must still hold the band).
    pub fn to_physical_on(&self, dims: &[usize]) -> ArrayD<f64> {
        assert_eq!(dims.len(), self.grid.dim());
        for a in 0..dims.len() {
            assert!(
                dims[a] >= 2 * self.grid.band()[a] + 2,
                "target axis {} too small for band {}",
                a + 1,
                self.grid.band()[a]
            );
        }
        let mut big: ArrayD<Complex64> = ArrayD::zeros(IxDyn(dims));
        let mut tgt = vec![0usize; dims.len()];
        for (idx, v) in self.coeffs.indexed_iter() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let ix = idx.slice();
            let mut ok = true;
            for a in 0..dims.len() {
                let f = signed_freq(self.grid.dims()[a], ix[a]);
                if f.unsigned_abs() as usize > self.grid.band()[a] {
                    ok = false;
                    break;
                }
                tgt[a] = idx_for_freq(dims[a], f);
            }
            if ok {
                big[IxDyn(&tgt)] = *v;
            }
        }
        for a in 0..dims.len() {
            fft_along(&mut big, a, FftDirection::Inverse);
        }
        big.mapv(|v| v.re)
    }

    /// Spectrum re-expressed on another grid: modes within the target band
    /// are copied, everything else is dropped.
    pub fn restricted_to(&self, grid: &Grid) -> SpectralScalar {
        assert!(self.grid.same_geometry(grid), "incompatible grids");
        let mut out = SpectralScalar::zero(grid);
        let mut tgt = vec![0usize; grid.dim()];
        for (idx, v) in self.coeffs.indexed_iter() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let ix = idx.slice();
            let mut ok = true;
            for a in 0..grid.dim() {
                let f = signed_freq(self.grid.dims()[a], ix[a]);
                if f.unsigned_abs() as usize > grid.band()[a] {
                    ok = false;
                    break;
                }
                tgt[a] = idx_for_freq(grid.dims()[a], f);
            }
            if ok {
                out.coeffs[IxDyn(&tgt)] = *v;
            }
        }
        out
    }

    /// Applies a diagonal Fourier multiplier m(k).
    pub fn multiplier<F: Fn(&[f64]) -> Complex64>(&self, m: F) -> SpectralScalar {
        let mut out = self.clone();
        let grid = self.grid.clone();
        let mut xi = vec![0.0f64; grid.dim()];
        for (idx, v) in out.coeffs.indexed_iter_mut() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let ix = idx.slice();
            for a in 0..grid.dim() {
                xi[a] = grid.wavenumber(a, ix[a]);
            }
            *v *= m(&xi);
        }
        out
    }

    /// d/dx_axis as the multiplier i*k_axis; `axis` is 1-based.  Axis 3 on a
    /// 2-D grid is the out-of-plane direction, along which nothing varies,
    /// so the result is identically zero.
    pub fn partial_derivative(&self, axis: usize) -> SpectralScalar {
        assert!((1..=3).contains(&axis), "axis must be 1, 2 or 3");
        if axis == 3 && self.grid.dim() == 2 {
            return SpectralScalar::zero(&self.grid);
        }
        assert!(axis <= self.grid.dim(), "axis {axis} out of range");
        let a = axis - 1;
        self.multiplier(|xi| Complex64::new(0.0, xi[a]))
    }

    /// Repeated partial derivative given per-axis orders (index 0 = axis 1).
    pub fn derivative_multi(&self, orders: &[usize; 3]) -> SpectralScalar {
        if self.grid.dim() == 2 && orders[2] > 0 {
            return SpectralScalar::zero(&self.grid);
        }
        let o = *orders;
        self.multiplier(|xi| {
            let mut m = Complex64::new(1.0, 0.0);
            for a in 0..xi.len() {
                for _ in 0..o[a] {
                    m *= Complex64::new(0.0, xi[a]);
                }
            }
            m
        })
    }

    /// Fractional Laplacian multiplier |k|^alpha; the zero mode maps to 0.
    /// The square root of minus the Laplacian corresponds to alpha = 1, so
    /// (-Laplace)^s is obtained with alpha = 2 s.
    pub fn fractional_laplacian(&self, alpha: f64) -> SpectralScalar {
        assert!(alpha >= 0.0, "fractional exponent must be nonnegative");
        self.multiplier(|xi| {
            let k2: f64 = xi.iter().map(|x| x * x).sum();
            if k2 == 0.0 {
                Complex64::ZERO
            } else {
                Complex64::new(k2.powf(alpha * 0.5), 0.0)
            }
        })
    }

    /// Laplacian (sum of unmixed second derivatives), multiplier -|k|^2.
    pub fn laplacian(&self) -> SpectralScalar {
        self.multiplier(|xi| {
            let k2: f64 = xi.iter().map(|x| x * x).sum();
            Complex64::new(-k2, 0.0)
        })
    }

    /// Integral over the box: volume times the zero-mode coefficient.
    pub fn integral(&self) -> f64 {
        let zero = vec![0i64; self.grid.dim()];
        self.grid.volume() * self.coeff(&zero).re
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.volume() * s).sqrt()
    }

    /// Homogeneous Sobolev seminorm of order `s`:
    /// (sum_k |k|^{2s} |c_k|^2 * volume)^{1/2}.  The zero mode contributes
    /// only for s = 0, where the seminorm coincides with the L2 norm.
    pub fn sobolev_seminorm(&self, s: f64) -> f64 {
        let grid = &self.grid;
        let mut acc = 0.0f64;
        for (idx, v) in self.coeffs.indexed_iter() {
            let p = v.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let ix = idx.slice();
            let mut k2 = 0.0f64;
            for a in 0..grid.dim() {
                let k = grid.wavenumber(a, ix[a]);
                k2 += k * k;
            }
            if k2 == 0.0 {
                if s == 0.0 {
                    acc += p;
                }
            } else {
                acc += k2.powf(s) * p;
            }
        }
        (grid.volume() * acc).sqrt()
    }

    /// Lebesgue norm by quadrature on a grid refined 2x per axis.  Exact for
    /// p = 2; for other p this is the documented collocation approximation
    /// (the integrand |f|^p is not band-limited).  p = infinity returns the
    /// max over the refined collocation points.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "p must be >= 1 (may be infinite)");
        let dims: Vec<usize> = self
            .grid
            .dims()
            .iter()
            .zip(self.grid.band())
            .map(|(&n, &b)| next_fft_size((2 * n).max(2 * b + 2)))
            .collect();
        let phys = self.to_physical_on(&dims);
        if p.is_infinite() {
            return phys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let npts = phys.len() as f64;
        let mean = phys.iter().map(|v| v.abs().powf(p)).sum::<f64>() / npts;
        (self.grid.volume() * mean).powf(1.0 / p)
    }

    pub fn scaled(&self, s: f64) -> SpectralScalar {
        let mut out = self.clone();
        out.coeffs.mapv_inplace(|v| v * s);
        out
    }

    pub fn add_scaled(&mut self, other: &SpectralScalar, s: f64) {
        assert_eq!(self.grid.dims(), other.grid.dims(), "incompatible grids");
        ndarray::Zip::from(&mut self.coeffs)
            .and(&other.coeffs)
            .for_each(|a, &b| *a += b * s);
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl std::ops::Add<&SpectralScalar> for &SpectralScalar {
    type Output = SpectralScalar;
    fn add(self, rhs: &SpectralScalar) -> SpectralScalar {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl std::ops::Sub<&SpectralScalar> for &SpectralScalar {
    type Output = SpectralScalar;
    fn sub(self, rhs: &SpectralScalar) -> SpectralScalar {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

/// L2 inner product via Parseval; both fields must share the discretization.
pub fn l2_inner(f: &SpectralScalar, g: &SpectralScalar) -> f64 {
    assert_eq!(f.grid.dims(), g.grid.dims(), "incompatible grids");
    assert_eq!(f.grid.lengths(), g.grid.lengths(), "incompatible periods");
    let mut acc = 0.0f64;
    for (a, b) in f.coeffs.iter().zip(g.coeffs.iter()) {
        acc += a.re * b.re + a.im * b.im;
    }
    f.grid.volume() * acc
}

fn product_request(fs: &[&SpectralScalar]) -> (usize, Vec<usize>, Vec<usize>) {
    assert!(
        fs.len() == 2 || fs.len() == 3,
        "products take two or three factors"
    );
    let dim = fs[0].grid.dim();
    for f in fs {
        assert_eq!(f.grid.dim(), dim, "mixed dimensions in product");
        assert_eq!(
            f.grid.lengths(),
            fs[0].grid.lengths(),
            "mixed periods in product"
        );
    }
    let mut band_sum = vec![0usize; dim];
    let mut band_max = vec![0usize; dim];
    for f in fs {
        for a in 0..dim {
            band_sum[a] += f.grid.band()[a];
            band_max[a] = band_max[a].max(f.grid.band()[a]);
        }
    }
    (dim, band_sum, band_max)
}

fn physical_product(fs: &[&SpectralScalar], dims: &[usize]) -> ArrayD<f64> {
    let mut acc = fs[0].to_physical_on(dims);
    for f in &fs[1..] {
        let p = f.to_physical_on(dims);
        ndarray::Zip::from(&mut acc).and(&p).for_each(|a, &b| *a *= b);
    }
    acc
}

/// Pointwise product of two or three fields, exact for every retained mode.
/// The result lives on a grid just large enough for the full product band
/// (the sum of the factors' bands per axis).
pub fn product(fs: &[&SpectralScalar]) -> SpectralScalar {
    let (dim, band_sum, band_max) = product_request(fs);
    let mut dims = Vec::with_capacity(dim);
    for a in 0..dim {
        // 2B+2 stores band B alias-free; each factor also needs 2b+2 points.
        dims.push(next_fft_size((2 * band_sum[a] + 2).max(2 * band_max[a] + 2)));
    }
    let phys = physical_product(fs, &dims);
    let grid = Grid::new(dims, fs[0].grid.lengths().to_vec(), band_sum).unwrap();
    SpectralScalar::from_physical(&grid, &phys).unwrap()
}

/// Pointwise product truncated to `target`'s band limit.  The evaluation
/// grid is chosen so that every retained mode is alias-free (the 3/2-rule
/// generalization M > sum of bands + retained band).
pub fn product_on(fs: &[&SpectralScalar], target: &Grid) -> SpectralScalar {
    let (dim, band_sum, band_max) = product_request(fs);
    assert_eq!(dim, target.dim(), "target dimension mismatch");
    let mut dims = Vec::with_capacity(dim);
    for a in 0..dim {
        let keep = target.band()[a].min(band_sum[a]);
        let req = (band_sum[a] + keep + 1).max(2 * band_max[a] + 2).max(2 * keep + 2);
        dims.push(if target.dims()[a] >= req {
            target.dims()[a]
        } else {
            next_fft_size(req)
        });
    }
    let phys = physical_product(fs, &dims);
    let work = Grid::new(
        dims.clone(),
        target.lengths().to_vec(),
        dims.iter()
            .zip(target.band())
            .map(|(&m, &k)| k.min(m / 2 - 1))
            .collect(),
    )
    .unwrap();
    let spec = SpectralScalar::from_physical(&work, &phys).unwrap();
    spec.restricted_to(target)
}

/// Integral of the pointwise product of two or three fields, evaluated with
/// quadrature that is exact for the product's full band (M >= sum of bands
/// + 1, and every factor representable).
pub fn integral_of_product(fs: &[&SpectralScalar]) -> f64 {
    let (dim, band_sum, band_max) = product_request(fs);
    let mut dims = Vec::with_capacity(dim);
    for a in 0..dim {
        dims.push(next_fft_size((band_sum[a] + 1).max(2 * band_max[a] + 2)));
    }
    let phys = physical_product(fs, &dims);
    let mean = phys.iter().sum::<f64>() / phys.len() as f64;
    fs[0].grid.volume() * mean
}
