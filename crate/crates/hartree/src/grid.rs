//! Uniform periodic spectral grid on `[-L, L)^N` with Fourier differential
//! operators and rectangle-rule quadrature.
//!
//! The box stands in for the whole space; every caller that feeds localized
//! states through these operators is responsible for checking that the field
//! has decayed below its boundary tolerance (see the ground-state and
//! propagation modules).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

/// Smallest supported number of points per dimension.
pub const MIN_POINTS: usize = 16;

/// Uniform tensor grid: `n` points per dimension spanning `[-L, L)`, spacing
/// `h = 2L/n`, and the matching FFT wavenumbers `k_j = (pi/L) j` for
/// `j <= n/2`, `k_j = (pi/L)(j - n)` above.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    half_width: f64,
    spacing: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.half_width.to_bits() == other.half_width.to_bits()
    }
}

impl SpectralGrid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!(
                "dimension must be 1, 2 or 3; got {dim}"
            )));
        }
        if n < MIN_POINTS || !n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "points per dimension must be even and >= {MIN_POINTS}; got {n}"
            )));
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::Config(format!(
                "half-width must be positive and finite; got {half_width}"
            )));
        }
        let spacing = 2.0 * half_width / n as f64;
        let coords = (0..n).map(|j| -half_width + j as f64 * spacing).collect();
        let k0 = std::f64::consts::PI / half_width;
        let wavenumbers = (0..n)
            .map(|j| {
                if j <= n / 2 {
                    k0 * j as f64
                } else {
                    k0 * (j as f64 - n as f64)
                }
            })
            .collect();
        Ok(SpectralGrid {
            dim,
            n,
            half_width,
            spacing,
            coords,
            wavenumbers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per dimension.
    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of grid points `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-dimension sample coordinates `x_j = -L + j h`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Per-dimension FFT wavenumbers.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Quadrature weight `h^dim` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// `|x|^2` at every grid point, row-major.
    pub fn radius_sq(&self) -> Vec<f64> {
        let sq: Vec<f64> = self.coords.iter().map(|x| x * x).collect();
        tensor_sum(&sq, self.dim)
    }

    /// `|k|^2` at every Fourier mode, row-major.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let sq: Vec<f64> = self.wavenumbers.iter().map(|k| k * k).collect();
        tensor_sum(&sq, self.dim)
    }

    /// Visit every grid point in row-major order with its coordinate vector.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let dim = self.dim;
        let n = self.n;
        let mut digits = [0usize; 3];
        let mut point = [0.0f64; 3];
        for slot in point.iter_mut().take(dim) {
            *slot = self.coords[0];
        }
        for flat in 0..self.len() {
            f(flat, &point[..dim]);
            // increment the mixed-radix counter, last axis fastest
            for d in (0..dim).rev() {
                digits[d] += 1;
                if digits[d] == n {
                    digits[d] = 0;
                    point[d] = self.coords[0];
                } else {
                    point[d] = self.coords[digits[d]];
                    break;
                }
            }
        }
    }

    /// True when a flat index lies on the outermost layer of the box.
    pub fn on_boundary_shell(&self, mut flat: usize) -> bool {
        for _ in 0..self.dim {
            let digit = flat % self.n;
            if digit == 0 || digit == self.n - 1 {
                return true;
            }
            flat /= self.n;
        }
        false
    }
}

/// Expand per-dimension values `v` into the row-major tensor `sum_d v[i_d]`.
fn tensor_sum(values: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for &acc in &out {
            for &v in values {
                next.push(acc + v);
            }
        }
        out = next;
    }
    out
}

/// Complex-valued samples on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

/// Real-valued samples on a grid, row-major. Densities additionally promise
/// pointwise nonnegativity, which is checked where it matters.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl ComplexField {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: &SpectralGrid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        grid.for_each_point(|flat, point| values[flat] = f(point));
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Pointwise density `|u|^2`.
    pub fn density(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    /// `sqrt(h^N sum |u|^2)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    /// Largest magnitude on the outermost layer of the box.
    pub fn boundary_max(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.on_boundary_shell(*i))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }
}

impl RealField {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        RealField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &SpectralGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        grid.for_each_point(|flat, point| values[flat] = f(point));
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    /// Pointwise square root with the convention `sqrt(0) = 0`.
    pub fn sqrt(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v.max(0.0).sqrt()).collect(),
        }
    }

    /// Pointwise square, the density of a real state.
    pub fn squared(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * v).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    pub fn boundary_max(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.on_boundary_shell(*i))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Spectral Laplacian: multiply every Fourier mode by `-|k|^2`.
pub fn apply_laplacian(u: &ComplexField) -> ComplexField {
    let grid = u.grid();
    let mut hat = u.values().to_vec();
    fft::forward(&mut hat, grid.points_per_dim(), grid.dim());
    let ksq = grid.wavenumber_sq();
    for (v, &k2) in hat.iter_mut().zip(&ksq) {
        *v *= -k2;
    }
    fft::inverse(&mut hat, grid.points_per_dim(), grid.dim());
    ComplexField {
        grid: grid.clone(),
        values: hat,
    }
}

/// Solve `(I - tau * Laplacian) u = f` mode-wise: `u_hat = f_hat / (1 + tau |k|^2)`.
pub fn solve_modified_helmholtz(f: &ComplexField, tau: f64) -> ComplexField {
    assert!(tau > 0.0, "helmholtz step requires tau > 0, got {tau}");
    let grid = f.grid();
    let mut hat = f.values().to_vec();
    fft::forward(&mut hat, grid.points_per_dim(), grid.dim());
    let ksq = grid.wavenumber_sq();
    for (v, &k2) in hat.iter_mut().zip(&ksq) {
        *v /= 1.0 + tau * k2;
    }
    fft::inverse(&mut hat, grid.points_per_dim(), grid.dim());
    ComplexField {
        grid: grid.clone(),
        values: hat,
    }
}

/// Rectangle-rule quadrature `h^N sum f`, spectrally accurate for smooth
/// periodicized integrands.
pub fn integrate(f: &RealField) -> f64 {
    let s: f64 = f.values().iter().sum();
    f.grid().cell_volume() * s
}

/// `integral |grad u|^2` evaluated through Parseval.
pub fn gradient_norm_sq(u: &ComplexField) -> f64 {
    let grid = u.grid();
    let mut hat = u.values().to_vec();
    fft::forward(&mut hat, grid.points_per_dim(), grid.dim());
    let ksq = grid.wavenumber_sq();
    let weight = grid.cell_volume() / grid.len() as f64;
    hat.iter()
        .zip(&ksq)
        .map(|(v, &k2)| k2 * v.norm_sqr())
        .sum::<f64>()
        * weight
}

/// `integral grad(u) . conj(grad(v))` through Parseval.
pub fn gradient_inner(u: &ComplexField, v: &ComplexField) -> Complex64 {
    assert!(u.grid() == v.grid(), "gradient_inner: grid mismatch");
    let grid = u.grid();
    let mut u_hat = u.values().to_vec();
    let mut v_hat = v.values().to_vec();
    fft::forward(&mut u_hat, grid.points_per_dim(), grid.dim());
    fft::forward(&mut v_hat, grid.points_per_dim(), grid.dim());
    let ksq = grid.wavenumber_sq();
    let weight = grid.cell_volume() / grid.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for ((uh, vh), &k2) in u_hat.iter().zip(&v_hat).zip(&ksq) {
        acc += k2 * uh * vh.conj();
    }
    acc * weight
}
