//! Numerical certificates for the convexity structure that pins down
//! uniqueness: the mass-m density simplex is convex, and the energy written in
//! the density variable `rho = u^2` is strictly convex on it. The gradient
//! term is strictly convex for distinct densities, the trap term is linear
//! (gap identically zero), and the Riesz term is convex with the exact
//! quadratic identity `gap = lambda (1-lambda) B(rho1 - rho2, rho1 - rho2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{self, RealField, SpectralGrid};
use crate::riesz::RieszOperator;

/// Relative mass agreement required of an admissible pair.
pub const MASS_MATCH_TOL: f64 = 1e-10;

/// Two same-mass densities and an interior interpolation weight.
#[derive(Debug, Clone)]
pub struct DensityPair {
    rho1: RealField,
    rho2: RealField,
    lambda: f64,
}

impl DensityPair {
    pub fn new(rho1: RealField, rho2: RealField, lambda: f64) -> Result<Self> {
        if rho1.grid() != rho2.grid() {
            return Err(Error::GridMismatch);
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Config(format!(
                "interpolation weight must lie strictly inside (0, 1); got {lambda}"
            )));
        }
        for rho in [&rho1, &rho2] {
            if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
                return Err(Error::NegativeDensity { index, value });
            }
        }
        let m1 = grid::integrate(&rho1);
        let m2 = grid::integrate(&rho2);
        let rel = (m1 - m2).abs() / m1.abs().max(m2.abs()).max(1e-300);
        if rel > MASS_MATCH_TOL {
            return Err(Error::MassMismatch { m1, m2, rel });
        }
        Ok(DensityPair { rho1, rho2, lambda })
    }

    pub fn rho1(&self) -> &RealField {
        &self.rho1
    }

    pub fn rho2(&self) -> &RealField {
        &self.rho2
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `lambda rho1 + (1 - lambda) rho2`: pointwise convex combination, again a
/// density of the shared mass.
pub fn interpolate_density(pair: &DensityPair) -> RealField {
    let l = pair.lambda;
    RealField::new(
        pair.rho1.grid().clone(),
        pair.rho1
            .values()
            .iter()
            .zip(pair.rho2.values())
            .map(|(&a, &b)| l * a + (1.0 - l) * b)
            .collect(),
    )
    .expect("same grid")
}

/// Energy in density form:
/// `1/2 int (|grad sqrt(rho)|^2 + |x|^2 rho + kappa/2 (I_alpha * rho) rho)`.
/// The square root uses the convention `sqrt(0) = 0`.
pub fn energy_of_density(rho: &RealField, riesz: &RieszOperator, kappa: f64) -> Result<f64> {
    if rho.grid() != riesz.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let root = rho.sqrt();
    let kinetic = 0.5 * grid::gradient_norm_sq(&root.to_complex());
    let vsq = rho.grid().radius_sq();
    let trap: f64 = 0.5
        * rho.grid().cell_volume()
        * rho
            .values()
            .iter()
            .zip(&vsq)
            .map(|(&r, &x2)| x2 * r)
            .sum::<f64>();
    let hartree = if kappa == 0.0 {
        0.0
    } else {
        0.25 * kappa * riesz.bilinear(rho, rho)?
    };
    Ok(kinetic + trap + hartree)
}

/// Convexity defect of the full density energy:
/// `lambda E(rho1) + (1-lambda) E(rho2) - E(lambda rho1 + (1-lambda) rho2)`.
/// Nonnegative, and strictly positive for distinct densities.
pub fn convexity_gap(pair: &DensityPair, riesz: &RieszOperator) -> Result<f64> {
    let l = pair.lambda;
    let e1 = energy_of_density(&pair.rho1, riesz, 1.0)?;
    let e2 = energy_of_density(&pair.rho2, riesz, 1.0)?;
    let mid = energy_of_density(&interpolate_density(pair), riesz, 1.0)?;
    Ok(l * e1 + (1.0 - l) * e2 - mid)
}

/// Termwise gap of `int |grad sqrt(rho)|^2` alone.
pub fn gradient_term_convexity(pair: &DensityPair) -> f64 {
    let l = pair.lambda;
    let g = |rho: &RealField| grid::gradient_norm_sq(&rho.sqrt().to_complex());
    l * g(&pair.rho1) + (1.0 - l) * g(&pair.rho2) - g(&interpolate_density(pair))
}

/// Termwise gap of the linear trap term `int |x|^2 rho`; identically zero up
/// to rounding. The moments are summed with Neumaier compensation so the gap
/// resolves well below the plain-summation noise of wide boxes.
pub fn potential_term_gap(pair: &DensityPair) -> f64 {
    let vsq = pair.rho1.grid().radius_sq();
    let cell = pair.rho1.grid().cell_volume();
    let moment = |rho: &RealField| -> f64 {
        cell * neumaier_sum(rho.values().iter().zip(&vsq).map(|(&r, &x2)| x2 * r))
    };
    let l = pair.lambda;
    l * moment(&pair.rho1) + (1.0 - l) * moment(&pair.rho2) - moment(&interpolate_density(pair))
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// The Riesz-term gap evaluated two independent ways.
#[derive(Debug, Clone, Copy)]
pub struct RieszTermGap {
    /// `lambda B(rho1,rho1) + (1-lambda) B(rho2,rho2) - B(rho_l, rho_l)`
    pub gap: f64,
    /// `lambda (1-lambda) B(rho1-rho2, rho1-rho2)`, the exact algebraic value
    pub quadratic_form: f64,
}

/// Termwise gap of `int (I_alpha * rho) rho`, with its quadratic-form identity
/// evaluated alongside as a cross-check.
pub fn riesz_term_convexity(pair: &DensityPair, riesz: &RieszOperator) -> Result<RieszTermGap> {
    let l = pair.lambda;
    let b11 = riesz.bilinear(&pair.rho1, &pair.rho1)?;
    let b22 = riesz.bilinear(&pair.rho2, &pair.rho2)?;
    let mid = interpolate_density(pair);
    let bmm = riesz.bilinear(&mid, &mid)?;
    let gap = l * b11 + (1.0 - l) * b22 - bmm;

    let delta = RealField::new(
        pair.rho1.grid().clone(),
        pair.rho1
            .values()
            .iter()
            .zip(pair.rho2.values())
            .map(|(&a, &b)| a - b)
            .collect(),
    )?;
    let quadratic_form = l * (1.0 - l) * riesz.bilinear(&delta, &delta)?;
    Ok(RieszTermGap {
        gap,
        quadratic_form,
    })
}

/// Seeded mixture of 3..=6 Gaussian bumps with centers in `[-L/2, L/2]^N` and
/// widths in `[0.3, 1.5]`, floored at `1e-8` of its peak and normalized to the
/// requested mass. The floor keeps `sqrt(rho)` smooth enough for spectral
/// differentiation, honoring the positivity hypothesis of the convexity
/// argument.
pub fn random_density(grid: &SpectralGrid, mass: f64, seed: u64) -> RealField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = grid.half_width();
    let count = rng.gen_range(3..=6);
    let bumps: Vec<(f64, [f64; 3], f64)> = (0..count)
        .map(|_| {
            let amp = rng.gen_range(0.2..1.0);
            let mut center = [0.0; 3];
            for c in center.iter_mut().take(grid.dim()) {
                *c = rng.gen_range(-half / 2.0..half / 2.0);
            }
            let width = rng.gen_range(0.3..1.5);
            (amp, center, width)
        })
        .collect();
    let mut rho = RealField::from_fn(grid, |x| {
        let mut acc = 0.0;
        for (amp, center, width) in &bumps {
            let d2: f64 = x
                .iter()
                .zip(center)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum();
            acc += amp * (-d2 / (2.0 * width * width)).exp();
        }
        acc
    });
    let peak = rho.values().iter().copied().fold(0.0, f64::max);
    for v in rho.values_mut() {
        *v += 1e-8 * peak;
    }
    let total = grid::integrate(&rho);
    let scale = mass / total;
    for v in rho.values_mut() {
        *v *= scale;
    }
    rho
}
