//! Mass and energy functionals, the energy-space norm, the frozen-state
//! Hamiltonian, the Euler-Lagrange residual, and distances to the gauge orbit
//! of a reference state.
//!
//! The Hartree coupling `kappa` multiplies the nonlocal term everywhere and is
//! a test hook restricted to {0, 1}: switching it off exposes the exactly
//! solvable harmonic oscillator as an oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, ComplexField, RealField};
use crate::riesz::RieszOperator;

/// The three defocusing energy contributions and their sum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyBreakdown {
    /// `1/2 integral |grad u|^2`
    pub kinetic: f64,
    /// `1/2 integral |x|^2 |u|^2`
    pub potential: f64,
    /// `1/4 integral (I_alpha * |u|^2) |u|^2`
    pub hartree: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Assemble from the three parts; the total is their sum by construction.
    pub fn new_parts(kinetic: f64, potential: f64, hartree: f64) -> Self {
        EnergyBreakdown {
            kinetic,
            potential,
            hartree,
            total: kinetic + potential + hartree,
        }
    }
}

/// `integral |u|^2`.
pub fn mass(u: &ComplexField) -> f64 {
    grid::integrate(&u.density())
}

/// `integral q^2` for real fields.
pub fn mass_real(q: &RealField) -> f64 {
    let s: f64 = q.values().iter().map(|v| v * v).sum();
    q.grid().cell_volume() * s
}

/// Full energy with spectral kinetic part and real-space potential and
/// Hartree parts.
pub fn energy(u: &ComplexField, riesz: &RieszOperator, kappa: f64) -> Result<EnergyBreakdown> {
    if u.grid() != riesz.grid() {
        return Err(Error::GridMismatch);
    }
    debug_assert!(kappa == 0.0 || kappa == 1.0, "kappa is a {{0,1}} test hook");
    let kinetic = 0.5 * grid::gradient_norm_sq(u);
    let rho = u.density();
    let vsq = u.grid().radius_sq();
    let potential: f64 = 0.5
        * u.grid().cell_volume()
        * rho
            .values()
            .iter()
            .zip(&vsq)
            .map(|(&r, &x2)| x2 * r)
            .sum::<f64>();
    let hartree = if kappa == 0.0 {
        0.0
    } else {
        0.25 * kappa * riesz.bilinear(&rho, &rho)?
    };
    Ok(EnergyBreakdown::new_parts(kinetic, potential, hartree))
}

/// Energy of a real state.
pub fn energy_real(q: &RealField, riesz: &RieszOperator, kappa: f64) -> Result<EnergyBreakdown> {
    energy(&q.to_complex(), riesz, kappa)
}

/// Squared energy-space norm `integral (|grad u|^2 + |x|^2 |u|^2 + |u|^2)`,
/// with unit weight on each term.
pub fn h_norm_sq(u: &ComplexField) -> f64 {
    let vsq = u.grid().radius_sq();
    let pointwise: f64 = u
        .values()
        .iter()
        .zip(&vsq)
        .map(|(v, &x2)| (1.0 + x2) * v.norm_sqr())
        .sum::<f64>()
        * u.grid().cell_volume();
    grid::gradient_norm_sq(u) + pointwise
}

/// Energy-space inner product `integral (grad u . conj(grad v) + |x|^2 u conj(v) + u conj(v))`.
pub fn h_inner(u: &ComplexField, v: &ComplexField) -> Complex64 {
    assert!(u.grid() == v.grid(), "h_inner: grid mismatch");
    let vsq = u.grid().radius_sq();
    let mut pointwise = Complex64::new(0.0, 0.0);
    for ((a, b), &x2) in u.values().iter().zip(v.values()).zip(&vsq) {
        pointwise += (1.0 + x2) * a * b.conj();
    }
    grid::gradient_inner(u, v) + pointwise * u.grid().cell_volume()
}

/// Apply `(-Laplacian + |x|^2 + kappa I_alpha * |state|^2)` to `u`; linear in
/// `u` for a frozen `state`.
pub fn hamiltonian_apply(
    u: &ComplexField,
    state: &ComplexField,
    riesz: &RieszOperator,
    kappa: f64,
) -> Result<ComplexField> {
    if u.grid() != riesz.grid() || state.grid() != riesz.grid() {
        return Err(Error::GridMismatch);
    }
    let lap = grid::apply_laplacian(u);
    let vsq = u.grid().radius_sq();
    let hartree_pot = if kappa == 0.0 {
        None
    } else {
        Some(riesz.convolve(&state.density())?)
    };
    let mut out = lap;
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let mut pot = vsq[i];
        if let Some(hp) = &hartree_pot {
            pot += kappa * hp.values()[i];
        }
        *v = -*v + pot * u.values()[i];
    }
    Ok(out)
}

/// `|| -Lap Q + omega Q + |x|^2 Q + kappa (I_alpha * |Q|^2) Q ||_{L^2} / ||Q||_{L^2}`;
/// zero fields report a zero residual.
pub fn el_residual(q: &ComplexField, omega: f64, riesz: &RieszOperator, kappa: f64) -> Result<f64> {
    let norm = q.l2_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut r = hamiltonian_apply(q, q, riesz, kappa)?;
    for (rv, qv) in r.values_mut().iter_mut().zip(q.values()) {
        *rv += omega * qv;
    }
    Ok(r.l2_norm() / norm)
}

/// The phase minimizing `||psi - Q e^{i theta}||_H`: the argument of the
/// energy-space inner product, in `(-pi, pi]`, with 0 when the product
/// vanishes.
pub fn optimal_phase(psi: &ComplexField, q: &ComplexField) -> f64 {
    let ip = h_inner(psi, q);
    if ip.re == 0.0 && ip.im == 0.0 {
        return 0.0;
    }
    let theta = ip.im.atan2(ip.re);
    if theta <= -std::f64::consts::PI {
        theta + 2.0 * std::f64::consts::PI
    } else {
        theta
    }
}

/// Energy-space distance from `psi` to the gauge orbit `{Q e^{i theta}}`,
/// evaluated at the closed-form optimal phase.
pub fn orbit_distance(psi: &ComplexField, q: &ComplexField) -> f64 {
    let theta = optimal_phase(psi, q);
    let rot = Complex64::cis(theta);
    let mut diff = psi.clone();
    for (d, qv) in diff.values_mut().iter_mut().zip(q.values()) {
        *d -= rot * qv;
    }
    h_norm_sq(&diff).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Unit-mass harmonic ground state `pi^(-N/4) exp(-|x|^2 / 2)`.
    fn ground_gaussian(grid: &SpectralGrid) -> ComplexField {
        let norm = std::f64::consts::PI.powf(-(grid.dim() as f64) / 4.0);
        ComplexField::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new(norm * (-r2 / 2.0).exp(), 0.0)
        })
    }

    /// Smooth random field from a handful of low Fourier modes.
    fn smooth_random(grid: &SpectralGrid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k0 = std::f64::consts::PI / grid.half_width();
        let modes: Vec<(f64, f64, Complex64)> = (0..6)
            .map(|_| {
                (
                    k0 * rng.gen_range(-4i32..=4) as f64,
                    k0 * rng.gen_range(-4i32..=4) as f64,
                    Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
                )
            })
            .collect();
        ComplexField::from_fn(grid, |x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k1, k2, a) in &modes {
                let phase = k1 * x[0] + if x.len() > 1 { k2 * x[1] } else { 0.0 };
                acc += a * Complex64::cis(phase);
            }
            acc
        })
    }

    fn setup_1d() -> (SpectralGrid, RieszOperator) {
        let g = SpectralGrid::new(1, 256, 8.0).unwrap();
        let op = RieszOperator::new(&g, 0.5).unwrap();
        (g, op)
    }

    #[test]
    fn mass_basics() {
        let (g, _) = setup_1d();
        assert_eq!(mass(&ComplexField::zeros(&g)), 0.0);
        let phi = ground_gaussian(&g);
        assert!(
            (mass(&phi) - 1.0).abs() < 1e-12,
            "unit gaussian mass {}",
            mass(&phi)
        );
        // gauge invariance
        let mut rotated = phi.clone();
        let rot = Complex64::cis(0.83);
        for v in rotated.values_mut() {
            *v *= rot;
        }
        assert!((mass(&rotated) - mass(&phi)).abs() < 1e-13);
    }

    #[test]
    fn energy_of_zero_vanishes_and_parts_are_nonnegative() {
        let (g, op) = setup_1d();
        let e = energy(&ComplexField::zeros(&g), &op, 1.0).unwrap();
        assert_eq!(e.total, 0.0);
        let e = energy(&ground_gaussian(&g), &op, 1.0).unwrap();
        assert!(e.kinetic > 0.0 && e.potential > 0.0 && e.hartree > 0.0);
        assert!((e.total - (e.kinetic + e.potential + e.hartree)).abs() <= 1e-14 * e.total);
    }

    #[test]
    fn gaussian_energy_matches_oscillator_moments() {
        for dim in [1usize, 2] {
            let g = SpectralGrid::new(dim, if dim == 1 { 256 } else { 96 }, 8.0).unwrap();
            let op = RieszOperator::new(&g, 0.5).unwrap();
            let phi = ground_gaussian(&g);
            let e = energy(&phi, &op, 0.0).unwrap();
            let expect = dim as f64 / 4.0;
            assert!(
                (e.kinetic - expect).abs() < 1e-10,
                "dim {dim} kinetic {} vs {expect}",
                e.kinetic
            );
            assert!(
                (e.potential - expect).abs() < 1e-10,
                "dim {dim} potential {} vs {expect}",
                e.potential
            );
            assert_eq!(e.hartree, 0.0);
        }
    }

    #[test]
    fn energy_is_gauge_invariant() {
        let (g, op) = setup_1d();
        let phi = smooth_random(&g, 3);
        let mut rotated = phi.clone();
        let rot = Complex64::cis(-1.9);
        for v in rotated.values_mut() {
            *v *= rot;
        }
        let a = energy(&phi, &op, 1.0).unwrap();
        let b = energy(&rotated, &op, 1.0).unwrap();
        assert!((a.total - b.total).abs() <= 1e-13 * a.total.abs().max(1.0));
        assert!((h_norm_sq(&phi) - h_norm_sq(&rotated)).abs() <= 1e-13 * h_norm_sq(&phi));
    }

    #[test]
    fn energy_dominates_the_oscillator_ground_level() {
        let (g, op) = setup_1d();
        for seed in 0..5 {
            // localized smooth state: damp a random field by a gaussian envelope
            let mut u = smooth_random(&g, seed);
            let env = ground_gaussian(&g);
            for (uv, ev) in u.values_mut().iter_mut().zip(env.values()) {
                *uv *= ev.re.powf(0.5);
            }
            let e = energy(&u, &op, 1.0).unwrap();
            let bound = mass(&u) * g.dim() as f64 / 2.0;
            assert!(
                e.total >= bound - 1e-9 * bound.abs().max(1.0),
                "seed {seed}: energy {} below bound {bound}",
                e.total
            );
        }
    }

    #[test]
    fn h_norm_of_unit_gaussian() {
        let (g, _) = setup_1d();
        let phi = ground_gaussian(&g);
        assert_eq!(h_norm_sq(&ComplexField::zeros(&g)), 0.0);
        let h = h_norm_sq(&phi);
        assert!((h - 2.0).abs() < 1e-10, "gaussian h-norm^2 {h}");
        assert!(h >= mass(&phi));
    }

    #[test]
    fn hamiltonian_reproduces_the_oscillator_eigenpair() {
        let (g, op) = setup_1d();
        let phi = ground_gaussian(&g);
        let zero_state = ComplexField::zeros(&g);
        let h_phi = hamiltonian_apply(&phi, &zero_state, &op, 1.0).unwrap();
        let max_err = h_phi
            .values()
            .iter()
            .zip(phi.values())
            .map(|(h, p)| (h - g.dim() as f64 * p).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-8, "oscillator eigenpair defect {max_err}");
        let zero_in = hamiltonian_apply(&zero_state, &phi, &op, 1.0).unwrap();
        assert!(zero_in.values().iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let (g, op) = setup_1d();
        let state = ground_gaussian(&g);
        for seed in 0..5 {
            let u = smooth_random(&g, seed);
            let v = smooth_random(&g, seed + 40);
            let hu = hamiltonian_apply(&u, &state, &op, 1.0).unwrap();
            let hv = hamiltonian_apply(&v, &state, &op, 1.0).unwrap();
            let mut a = Complex64::new(0.0, 0.0);
            let mut b = Complex64::new(0.0, 0.0);
            for ((vv, huv), (hvv, uv)) in v
                .values()
                .iter()
                .zip(hu.values())
                .zip(hv.values().iter().zip(u.values()))
            {
                // <Hu, v> against <u, Hv>
                a += huv * vv.conj();
                b += uv * hvv.conj();
            }
            let scale = a.norm().max(b.norm()).max(1e-300);
            assert!(
                (a - b).norm() / scale < 1e-10,
                "symmetry defect {} (seed {seed})",
                (a - b).norm() / scale
            );
        }
    }

    #[test]
    fn residual_of_linear_oracle_and_zero_field() {
        let (g, op) = setup_1d();
        assert_eq!(
            el_residual(&ComplexField::zeros(&g), -1.0, &op, 1.0).unwrap(),
            0.0
        );
        let phi = ground_gaussian(&g);
        let r = el_residual(&phi, -(g.dim() as f64), &op, 0.0).unwrap();
        assert!(r < 1e-8, "linear-oracle residual {r}");
    }

    #[test]
    fn energy_directional_derivative_matches_hamiltonian_pairing() {
        let (g, op) = setup_1d();
        let eps = 1e-5;
        for seed in 0..5 {
            let mut u = smooth_random(&g, seed);
            let env = ground_gaussian(&g);
            for (uv, ev) in u.values_mut().iter_mut().zip(env.values()) {
                *uv *= (ev.re * std::f64::consts::PI.powf(0.25)).powf(0.7);
            }
            let v = {
                let mut v = smooth_random(&g, seed + 77);
                for (vv, ev) in v.values_mut().iter_mut().zip(env.values()) {
                    *vv *= (ev.re * std::f64::consts::PI.powf(0.25)).powf(0.7);
                }
                v
            };
            let shift = |s: f64| {
                let mut w = u.clone();
                for (wv, vv) in w.values_mut().iter_mut().zip(v.values()) {
                    *wv += s * vv;
                }
                w
            };
            let e_plus = energy(&shift(eps), &op, 1.0).unwrap().total;
            let e_minus = energy(&shift(-eps), &op, 1.0).unwrap().total;
            let fd = (e_plus - e_minus) / (2.0 * eps);
            let hu = hamiltonian_apply(&u, &u, &op, 1.0).unwrap();
            let mut pairing = Complex64::new(0.0, 0.0);
            for (h, vv) in hu.values().iter().zip(v.values()) {
                pairing += h * vv.conj();
            }
            let analytic = (pairing * g.cell_volume()).re;
            assert!(
                (fd - analytic).abs() < 1e-6 * analytic.abs().max(1.0),
                "seed {seed}: fd {fd} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn optimal_phase_closed_forms() {
        let (g, _) = setup_1d();
        let q = ground_gaussian(&g);
        let rotate = |theta: f64| {
            let mut p = q.clone();
            let rot = Complex64::cis(theta);
            for v in p.values_mut() {
                *v *= rot;
            }
            p
        };
        let third = std::f64::consts::PI / 3.0;
        assert!((optimal_phase(&rotate(third), &q) - third).abs() < 1e-12);
        assert!(optimal_phase(&q, &q).abs() < 1e-12);
        assert!(
            (optimal_phase(&rotate(std::f64::consts::FRAC_PI_2), &q) - std::f64::consts::FRAC_PI_2)
                .abs()
                < 1e-12
        );
        assert_eq!(optimal_phase(&ComplexField::zeros(&g), &q), 0.0);
    }

    #[test]
    fn orbit_distance_closed_forms() {
        let (g, _) = setup_1d();
        let q = ground_gaussian(&g);
        for theta in [0.0, 0.4, -2.9, std::f64::consts::PI] {
            let mut p = q.clone();
            let rot = Complex64::cis(theta);
            for v in p.values_mut() {
                *v *= rot;
            }
            let d = orbit_distance(&p, &q);
            assert!(d < 1e-12, "theta {theta}: orbit distance {d}");
        }
        // collinear: psi = 2Q sits exactly one H-norm away from the orbit
        let mut doubled = q.clone();
        for v in doubled.values_mut() {
            *v *= 2.0;
        }
        let d = orbit_distance(&doubled, &q);
        let expect = h_norm_sq(&q).sqrt();
        assert!((d - expect).abs() < 1e-12 * expect, "{d} vs {expect}");
    }

    #[test]
    fn orbit_distance_beats_every_scanned_phase() {
        let (g, _) = setup_1d();
        let q = ground_gaussian(&g);
        for seed in 0..3 {
            let psi = smooth_random(&g, seed);
            let d = orbit_distance(&psi, &q);
            assert!(d <= h_norm_sq(&sub(&psi, &q, 0.0)).sqrt() + 1e-12);
            let mut scan_min = f64::INFINITY;
            for k in 0..3600 {
                let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / 3600.0;
                let dk = h_norm_sq(&sub(&psi, &q, theta)).sqrt();
                scan_min = scan_min.min(dk);
                assert!(
                    d <= dk + 1e-10 * dk.max(1.0),
                    "seed {seed}: closed form {d} loses to theta {theta} ({dk})"
                );
            }
            // the scan bracket is 2 pi / 3600 wide, so the scan can only sit
            // a hair above the true infimum
            assert!(
                scan_min - d <= 5e-6 * scan_min.max(1.0),
                "seed {seed}: scan minimum {scan_min} vs closed form {d}"
            );
        }
    }

    fn sub(psi: &ComplexField, q: &ComplexField, theta: f64) -> ComplexField {
        let rot = Complex64::cis(theta);
        let mut out = psi.clone();
        for (o, qv) in out.values_mut().iter_mut().zip(q.values()) {
            *o -= rot * qv;
        }
        out
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn phase_is_recovered_and_orbit_distance_vanishes_on_the_orbit(
            theta in -3.1f64..3.1,
            amp in 0.2f64..3.0,
        ) {
            let g = SpectralGrid::new(1, 64, 6.0).unwrap();
            let q = ground_gaussian(&g);
            let mut psi = q.clone();
            let rot = amp * Complex64::cis(theta);
            for v in psi.values_mut() {
                *v *= rot;
            }
            let recovered = optimal_phase(&psi, &q);
            proptest::prop_assert!(
                (recovered - theta).abs() < 1e-9,
                "theta {} recovered as {}", theta, recovered
            );
            // off-orbit only through the amplitude; distance is |amp - 1| |Q|_H
            let expect = (amp - 1.0).abs() * h_norm_sq(&q).sqrt();
            let d = orbit_distance(&psi, &q);
            proptest::prop_assert!(
                (d - expect).abs() < 1e-9 * (1.0 + expect),
                "distance {} vs {}", d, expect
            );
        }
    }
}
