//! Command-line driver: ground-state solves, propagation, the stability
//! experiment, mass sweeps, and the convexity/oracle check suite. Every
//! command writes a manifest with the fully resolved parameter set next to its
//! outputs, prints diagnostics to stderr only, and follows the exit-code
//! contract 0 ok / 1 config / 2 runtime / 3 assertion failed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convexity::{
    convexity_gap, energy_of_density, gradient_term_convexity, potential_term_gap, random_density,
    riesz_term_convexity, DensityPair,
};
use crate::dynamics::{evolve, stability_experiment, EvolveConfig};
use crate::error::{Error, Result};
use crate::functionals::{el_residual, energy_real, mass_real};
use crate::grid::{RealField, SpectralGrid};
use crate::ground::{
    d_curve, lagrange_multiplier, solve_ground, GroundConfig, GroundStateResult, RESIDUAL_ACCEPT,
};
use crate::io::{
    read_field, write_complex_field, write_json, write_manifest, write_real_field, write_trace_csv,
    RunManifest, StoredField,
};
use crate::riesz::{RieszOperator, DIRECT_CAP};

#[derive(Debug, Parser)]
#[command(
    name = "hartree",
    version,
    about = "Normalized ground states and trapped dynamics of a defocusing Hartree equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the mass-constrained ground state and write the field, a result
    /// summary, and a manifest
    Ground(GroundArgs),
    /// Propagate an initial state, writing a conservation trace and the final
    /// field
    Evolve(EvolveArgs),
    /// Perturb a ground state and measure how far the flow strays from its
    /// gauge orbit
    Stability(StabilityArgs),
    /// Solve along a log-spaced mass sweep and tabulate d(m) and omega(m)
    Sweep(SweepArgs),
    /// Run the convexity certificates and the convolution-oracle comparison
    Check(CheckArgs),
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Ground(args) => cmd_ground(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Stability(args) => cmd_stability(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhysicsArgs {
    /// Spatial dimension (1, 2 or 3)
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Riesz exponent; must satisfy 0 < alpha < dim
    #[arg(long)]
    pub alpha: f64,
    /// Grid points per dimension (even, >= 16)
    #[arg(long = "grid-n", default_value_t = 256)]
    pub grid_n: usize,
    /// Half-width L of the computational box [-L, L)
    #[arg(long = "half-width", default_value_t = 8.0)]
    pub half_width: f64,
}

impl PhysicsArgs {
    fn build(&self) -> Result<(SpectralGrid, RieszOperator)> {
        let grid = SpectralGrid::new(self.dim, self.grid_n, self.half_width)?;
        let op = RieszOperator::new(&grid, self.alpha)?;
        Ok((grid, op))
    }
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Prescribed mass of the state
    #[arg(long)]
    pub mass: f64,
    /// Pseudo-time step of the gradient flow
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// Convergence threshold on the update rate
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 50_000)]
    pub max_iter: usize,
    /// Randomize the initialization with this seed (default: Gaussian start)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output prefix
    #[arg(long, default_value = "ground")]
    pub out: String,
    /// Disable the Hartree coupling (harmonic-oscillator oracle; testing only)
    #[arg(long = "linear-oracle", hide = true, default_value_t = false)]
    pub linear_oracle: bool,
}

fn ground_config(
    mass: f64,
    tau: f64,
    tol: f64,
    max_iter: usize,
    seed: Option<u64>,
    linear: bool,
) -> GroundConfig {
    let mut cfg = GroundConfig::new(mass);
    cfg.tau = tau;
    cfg.tol_update = tol;
    cfg.max_iter = max_iter;
    cfg.seed = seed;
    cfg.kappa = if linear { 0.0 } else { 1.0 };
    cfg
}

/// The deterministic part of a ground solve, written as PREFIX.result.
#[derive(Debug, Serialize)]
struct GroundResultFile {
    mass: f64,
    omega: f64,
    energy: crate::functionals::EnergyBreakdown,
    residual: f64,
    iterations: usize,
    tau_final: f64,
    boundary_max: f64,
    backtracks: usize,
    clipped_mass_total: f64,
    clipped_mass_tail: f64,
}

fn cmd_ground(args: &GroundArgs) -> Result<()> {
    let (grid, op) = args.physics.build()?;
    let cfg = ground_config(
        args.mass,
        args.tau,
        args.tol,
        args.max_iter,
        args.seed,
        args.linear_oracle,
    );
    let res = solve_ground(&cfg, &grid, &op)?;

    let field_path = PathBuf::from(format!("{}.field", args.out));
    let result_path = PathBuf::from(format!("{}.result", args.out));
    let manifest_path = PathBuf::from(format!("{}.manifest", args.out));
    write_real_field(&field_path, &res.q)?;
    write_json(
        &result_path,
        &GroundResultFile {
            mass: mass_real(&res.q),
            omega: res.omega,
            energy: res.d_m,
            residual: res.residual,
            iterations: res.iterations,
            tau_final: res.tau_final,
            boundary_max: res.boundary_max,
            backtracks: res.backtracks,
            clipped_mass_total: res.clipped_mass_total,
            clipped_mass_tail: res.clipped_mass_tail,
        },
    )?;
    write_manifest(
        &manifest_path,
        &RunManifest::new(
            "ground",
            serde_json::json!({
                "physics": args.physics,
                "mass": args.mass,
                "tau": args.tau,
                "tol": args.tol,
                "max_iter": args.max_iter,
                "seed": args.seed,
                "linear_oracle": args.linear_oracle,
                "out": args.out,
            }),
            vec![
                field_path.display().to_string(),
                result_path.display().to_string(),
                manifest_path.display().to_string(),
            ],
        ),
    )?;
    eprintln!(
        "ground: omega = {:.12}, d(m) = {:.12}, residual = {:.3e}, {} iterations",
        res.omega, res.d_m.total, res.residual, res.iterations
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Initial state file (real or complex field)
    #[arg(long)]
    pub initial: PathBuf,
    /// Riesz exponent; must satisfy 0 < alpha < dim of the stored grid
    #[arg(long)]
    pub alpha: f64,
    /// Time step
    #[arg(long)]
    pub dt: f64,
    /// Number of steps
    #[arg(long)]
    pub steps: usize,
    /// Record a trace row every this many steps
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Reference ground-state field for orbit distance and phase columns
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Largest |psi| tolerated on the boundary shell
    #[arg(long = "boundary-tol", default_value_t = 1e-8)]
    pub boundary_tol: f64,
    #[arg(long, default_value = "evolve")]
    pub out: String,
    #[arg(long = "linear-oracle", hide = true, default_value_t = false)]
    pub linear_oracle: bool,
}

fn load_reference(path: &Path, grid: &SpectralGrid) -> Result<RealField> {
    match read_field(path)? {
        StoredField::Real(q) => {
            if q.grid() != grid {
                return Err(Error::GridMismatch);
            }
            Ok(q)
        }
        StoredField::Complex(_) => Err(Error::FileFormat {
            path: path.display().to_string(),
            reason: "reference must be a real ground-state field".into(),
        }),
    }
}

fn cmd_evolve(args: &EvolveArgs) -> Result<()> {
    let psi0 = read_field(&args.initial)?.into_complex();
    let grid = psi0.grid().clone();
    let op = RieszOperator::new(&grid, args.alpha)?;
    let reference = match &args.reference {
        None => None,
        Some(path) => Some(load_reference(path, &grid)?),
    };
    let mut cfg = EvolveConfig::new(args.dt, args.steps);
    cfg.record_stride = args.stride;
    cfg.boundary_tol = args.boundary_tol;
    cfg.kappa = if args.linear_oracle { 0.0 } else { 1.0 };
    let (final_state, trace) = evolve(&psi0, &cfg, &op, reference.as_ref())?;

    let trace_path = PathBuf::from(format!("{}.trace", args.out));
    let field_path = PathBuf::from(format!("{}.field", args.out));
    let manifest_path = PathBuf::from(format!("{}.manifest", args.out));
    write_trace_csv(&trace_path, &trace)?;
    write_complex_field(&field_path, &final_state)?;
    write_manifest(
        &manifest_path,
        &RunManifest::new(
            "evolve",
            serde_json::json!({
                "initial": args.initial.display().to_string(),
                "alpha": args.alpha,
                "dt": args.dt,
                "steps": args.steps,
                "stride": args.stride,
                "reference": args.reference.as_ref().map(|p| p.display().to_string()),
                "boundary_tol": args.boundary_tol,
                "linear_oracle": args.linear_oracle,
                "out": args.out,
            }),
            vec![
                trace_path.display().to_string(),
                field_path.display().to_string(),
                manifest_path.display().to_string(),
            ],
        ),
    )?;
    eprintln!(
        "evolve: {} steps, mass drift {:.3e}, energy drift {:.3e}",
        args.steps,
        trace.mass_drift(),
        trace.energy_drift()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Mass of the internally solved ground state (ignored with --ground)
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Perturbation size in the energy-space norm
    #[arg(long)]
    pub eps: f64,
    /// Experiment horizon
    #[arg(long = "time")]
    pub time: f64,
    /// Time step
    #[arg(long)]
    pub dt: f64,
    /// Seed of the perturbation generator
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use this precomputed ground-state field instead of solving
    #[arg(long)]
    pub ground: Option<PathBuf>,
    /// Largest accepted sup-distance / eps ratio
    #[arg(long = "max-ratio", default_value_t = 10.0)]
    pub max_ratio: f64,
    #[arg(long, default_value = "stability")]
    pub out: String,
    #[arg(long = "linear-oracle", hide = true, default_value_t = false)]
    pub linear_oracle: bool,
}

/// Wrap a ground state loaded from disk into the result shape the experiment
/// consumes, recomputing its multiplier and residual.
fn ground_from_field(q: RealField, op: &RieszOperator, kappa: f64) -> Result<GroundStateResult> {
    let omega = lagrange_multiplier(&q, op, kappa)?;
    let residual = el_residual(&q.to_complex(), omega, op, kappa)?;
    if residual >= RESIDUAL_ACCEPT {
        return Err(Error::Config(format!(
            "--ground field has Euler-Lagrange residual {residual:.3e}; \
             it is not a converged ground state"
        )));
    }
    let d_m = energy_real(&q, op, kappa)?;
    let boundary_max = q.boundary_max();
    Ok(GroundStateResult {
        q,
        omega,
        d_m,
        residual,
        iterations: 0,
        tau_final: 0.0,
        boundary_max,
        backtracks: 0,
        clipped_mass_total: 0.0,
        clipped_mass_tail: 0.0,
        energy_trace: vec![d_m.total],
    })
}

#[derive(Debug, Serialize)]
struct StabilitySummary {
    eps: f64,
    omega: f64,
    t_final: f64,
    dt: f64,
    seed: u64,
    initial_distance: f64,
    sup_distance: f64,
    ratio: Option<f64>,
    max_ratio: f64,
    passed: bool,
}

fn cmd_stability(args: &StabilityArgs) -> Result<()> {
    let (grid, op) = args.physics.build()?;
    let kappa = if args.linear_oracle { 0.0 } else { 1.0 };
    let ground = match &args.ground {
        Some(path) => ground_from_field(load_reference(path, &grid)?, &op, kappa)?,
        None => {
            let mut cfg = GroundConfig::new(args.mass);
            cfg.kappa = kappa;
            solve_ground(&cfg, &grid, &op)?
        }
    };
    let (report, trace) =
        stability_experiment(&ground, args.eps, args.time, args.dt, args.seed, &op, kappa)?;

    // the unperturbed run has no ratio; it passes as a soliton check
    let passed = match report.ratio {
        Some(r) => r <= args.max_ratio,
        None => report.sup_distance < 1e-6,
    };
    let summary = StabilitySummary {
        eps: report.eps,
        omega: ground.omega,
        t_final: args.time,
        dt: args.dt,
        seed: args.seed,
        initial_distance: report.initial_distance,
        sup_distance: report.sup_distance,
        ratio: report.ratio,
        max_ratio: args.max_ratio,
        passed,
    };

    let trace_path = PathBuf::from(format!("{}.trace", args.out));
    let summary_path = PathBuf::from(format!("{}.summary", args.out));
    let manifest_path = PathBuf::from(format!("{}.manifest", args.out));
    write_trace_csv(&trace_path, &trace)?;
    write_json(&summary_path, &summary)?;
    write_manifest(
        &manifest_path,
        &RunManifest::new(
            "stability",
            serde_json::json!({
                "physics": args.physics,
                "mass": args.mass,
                "eps": args.eps,
                "time": args.time,
                "dt": args.dt,
                "seed": args.seed,
                "ground": args.ground.as_ref().map(|p| p.display().to_string()),
                "max_ratio": args.max_ratio,
                "linear_oracle": args.linear_oracle,
                "out": args.out,
            }),
            vec![
                trace_path.display().to_string(),
                summary_path.display().to_string(),
                manifest_path.display().to_string(),
            ],
        ),
    )?;
    eprintln!(
        "stability: eps = {:.3e}, sup distance = {:.3e}, ratio = {}",
        report.eps,
        report.sup_distance,
        report
            .ratio
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|| "n/a".into())
    );
    if !passed {
        return Err(Error::StabilityFailed(format!(
            "sup orbit distance {:.3e} exceeds {} x eps",
            report.sup_distance, args.max_ratio
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long = "mass-min")]
    pub mass_min: f64,
    #[arg(long = "mass-max")]
    pub mass_max: f64,
    /// Number of log-spaced masses
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 50_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "sweep")]
    pub out: String,
    #[arg(long = "linear-oracle", hide = true, default_value_t = false)]
    pub linear_oracle: bool,
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    if args.count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    if !(args.mass_min > 0.0 && args.mass_max >= args.mass_min) {
        return Err(Error::Config(format!(
            "need 0 < mass-min <= mass-max; got {} and {}",
            args.mass_min, args.mass_max
        )));
    }
    let masses: Vec<f64> = if args.count == 1 {
        vec![args.mass_min]
    } else {
        let ratio = args.mass_max / args.mass_min;
        (0..args.count)
            .map(|k| args.mass_min * ratio.powf(k as f64 / (args.count - 1) as f64))
            .collect()
    };
    let (grid, op) = args.physics.build()?;
    let cfg = ground_config(
        1.0,
        args.tau,
        args.tol,
        args.max_iter,
        None,
        args.linear_oracle,
    );
    let points = d_curve(&masses, &cfg, &grid, &op)?;

    let bound_factor = grid.dim() as f64 / 2.0;
    let mut csv = String::from("m,d_m,omega,residual,increasing,above_bound\n");
    for (i, p) in points.iter().enumerate() {
        let increasing = i == 0 || points[i - 1].d_m < p.d_m;
        let above_bound = p.d_m >= bound_factor * p.mass;
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{increasing},{above_bound}\n",
            p.mass, p.d_m, p.omega, p.residual
        ));
    }
    let csv_path = PathBuf::from(format!("{}.csv", args.out));
    let manifest_path = PathBuf::from(format!("{}.manifest", args.out));
    std::fs::write(&csv_path, csv)?;
    write_manifest(
        &manifest_path,
        &RunManifest::new(
            "sweep",
            serde_json::json!({
                "physics": args.physics,
                "mass_min": args.mass_min,
                "mass_max": args.mass_max,
                "count": args.count,
                "tau": args.tau,
                "tol": args.tol,
                "max_iter": args.max_iter,
                "linear_oracle": args.linear_oracle,
                "out": args.out,
            }),
            vec![
                csv_path.display().to_string(),
                manifest_path.display().to_string(),
            ],
        ),
    )?;
    eprintln!("sweep: {} masses solved", points.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Spatial dimension (1, 2 or 3)
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Riesz exponent; must satisfy 0 < alpha < dim
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Grid points per dimension; the default box is wide so the random
    /// densities decay far below their floor before the boundary
    #[arg(long = "grid-n", default_value_t = 512)]
    pub grid_n: usize,
    #[arg(long = "half-width", default_value_t = 24.0)]
    pub half_width: f64,
    /// Mass of the generated densities
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Number of convexity trials
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "check")]
    pub out: String,
}

#[derive(Debug, Serialize)]
struct ConvexityRow {
    trial: usize,
    seed_rho1: u64,
    seed_rho2: u64,
    lambda: f64,
    full_gap: f64,
    gradient_gap: f64,
    riesz_gap: f64,
    riesz_quadratic: f64,
    trap_gap: f64,
    scale: f64,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    dim: usize,
    alpha: f64,
    grid_n: usize,
    half_width: f64,
    mass: f64,
    trials: usize,
    seed: u64,
    kernel_clamp_magnitude: f64,
    kernel_clamped_modes: usize,
    kernel_spectrum_peak: f64,
    oracle_grid_n: usize,
    oracle_densities: usize,
    oracle_max_rel_error: f64,
    rows: Vec<ConvexityRow>,
    min_full_gap: f64,
    violations: Vec<String>,
}

/// Largest even per-dimension size whose total point count fits the
/// brute-force convolution cap.
fn direct_oracle_side(dim: usize, grid_n: usize) -> usize {
    let mut side = grid_n.min(match dim {
        1 => DIRECT_CAP,
        2 => 64,
        _ => 16,
    });
    side -= side % 2;
    side.max(crate::grid::MIN_POINTS)
}

fn cmd_check(args: &CheckArgs) -> Result<()> {
    if args.trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let grid = SpectralGrid::new(args.dim, args.grid_n, args.half_width)?;
    let op = RieszOperator::new(&grid, args.alpha)?;
    let mut violations: Vec<String> = Vec::new();

    // kernel spectrum diagnostics
    if op.clamp_magnitude() > 1e-8 * op.spectrum_peak() {
        violations.push(format!(
            "kernel clamp magnitude {:.3e} exceeds 1e-8 of the spectrum peak {:.3e}",
            op.clamp_magnitude(),
            op.spectrum_peak()
        ));
    }

    // FFT against the brute-force convolution on a grid under the cap
    let oracle_side = direct_oracle_side(args.dim, args.grid_n);
    let oracle_grid = SpectralGrid::new(args.dim, oracle_side, args.half_width)?;
    let oracle_op = RieszOperator::new(&oracle_grid, args.alpha)?;
    let mut oracle_rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut oracle_max_rel = 0.0f64;
    let oracle_densities = 10;
    for _ in 0..oracle_densities {
        let rho = RealField::new(
            oracle_grid.clone(),
            (0..oracle_grid.len())
                .map(|_| oracle_rng.gen_range(0.0..1.0))
                .collect(),
        )?;
        let fast = oracle_op.convolve(&rho)?;
        let slow = oracle_op.direct_convolve(&rho)?;
        let scale = fast
            .values()
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let err = fast
            .values()
            .iter()
            .zip(slow.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        oracle_max_rel = oracle_max_rel.max(err);
    }
    if oracle_max_rel > 1e-12 {
        violations.push(format!(
            "fft convolution disagrees with the direct oracle by {oracle_max_rel:.3e} relative"
        ));
    }

    // convexity trials
    let mut master = ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = Vec::with_capacity(args.trials);
    let mut min_full_gap = f64::INFINITY;
    for trial in 0..args.trials {
        let seed_rho1 = master.gen::<u64>();
        let seed_rho2 = master.gen::<u64>();
        let lambda = master.gen_range(0.1..0.9);
        let pair = DensityPair::new(
            random_density(&grid, args.mass, seed_rho1),
            random_density(&grid, args.mass, seed_rho2),
            lambda,
        )?;
        let full_gap = convexity_gap(&pair, &op)?;
        let gradient_gap = gradient_term_convexity(&pair);
        let riesz = riesz_term_convexity(&pair, &op)?;
        let trap_gap = potential_term_gap(&pair);
        let scale = energy_of_density(pair.rho1(), &op, 1.0)?.max(energy_of_density(
            pair.rho2(),
            &op,
            1.0,
        )?);
        min_full_gap = min_full_gap.min(full_gap);

        if full_gap <= 1e-12 * scale {
            violations.push(format!(
                "trial {trial} (seeds {seed_rho1}/{seed_rho2}): convexity gap {full_gap:.3e} \
                 is not strictly positive at scale {scale:.3e}"
            ));
        }
        if gradient_gap < -1e-10 {
            violations.push(format!(
                "trial {trial} (seeds {seed_rho1}/{seed_rho2}): gradient-term gap {gradient_gap:.3e}"
            ));
        }
        if riesz.gap < -1e-10 {
            violations.push(format!(
                "trial {trial} (seeds {seed_rho1}/{seed_rho2}): riesz-term gap {:.3e}",
                riesz.gap
            ));
        }
        let id_scale = riesz.gap.abs().max(riesz.quadratic_form.abs()).max(1e-300);
        if (riesz.gap - riesz.quadratic_form).abs() / id_scale > 1e-10 {
            violations.push(format!(
                "trial {trial} (seeds {seed_rho1}/{seed_rho2}): riesz gap {:.6e} vs quadratic \
                 identity {:.6e}",
                riesz.gap, riesz.quadratic_form
            ));
        }
        if trap_gap.abs() >= 1e-13 {
            violations.push(format!(
                "trial {trial} (seeds {seed_rho1}/{seed_rho2}): trap-term gap {trap_gap:.3e}"
            ));
        }
        rows.push(ConvexityRow {
            trial,
            seed_rho1,
            seed_rho2,
            lambda,
            full_gap,
            gradient_gap,
            riesz_gap: riesz.gap,
            riesz_quadratic: riesz.quadratic_form,
            trap_gap,
            scale,
        });
    }

    let report = CheckReport {
        dim: args.dim,
        alpha: args.alpha,
        grid_n: args.grid_n,
        half_width: args.half_width,
        mass: args.mass,
        trials: args.trials,
        seed: args.seed,
        kernel_clamp_magnitude: op.clamp_magnitude(),
        kernel_clamped_modes: op.clamped_modes(),
        kernel_spectrum_peak: op.spectrum_peak(),
        oracle_grid_n: oracle_side,
        oracle_densities,
        oracle_max_rel_error: oracle_max_rel,
        rows,
        min_full_gap,
        violations: violations.clone(),
    };
    let report_path = PathBuf::from(format!("{}.report", args.out));
    let manifest_path = PathBuf::from(format!("{}.manifest", args.out));
    write_json(&report_path, &report)?;
    write_manifest(
        &manifest_path,
        &RunManifest::new(
            "check",
            serde_json::json!({
                "dim": args.dim,
                "alpha": args.alpha,
                "grid_n": args.grid_n,
                "half_width": args.half_width,
                "mass": args.mass,
                "trials": args.trials,
                "seed": args.seed,
                "out": args.out,
            }),
            vec![
                report_path.display().to_string(),
                manifest_path.display().to_string(),
            ],
        ),
    )?;
    eprintln!(
        "check: {} trials, min gap {:.3e}, oracle error {:.3e}, {} violations",
        args.trials,
        min_full_gap,
        oracle_max_rel,
        violations.len()
    );
    match violations.first() {
        None => Ok(()),
        Some(first) => Err(Error::CheckFailed(first.clone())),
    }
}
