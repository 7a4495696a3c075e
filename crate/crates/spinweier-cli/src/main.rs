//! Command-line front end: algebra / pairing verification suites and the
//! forward / reconstruct / convergence pipeline with CSV reports.
//!
//! Exit codes: 0 all checks pass, 1 numerical failure, 2 usage or input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinweier_core::clifford::{algebra_info, Multivector, C64};
use spinweier_core::config::{Geometry, ScenarioConfig};
use spinweier_core::error::Error;
use spinweier_core::matrix_rep::{build_ideals, MatrixRep};
use spinweier_core::mesh::{read_field, write_field, write_obj};
use spinweier_core::pairing::{check_spinc_invariance, check_tau_symmetry, check_vector_skew};
use spinweier_core::pipeline::{
    build_patch, convergence_csv, convergence_study, forward_csv, roundtrip_csv, run_forward,
    run_roundtrip,
};
use spinweier_core::report::loglog_slope;
use spinweier_core::scenarios::Scenario;
use spinweier_core::spin::{lambda, random_rotation, spin_lift, SpinCElement};

#[derive(Parser)]
#[command(name = "spinweier", version, about = "Spinorial Weierstrass immersion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// algebra dimension for the verification suites (default: full range)
    #[arg(long)]
    n: Option<u32>,
    /// built-in scenario: plane, sphere, cylinder, catenoid, torus, arc
    #[arg(long)]
    scenario: Option<String>,
    /// refinement level for built-in scenarios
    #[arg(long)]
    level: Option<u32>,
    /// seed for the randomized suites
    #[arg(long)]
    seed: Option<u64>,
    /// output directory for CSV / OBJ / field files
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the matrix representation and idempotent/ideal suites
    Algebra(Common),
    /// Verify the τ-pairing lemmas on random inputs
    Pairing(Common),
    /// Extract a spinor field from an immersed mesh and report residuals
    Forward(Common),
    /// Build ξ, integrate F = ∫ξ, and report reconstruction residuals
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// spinor field file to reconstruct from (default: extract in-process)
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Refinement study: residuals versus mesh size h
    Convergence(Common),
}

/// A failed run, tagged with the exit code it should produce.
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Config(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::DimensionRange(_)
            | Error::NonManifold(_, _)
            | Error::DegenerateTriangle(_)
            | Error::Disconnected => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = spinweier_core::exec::apply_thread_env() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let outcome = match &cli.command {
        Command::Algebra(common) => cmd_algebra(common),
        Command::Pairing(common) => cmd_pairing(common),
        Command::Forward(common) => cmd_forward(common),
        Command::Reconstruct { common, field } => cmd_reconstruct(common, field.as_deref()),
        Command::Convergence(common) => cmd_convergence(common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numerical(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Merges the config file (if any) with command-line overrides.
fn resolve_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(name) = &common.scenario {
        let scenario = Scenario::from_str(name)?;
        cfg.geometry = Geometry::Builtin(scenario);
    }
    if let Some(level) = common.level {
        cfg.level = level;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<PathBuf, Failure> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("--out {dir:?}: {e}")))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, Failure> {
    let file =
        std::fs::File::create(path).map_err(|e| Failure::Usage(format!("{path:?}: {e}")))?;
    Ok(std::io::BufWriter::new(file))
}

fn random_mv(n: u32, rng: &mut impl Rng) -> Multivector {
    let coeffs = (0..1usize << n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    Multivector::from_coeffs(n, coeffs)
}

fn suite_dims(common: &Common, lo: u32, hi: u32) -> Result<Vec<u32>, Failure> {
    match common.n {
        None => Ok((lo..=hi).collect()),
        Some(n) if (1..=12).contains(&n) => Ok(vec![n]),
        Some(n) => Err(Failure::Usage(format!(
            "--n {n} outside supported range 1..=12"
        ))),
    }
}

fn report_line(name: &str, residual: f64, tol: f64) -> Result<(), Failure> {
    let verdict = if residual <= tol { "pass" } else { "FAIL" };
    println!("  {name:<28} {residual:>12.3e}  (tol {tol:.0e})  {verdict}");
    if residual <= tol {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "{name}: residual {residual:.3e} exceeds {tol:.0e}"
        )))
    }
}

fn cmd_algebra(common: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(common)?;
    let dims = suite_dims(common, 1, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa15e_b0a7);
    let mut worst: Result<(), Failure> = Ok(());
    for &n in &dims {
        let info = algebra_info(n);
        let rep = MatrixRep::build(n)?;
        let sys = build_ideals(&rep);
        println!(
            "n={n}: nu_C={} ideal families={} matrix dim={} ideals={}",
            info.nu_complex,
            rep.part_count(),
            rep.matrix_dim(),
            sys.ideals.len()
        );

        // generator relations G_i G_j + G_j G_i = -2 δ_ij I
        let mut anti = 0.0f64;
        for part in 0..rep.part_count() {
            for i in 0..n {
                for j in 0..n {
                    let gi = rep.generator_image(i, part);
                    let gj = rep.generator_image(j, part);
                    let mut s = gi * gj + gj * gi;
                    if i == j {
                        for d in 0..rep.matrix_dim() {
                            s[(d, d)] += C64::new(2.0, 0.0);
                        }
                    }
                    anti = anti.max(s.iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
        }
        let r = report_line("generator relations", anti, 1e-12);
        worst = worst.and(r);

        // isomorphism on random products, and τ ↦ conjugate transpose
        let mut iso = 0.0f64;
        let mut tau_dev = 0.0f64;
        for _ in 0..100 {
            let x = random_mv(n, &mut rng);
            let y = random_mv(n, &mut rng);
            let mx = rep.to_matrix(&x)?;
            let my = rep.to_matrix(&y)?;
            let mxy = rep.to_matrix(&x.gp(&y)?)?;
            let mtau = rep.to_matrix(&x.tau())?;
            for part in 0..rep.part_count() {
                let prod = &mx[part] * &my[part];
                iso = iso.max((&mxy[part] - prod).iter().map(|z| z.norm()).fold(0.0, f64::max));
                let adj = mx[part].adjoint();
                tau_dev = tau_dev
                    .max((&mtau[part] - adj).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst = worst.and(report_line("algebra isomorphism", iso, 1e-12));
        worst = worst.and(report_line("tau = conj transpose", tau_dev, 1e-12));

        // idempotent system: f² = f, orthogonality, Σf = 1, τ(f) = f
        let mut idem = 0.0f64;
        let mut sum = Multivector::zero(n);
        for (a, ia) in sys.ideals.iter().enumerate() {
            let f = &ia.idempotent;
            idem = idem.max((&f.gp(f)? - f).norm_inf());
            idem = idem.max((&f.tau() - f).norm_inf());
            sum = &sum + f;
            for (b, ib) in sys.ideals.iter().enumerate() {
                if a != b {
                    idem = idem.max(f.gp(&ib.idempotent)?.norm_inf());
                }
            }
            if ia.basis.len() != rep.matrix_dim() {
                return Err(Failure::Numerical(format!(
                    "n={n}: ideal basis has {} elements, expected {}",
                    ia.basis.len(),
                    rep.matrix_dim()
                )));
            }
        }
        idem = idem.max((&sum - &Multivector::one(n)).norm_inf());
        worst = worst.and(report_line("idempotent system", idem, 1e-12));

        // double cover: spin_lift then λ must reproduce the rotation
        if n >= 2 {
            let mut lift_dev = 0.0f64;
            for _ in 0..20 {
                let rot = random_rotation(n as usize, &mut rng);
                let g = spin_lift(&rot)?;
                lift_dev = lift_dev.max((lambda(&g) - &rot).norm());
            }
            worst = worst.and(report_line("spin lift roundtrip", lift_dev, 1e-8));
        }
    }
    // periodicity of the classification beyond the base range
    if common.n.is_none() {
        let mut per = true;
        for n in 9..=12u32 {
            let info = algebra_info(n);
            let base = algebra_info(n - 2);
            per &= info.nu_complex == base.nu_complex && info.d_complex == 2 * base.d_complex;
        }
        println!("  periodicity n=9..12          {}", if per { "pass" } else { "FAIL" });
        if !per {
            return Err(Failure::Numerical("classification periodicity".into()));
        }
    }
    worst
}

fn cmd_pairing(common: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(common)?;
    let dims = suite_dims(common, 2, 6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9a1f_71a1);
    let trials = 200;
    let mut worst: Result<(), Failure> = Ok(());
    for &n in &dims {
        if n < 2 {
            return Err(Failure::Usage("pairing suite needs n >= 2".into()));
        }
        let mut inv = 0.0f64;
        let mut skew = 0.0f64;
        let mut sym = 0.0f64;
        for _ in 0..trials {
            let x = random_mv(n, &mut rng);
            let y = random_mv(n, &mut rng);
            let rot = random_rotation(n as usize, &mut rng);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let u = SpinCElement::new(spin_lift(&rot)?, C64::new(phase.cos(), phase.sin()))?;
            inv = inv.max(check_spinc_invariance(&x, &y, &u)?);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            skew = skew.max(check_vector_skew(&x, &y, &Multivector::from_real_vector(n, &v))?);
            sym = sym.max(check_tau_symmetry(&x, &y)?);
        }
        println!("n={n}: {trials} random trials");
        worst = worst.and(report_line("Spin^C invariance", inv, 1e-10));
        worst = worst.and(report_line("vector skew-adjointness", skew, 1e-10));
        worst = worst.and(report_line("tau symmetry", sym, 1e-10));
    }
    worst
}

fn cmd_forward(common: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(common)?;
    let dir = out_dir(common)?;
    let patch = build_patch(&cfg)?;
    let fwd = run_forward(&patch)?;

    let mut w = create(&dir.join("mesh.obj"))?;
    write_obj(&mut w, &fwd.mesh.positions, &fwd.mesh.faces)?;
    let mut w = create(&dir.join("field.txt"))?;
    write_field(&mut w, &fwd.field)?;
    forward_csv(&fwd).save(&dir.join("forward.csv"))?;

    println!(
        "forward: {} vertices, {} edges, h = {:.4e}",
        fwd.mesh.positions.len(),
        fwd.mesh.edges.len(),
        fwd.h
    );
    let mut result = report_line("gram deviation", fwd.gram_dev, cfg.tolerance("gram"));
    println!(
        "  killing residual             max {:.3e}  mean {:.3e}",
        fwd.killing_stats.max, fwd.killing_stats.mean
    );
    if let Some((res, dev)) = &fwd.dirac {
        let max = res.iter().cloned().fold(0.0, f64::max);
        println!("  dirac residual               max {max:.3e}");
        result = result.and(report_line("spinor norm constancy", *dev, cfg.tolerance("norm_const")));
    }
    if !fwd.killing_stats.max.is_finite() {
        return Err(Failure::Numerical("killing residual is not finite".into()));
    }
    result
}

fn cmd_reconstruct(common: &Common, field_path: Option<&Path>) -> Result<(), Failure> {
    let cfg = resolve_config(common)?;
    let dir = out_dir(common)?;
    let patch = build_patch(&cfg)?;
    let mut fwd = run_forward(&patch)?;
    if let Some(path) = field_path {
        let file = std::io::BufReader::new(
            std::fs::File::open(path).map_err(|e| Failure::Usage(format!("{path:?}: {e}")))?,
        );
        let field = read_field(file)?;
        if field.values.len() != fwd.mesh.positions.len() || field.n != fwd.mesh.n {
            return Err(Failure::Usage(format!(
                "field file {path:?} does not match the mesh ({} vertices in ℝ^{})",
                fwd.mesh.positions.len(),
                fwd.mesh.n
            )));
        }
        fwd.field = field;
    }
    let gauge = cfg.gauge_vertex.min(fwd.mesh.positions.len() - 1);
    let rt = run_roundtrip(&fwd, gauge)?;

    // diagnostics are written even when the checks below fail
    roundtrip_csv(&rt).save(&dir.join("reconstruct.csv"))?;
    let mut w = create(&dir.join("reconstructed.obj"))?;
    write_obj(&mut w, &rt.aligned, &fwd.mesh.faces)?;

    println!(
        "reconstruct: rms after alignment {:.4e}, objective {:.4e}",
        rt.rms, rt.objective
    );
    println!(
        "  closedness                   max {:.3e}  mean {:.3e}",
        rt.closed_stats.max, rt.closed_stats.mean
    );
    let mut result = report_line("isometry deviation", rt.iso_stats.max, cfg.tolerance("isometry"));
    result = result.and(report_line("xi non-vector part", rt.nonvec.max, cfg.tolerance("nonvec")));
    let rms_tol = cfg.tolerance("rms").max(10.0 * fwd.h);
    result = result.and(report_line("rms after alignment", rt.rms, rms_tol));
    result
}

fn cmd_convergence(common: &Common) -> Result<(), Failure> {
    let mut cfg = resolve_config(common)?;
    if let Some(level) = common.level {
        // interpret --level as the finest level of the study
        cfg.levels = (1..=level).collect();
    }
    let dir = out_dir(common)?;
    let rows = convergence_study(&cfg)?;
    convergence_csv(&rows).save(&dir.join("convergence.csv"))?;

    println!("level        h  killing(mean)  closedness    rms(aligned)");
    for row in &rows {
        println!(
            "{:>5} {:>8.2e} {:>14.3e} {:>11.3e} {:>15.3e}",
            row.level, row.h, row.killing_mean, row.closed_mean, row.rms
        );
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let killing: Vec<f64> = rows.iter().map(|r| r.killing_mean).collect();
    let flat = killing.iter().all(|&r| r < 1e-10);
    if flat {
        println!("  killing residual flat at fp noise: pass");
        return Ok(());
    }
    let slope = loglog_slope(&hs, &killing);
    let monotone = killing.windows(2).all(|w| w[1] < w[0]);
    println!(
        "  killing slope {:.2} (min {:.2}), monotone: {}",
        slope,
        cfg.tolerance("slope_min"),
        monotone
    );
    if slope < cfg.tolerance("slope_min") || !monotone {
        return Err(Failure::Numerical(format!(
            "killing residual slope {slope:.2} below {:.2} or not monotone",
            cfg.tolerance("slope_min")
        )));
    }
    if let Some(dirac) = rows
        .iter()
        .map(|r| r.dirac_mean)
        .collect::<Option<Vec<f64>>>()
    {
        let dslope = loglog_slope(&hs, &dirac);
        println!("  dirac slope {dslope:.2}");
        if dslope < cfg.tolerance("slope_min") && dirac.iter().any(|&r| r > 1e-10) {
            return Err(Failure::Numerical(format!(
                "dirac residual slope {dslope:.2} below {:.2}",
                cfg.tolerance("slope_min")
            )));
        }
    }
    Ok(())
}
