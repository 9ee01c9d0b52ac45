//! `geowarp` command line: gradient checking, single warps, dense
//! photometric alignment and synthetic dataset generation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad usage, 3 gradient-check
//! failure. Machine-readable results (pose line, CSV) go to stdout;
//! diagnostics go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use geowarp_core::align::coarse_to_fine_align_observed;
use geowarp_core::gradcheck::{run_suites, SuiteConfig, DEFAULT_LAYER_TOL};
use geowarp_core::io::{self, Image};
use geowarp_core::lie::{se3_forward, Se3Params};
use geowarp_core::synth::{synth_pair, warp_image, SynthOptions};
use geowarp_core::{
    photometric_cost, AlignConfig, AlignMode, AlignmentProblem, CameraIntrinsics, Error, LossKind,
    RobustLoss, ScalarGrid, TraceEntry, VectorGrid,
};

#[derive(Parser)]
#[command(
    name = "geowarp",
    version,
    about = "Differentiable geometric vision layers and dense photometric alignment",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    So3,
    Se3,
}

#[derive(Subcommand)]
enum Command {
    /// Run finite-difference gradient checks and report per-check errors.
    Gradcheck {
        /// Which suite to run.
        #[arg(long, default_value = "all",
              value_parser = clap::builder::PossibleValuesParser::new(
                  geowarp_core::gradcheck::module_names()))]
        module: String,
        /// Random instances per check.
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Relative-error tolerance for layer-level checks.
        #[arg(long, default_value_t = DEFAULT_LAYER_TOL)]
        tol: f64,
    },
    /// Warp one image by a rigid pose using its depth map.
    Warp {
        /// Input image (PGM or PPM).
        #[arg(long)]
        image: PathBuf,
        /// Depth map (Pf PFM in metres, or PGM in millimetres).
        #[arg(long)]
        depth: PathBuf,
        /// Pose: six floats "v1 v2 v3 t1 t2 t3" or a file holding them.
        #[arg(long)]
        pose: String,
        /// Intrinsics: four floats "fx fy px py" or a file holding them.
        #[arg(long)]
        intrinsics: String,
        /// Output image path; the validity mask lands next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dense photometric alignment of an image pair.
    Align {
        /// Reference image.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Live image to align against the reference.
        #[arg(long)]
        live: PathBuf,
        /// Reference depth map (required for --mode se3).
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Intrinsics: four floats "fx fy px py" or a file holding them.
        #[arg(long)]
        intrinsics: String,
        /// Pose parameterization.
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Robust loss: l2|huber|cauchy|geman-mcclure|tukey.
        #[arg(long, default_value = "huber")]
        loss: String,
        /// Override the loss scale constant.
        #[arg(long)]
        loss_scale: Option<f64>,
        /// Coarse-to-fine pyramid levels.
        #[arg(long, default_value_t = 1)]
        levels: usize,
        /// Maximum descent iterations per level.
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Relative cost-change stopping tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Output directory for residual images, trace CSV and pose.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a synthetic alignment pair from an image, depth and pose.
    Synth {
        /// Base image (PGM or PPM; color collapses to gray).
        #[arg(long)]
        image: PathBuf,
        /// Depth map for the base image.
        #[arg(long)]
        depth: PathBuf,
        /// Ground-truth pose: six floats or a file holding them.
        #[arg(long)]
        pose: String,
        /// Intrinsics: four floats "fx fy px py" or a file holding them.
        #[arg(long)]
        intrinsics: String,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
        /// Gaussian pixel-noise standard deviation added to the live image.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Noise seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            return if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                ExitCode::from(0)
            } else {
                eprint!("{err}");
                ExitCode::from(2)
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Gradcheck {
            module,
            trials,
            tol,
        } => cmd_gradcheck(&module, trials, tol),
        Command::Warp {
            image,
            depth,
            pose,
            intrinsics,
            out,
        } => cmd_warp(&image, &depth, &pose, &intrinsics, &out),
        Command::Align {
            reference,
            live,
            depth,
            intrinsics,
            mode,
            loss,
            loss_scale,
            levels,
            max_iters,
            tol,
            out_dir,
        } => cmd_align(AlignArgs {
            reference,
            live,
            depth,
            intrinsics,
            mode,
            loss,
            loss_scale,
            levels,
            max_iters,
            tol,
            out_dir,
        }),
        Command::Synth {
            image,
            depth,
            pose,
            intrinsics,
            out_dir,
            noise,
            seed,
        } => cmd_synth(&image, &depth, &pose, &intrinsics, &out_dir, noise, seed),
    }
}

/// Accepts either an inline value or a path to a file holding it.
fn load_pose(spec: &str) -> Result<[f64; 6], Error> {
    io::parse_pose(spec).or_else(|_| io::read_pose(spec))
}

fn load_intrinsics(spec: &str) -> Result<CameraIntrinsics, Error> {
    io::parse_intrinsics(spec).or_else(|_| io::read_intrinsics(spec))
}

fn cmd_gradcheck(module: &str, trials: usize, tol: f64) -> Result<u8, Error> {
    let outcomes = run_suites(module, &SuiteConfig { trials, tol })?;
    let mut all_passed = true;
    for outcome in &outcomes {
        let status = if outcome.passed() { "PASS" } else { "FAIL" };
        println!(
            "{}: max rel err {:.3e} (tol {:.1e}) {}",
            outcome.name, outcome.max_rel_err, outcome.tol, status
        );
        all_passed &= outcome.passed();
    }
    Ok(if all_passed { 0 } else { 3 })
}

fn mask_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    out.with_file_name(format!("{stem}_mask.pgm"))
}

fn cmd_warp(
    image: &Path,
    depth: &Path,
    pose: &str,
    intrinsics: &str,
    out: &Path,
) -> Result<u8, Error> {
    let pose = load_pose(pose)?;
    let k = load_intrinsics(intrinsics)?;
    let depth = io::read_depth(depth)?;
    let transform = se3_forward(&Se3Params::from_slice(&pose)?);

    match io::read_image(image)? {
        Image::Gray(gray) => {
            let (warped, mask) = warp_image(&gray, &depth, &k, &transform)?;
            io::write_image(&warped, out)?;
            io::write_mask(&mask, mask_path_for(out))?;
        }
        Image::Rgb(rgb) => {
            let mut out_rgb = VectorGrid::zeros(rgb.height(), rgb.width(), 3)?;
            let mut mask = ScalarGrid::zeros(rgb.height(), rgb.width())?;
            for ch in 0..3 {
                let (warped, m) = warp_image(&rgb.channel(ch), &depth, &k, &transform)?;
                for r in 0..rgb.height() {
                    for c in 0..rgb.width() {
                        out_rgb.set(r, c, ch, warped.get(r, c));
                        if ch == 0 {
                            mask.set(r, c, m.get(r, c));
                        }
                    }
                }
            }
            io::write_image_rgb(&out_rgb, out)?;
            io::write_mask(&mask, mask_path_for(out))?;
        }
    }
    eprintln!("wrote {} and its _mask companion", out.display());
    Ok(0)
}

struct AlignArgs {
    reference: PathBuf,
    live: PathBuf,
    depth: Option<PathBuf>,
    intrinsics: String,
    mode: ModeArg,
    loss: String,
    loss_scale: Option<f64>,
    levels: usize,
    max_iters: usize,
    tol: f64,
    out_dir: PathBuf,
}

fn cmd_align(args: AlignArgs) -> Result<u8, Error> {
    let k = load_intrinsics(&args.intrinsics)?;
    let ref_image = io::read_image(&args.reference)?.to_gray()?;
    let live_image = io::read_image(&args.live)?.to_gray()?;
    let depth = args.depth.as_ref().map(io::read_depth).transpose()?;
    let mode = match args.mode {
        ModeArg::So3 => AlignMode::So3,
        ModeArg::Se3 => AlignMode::Se3,
    };
    let kind: LossKind = args.loss.parse()?;
    let loss = match args.loss_scale {
        Some(scale) => RobustLoss::with_scale(kind, scale)?,
        None => RobustLoss::new(kind),
    };
    let problem = AlignmentProblem::new(ref_image, live_image, depth, k, loss, mode)?;
    let config = AlignConfig {
        max_iters: args.max_iters,
        tol: args.tol,
        ..AlignConfig::default()
    };

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;

    // Residual snapshots at iteration decades, evaluated at full resolution.
    let out_dir = args.out_dir.clone();
    let problem_for_observer = problem.clone();
    let mut observer = move |entry: &TraceEntry, params: &[f64]| {
        if is_decade(entry.iter) {
            if let Ok((_, residuals, mask)) = photometric_cost(&problem_for_observer, params) {
                let path = out_dir.join(format!("residual_iter{:06}.pgm", entry.iter));
                let _ = io::write_residual(&residuals, &mask, path);
            }
        }
    };

    let init = vec![0.0; mode.param_len()];
    let result =
        coarse_to_fine_align_observed(&problem, args.levels, &init, &config, Some(&mut observer))?;

    // Trace CSV: one row per accepted iteration.
    let mut csv = String::from("iter,cost,step,valid_fraction\n");
    for entry in result.cost_trace.iter().filter(|e| e.iter > 0) {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            entry.iter, entry.cost, entry.step, entry.valid_fraction
        ));
    }
    std::fs::write(args.out_dir.join("trace.csv"), csv).map_err(|e| Error::Io {
        path: args.out_dir.join("trace.csv"),
        source: e,
    })?;

    // Final residual image and pose.
    let (final_cost, residuals, mask) = photometric_cost(&problem, &result.params)?;
    io::write_residual(&residuals, &mask, args.out_dir.join("residual_final.pgm"))?;
    let mut pose = [0.0; 6];
    for (i, &p) in result.params.iter().enumerate() {
        pose[i] = p;
    }
    io::write_pose(&pose, args.out_dir.join("pose.txt"))?;
    println!("{}", io::format_pose(&pose));
    eprintln!(
        "converged: {} | final cost {:.6e} | valid fraction {:.3} | {} accepted iterations",
        result.converged,
        final_cost,
        result.final_mask_fraction,
        result.cost_trace.last().map(|e| e.iter).unwrap_or(0)
    );
    Ok(0)
}

fn is_decade(iter: usize) -> bool {
    matches!(iter, 1 | 10 | 100 | 1000 | 10_000 | 100_000)
}

fn cmd_synth(
    image: &Path,
    depth: &Path,
    pose: &str,
    intrinsics: &str,
    out_dir: &Path,
    noise: f64,
    seed: u64,
) -> Result<u8, Error> {
    let pose = load_pose(pose)?;
    let k = load_intrinsics(intrinsics)?;
    let base = io::read_image(image)?.to_gray()?;
    let base_depth = io::read_depth(depth)?;
    let pair = synth_pair(
        &base,
        &base_depth,
        &pose,
        &k,
        &SynthOptions {
            noise_sigma: noise,
            seed,
        },
    )?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    io::write_image(&pair.ref_image, out_dir.join("ref.pgm"))?;
    io::write_image(&pair.live_image, out_dir.join("live.pgm"))?;
    io::write_depth(&pair.depth, out_dir.join("depth.pfm"))?;
    io::write_mask(&pair.mask, out_dir.join("mask.pgm"))?;
    io::write_intrinsics(&k, out_dir.join("intrinsics.txt"))?;
    io::write_pose(&pair.ground_truth_pose, out_dir.join("pose_gt.txt"))?;
    eprintln!("wrote synthetic pair to {}", out_dir.display());
    Ok(0)
}
