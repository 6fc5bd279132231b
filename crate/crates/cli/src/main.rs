//! Command-line driver: data generation, calibration, evaluation and the
//! verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 numerical failure (non-convergence or divergence).

use clap::{Parser, Subcommand};
use polyconv_core::analytic::TiPotentialParams;
use polyconv_core::constitutive::{
    ConstitutiveModel, Scaling, Selector, VolTerm,
};
use polyconv_core::error::Error;
use polyconv_core::invariants::{CubStructuralTensor, TiStructuralTensor};
use polyconv_core::io;
use polyconv_core::laminate::{build_laminate_dataset, LaminateConfig, LoadPathKind};
use polyconv_core::network::Mlp;
use polyconv_core::sampling::{build_ti_dataset, linspace, SamplingPlan};
use polyconv_core::tensor::Vec3;
use polyconv_core::training::{train, DirectModel, TrainConfig, TrainableModel};
use polyconv_core::verify::{run_suite, Mutation, Suite};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "polyconv",
    about = "Polyconvex neural constitutive models for electro-elasticity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the analytic transversely isotropic potential into a dataset CSV.
    GenTi {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Cross all stretch samples with all electric amplitudes.
        #[arg(long)]
        full_grid: bool,
        /// Number of deviatoric directions.
        #[arg(long, default_value_t = 30)]
        dirs: usize,
        /// Number of deviatoric amplitudes.
        #[arg(long, default_value_t = 50)]
        amps: usize,
        /// Number of unit-sphere directions for the electric field.
        #[arg(long, default_value_t = 20)]
        sphere: usize,
        /// Number of electric amplitudes (defaults to --amps).
        #[arg(long)]
        d0_amps: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        amp_min: f64,
        #[arg(long, default_value_t = 1.0)]
        amp_max: f64,
        #[arg(long, default_value_t = 4.0)]
        d0_amp_max: f64,
        /// Volume ratio of the sampled stretches.
        #[arg(long, default_value_t = 1.0)]
        j: f64,
    },
    /// Homogenize the rank-one laminate along the load paths into a CSV.
    GenLaminate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        fm: f64,
        #[arg(long, default_value_t = 2.0)]
        fe: f64,
        #[arg(long, default_value_t = 0.5)]
        ca: f64,
        #[arg(long, default_value_t = 0.1)]
        mu2: f64,
        #[arg(long, default_value_t = 50.0)]
        lambda: f64,
        /// Which paths: the 10 calibration sweeps or the 2 test cases.
        #[arg(long, default_value = "calib")]
        paths: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Calibrate a model on a dataset CSV and write checkpoint + history.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Hidden layer sizes, comma separated (e.g. "8" or "16,16").
        #[arg(long, default_value = "8")]
        arch: String,
        /// Invariant set: iso, iso-ni, ti, ti-star, cub.
        #[arg(long, default_value = "ti")]
        selector: String,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        /// icnn (energy model) or ffnn (direct stress/field map).
        #[arg(long, default_value = "icnn")]
        kind: String,
        /// Volumetric penalty of the energy model.
        #[arg(long, default_value_t = 500.0)]
        alpha: f64,
        /// Volumetric term: compressible or nearly-incompressible.
        #[arg(long, default_value = "nearly-incompressible")]
        vol: String,
        /// Record the full-batch loss every N epochs.
        #[arg(long, default_value_t = 1)]
        eval_every: usize,
        /// History CSV path (defaults to <model-out>.history.csv).
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset and emit a comparison CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite; nonzero exit on any violated property.
    Verify {
        /// gradients, objectivity, symmetry, convexity or laminate.
        #[arg(long)]
        suite: String,
        /// Deliberate defect for the convexity suite: negated-weight or
        /// skip-projection.
        #[arg(long, default_value = "none")]
        mutate: String,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NonConvergence { .. } | Error::Divergence { .. } | Error::SingularSystem => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::GenTi {
            out,
            seed,
            full_grid,
            dirs,
            amps,
            sphere,
            d0_amps,
            amp_min,
            amp_max,
            d0_amp_max,
            j,
        } => {
            let plan = SamplingPlan {
                n_dev_dirs: dirs,
                dev_amps: linspace(amp_min, amp_max, amps),
                j_values: vec![j],
                n_sphere: sphere,
                d0_amps: linspace(0.0, d0_amp_max, d0_amps.unwrap_or(amps)),
                seed,
                full_grid,
            };
            let dataset = build_ti_dataset(&plan, &TiPotentialParams::default())?;
            io::write_dataset_csv(&out, &dataset)?;
            println!(
                "wrote {} rows in {} sub-datasets to {} (seed {})",
                dataset.n_rows(),
                dataset.n_paths(),
                out.display(),
                seed
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::GenLaminate {
            out,
            fm,
            fe,
            ca,
            mu2,
            lambda,
            paths,
            steps,
        } => {
            let kind = LoadPathKind::parse(&paths).ok_or_else(|| {
                Error::InvalidConfig(format!("unknown path set '{paths}' (calib|test)"))
            })?;
            let cfg = LaminateConfig {
                mu2,
                lambda,
                f_m: fm,
                f_e: fe,
                c_a: ca,
                ..Default::default()
            };
            let dataset = build_laminate_dataset(&cfg, kind, steps)?;
            io::write_dataset_csv(&out, &dataset)?;
            println!(
                "wrote {} rows in {} load paths to {}",
                dataset.n_rows(),
                dataset.n_paths(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            data,
            model_out,
            arch,
            selector,
            epochs,
            lr,
            seed,
            batch,
            restarts,
            kind,
            alpha,
            vol,
            eval_every,
            history_out,
        } => {
            let dataset = io::read_dataset_csv(&data)?;
            let hidden: Vec<usize> = arch
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidConfig(format!("bad architecture '{arch}'")))
                })
                .collect::<Result<_, _>>()?;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let model = match kind.as_str() {
                "icnn" => {
                    let sel = Selector::parse(&selector).ok_or_else(|| {
                        Error::InvalidConfig(format!("unknown selector '{selector}'"))
                    })?;
                    let term = VolTerm::parse(&vol).ok_or_else(|| {
                        Error::InvalidConfig(format!("unknown volumetric term '{vol}'"))
                    })?;
                    let mut sizes = vec![sel.invariants().len()];
                    sizes.extend_from_slice(&hidden);
                    sizes.push(1);
                    let net = Mlp::icnn(&sizes, &mut rng)?;
                    TrainableModel::Energy(ConstitutiveModel::new(
                        sel,
                        Some(TiStructuralTensor::new(Vec3::new(0.0, 0.0, 1.0))?),
                        Some(CubStructuralTensor::standard()),
                        net,
                        term,
                        alpha,
                        Scaling::unit(),
                    )?)
                }
                "ffnn" => {
                    let mut sizes = vec![12];
                    sizes.extend_from_slice(&hidden);
                    sizes.push(12);
                    let net = Mlp::ffnn(&sizes, &mut rng)?;
                    TrainableModel::Direct(DirectModel::new(net, Scaling::unit())?)
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown model kind '{other}' (icnn|ffnn)"
                    )))
                }
            };
            let mut cfg = TrainConfig::new(lr, epochs, batch, seed)?;
            cfg.restarts = restarts;
            cfg.eval_every = eval_every;
            let (trained, history) = train(&model, &dataset, &cfg)?;
            io::save_model(&model_out, &trained)?;
            let history_path = history_out.unwrap_or_else(|| {
                let mut p = model_out.clone();
                p.set_extension("history.csv");
                p
            });
            io::write_history_csv(&history_path, &history)?;
            println!("final log10 MSE = {:.6}", history.final_mse().log10());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { model, data, out } => {
            let model = io::load_model(&model)?;
            let dataset = io::read_dataset_csv(&data)?;
            let mse = io::write_eval_csv(&out, &model, &dataset)?;
            println!("log10 MSE = {:.6}", mse.log10());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, mutate } => {
            let suite = Suite::parse(&suite).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown suite '{suite}' (gradients|objectivity|symmetry|convexity|laminate)"
                ))
            })?;
            let mutation = Mutation::parse(&mutate).ok_or_else(|| {
                Error::InvalidConfig(format!("unknown mutation '{mutate}'"))
            })?;
            let reports = run_suite(suite, mutation)?;
            let mut all_passed = true;
            for r in &reports {
                let status = if r.passed { "PASS" } else { "FAIL" };
                println!(
                    "{status} {}: max deviation {:.3e} (tolerance {:.3e}){}",
                    r.name,
                    r.max_deviation,
                    r.tolerance,
                    r.detail
                        .as_ref()
                        .map(|d| format!(" [{d}]"))
                        .unwrap_or_default()
                );
                all_passed &= r.passed;
            }
            if all_passed {
                println!("suite {}: all {} checks passed", suite.name(), reports.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("suite {}: FAILED", suite.name());
                Ok(ExitCode::from(1))
            }
        }
    }
}
