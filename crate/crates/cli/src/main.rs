use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use qsw::cache::DiskCache;
use qsw::experiments::{
    self, default_checkpoints, dirac_truth, replicate_seeds, ApproxError, DiscrepancyCurve, GenPoints, InstantClock,
    IntervalRequest, Reference, SetRandomization,
};
use qsw::ppm::{palette_csv, read_ppm, write_ppm};
use qsw::report::{Format, Report};
use qsw::text::{format_pointset, read_cloud, write_cloud, write_text};
use qsw::{CliError, Result};
use qsw_core::flows::FlowConfig;
use qsw_core::ot1d::PointCloud;
use qsw_core::rng::{derive_seed, stream};
use qsw_core::sphere::{Construction, OptimizerConfig};
use qsw_core::sw::{EstimatorSpec, IntervalMethod, Scheme};
use qsw_core::synth;

#[derive(Parser)]
#[command(name = "qsw", version, about = "Sliced Wasserstein distances with quasi-Monte Carlo directions")]
struct Cli {
    /// Point-set cache directory (default: $QSW_CACHE_DIR, then the user cache directory).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a spherical point set and print its cap discrepancy.
    GenPoints(GenPointsArgs),
    /// Estimate SW_p^p between two clouds, optionally with a confidence interval.
    Estimate(EstimateArgs),
    /// Exact W2 between two equal-size clouds.
    W2(W2Args),
    /// Absolute error of MC and QSW estimates against a reference value.
    ApproxError(ApproxErrorArgs),
    /// Euler flow from a source cloud to a target cloud.
    Interpolate(InterpolateArgs),
    /// Palette color transfer between two PPM images.
    StyleTransfer(StyleTransferArgs),
    /// Cap discrepancy of constructions over a grid of sizes.
    DiscrepancyCurve(DiscrepancyCurveArgs),
    /// Write a synthetic point cloud.
    Synth(SynthArgs),
    /// Precompute the optimized point sets into the cache.
    WarmCache(WarmCacheArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = Format::from_str)]
    format: Format,
}

#[derive(Args, Clone, Copy)]
struct Optimizer {
    /// Iteration budget of the energy optimizers (max_distance, min_coulomb).
    #[arg(long, default_value_t = OptimizerConfig::default().iterations)]
    opt_iterations: usize,
}

impl Optimizer {
    fn config(self) -> OptimizerConfig {
        OptimizerConfig { iterations: self.opt_iterations, ..OptimizerConfig::default() }
    }
}

fn parse_construction(s: &str) -> std::result::Result<Construction, String> {
    Construction::from_name(s).ok_or_else(|| {
        format!("unknown construction `{s}` (gaussian_map, equal_area, spiral, max_distance, min_coulomb, random_uniform, scaled_map_baseline)")
    })
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    Scheme::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct GenPointsArgs {
    #[arg(long, value_parser = parse_construction)]
    construction: Construction,
    #[arg(long = "L")]
    len: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value = "none", value_parser = SetRandomization::from_str)]
    randomization: SetRandomization,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    optimizer: Optimizer,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long = "L", default_value_t = 100)]
    len: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// RQSW replicates for a confidence interval.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap resamples; CLT interval when absent.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[command(flatten)]
    optimizer: Optimizer,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct W2Args {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ApproxErrorArgs {
    #[arg(long, required_unless_present = "dirac")]
    a: Option<PathBuf>,
    #[arg(long, required_unless_present = "dirac")]
    b: Option<PathBuf>,
    /// Compare diracs at the origin and at (1, 0, 0) against the closed form.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    dirac: bool,
    #[arg(long = "L", value_delimiter = ',', default_value = "10,100,500,1000")]
    grid: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    reference_l: usize,
    /// Master seed for the Monte Carlo runs and the reference.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of Monte Carlo seeds.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_delimiter = ',', value_parser = parse_construction,
          default_value = "gaussian_map,equal_area,spiral,max_distance,min_coulomb")]
    construction: Vec<Construction>,
    #[command(flatten)]
    optimizer: Optimizer,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long = "L", default_value_t = 100)]
    len: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint steps; five evenly spaced steps when absent.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[command(flatten)]
    optimizer: Optimizer,
}

impl FlowArgs {
    fn config(&self, steps: usize, eta: f64) -> FlowConfig {
        let spec = EstimatorSpec {
            p: self.p,
            projections: self.len,
            scheme: self.scheme,
            seed: self.seed,
            optimizer: self.optimizer.config(),
        };
        let checkpoints = self.checkpoints.clone().unwrap_or_else(|| default_checkpoints(steps));
        FlowConfig::new(steps, eta, spec).with_checkpoints(checkpoints)
    }
}

#[derive(Args)]
struct InterpolateArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    flow: FlowArgs,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Directory receiving `w2.<format>` and one `step_<t>.xyz` per checkpoint.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = Format::from_str)]
    format: Format,
}

#[derive(Args)]
struct StyleTransferArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    flow: FlowArgs,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Palette size.
    #[arg(long, default_value_t = 3000)]
    k: usize,
    /// Output image.
    #[arg(long)]
    out: PathBuf,
    /// Write P3 (ASCII) instead of P6.
    #[arg(long)]
    ascii: bool,
    /// Report file; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Final palette as CSV.
    #[arg(long)]
    palette: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = Format::from_str)]
    format: Format,
}

#[derive(Args)]
struct DiscrepancyCurveArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_construction,
          default_value = "gaussian_map,equal_area,spiral,max_distance,min_coulomb,random_uniform")]
    construction: Vec<Construction>,
    #[arg(long = "L", value_delimiter = ',', default_value = "10,50,100,500")]
    grid: Vec<usize>,
    /// Seeds for random_uniform (median reported).
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    optimizer: Optimizer,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SynthKind {
    Blobs,
    Sphere,
    Torus,
    Cube,
    Dirac,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of blobs.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Multiplies every coordinate.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WarmCacheArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_construction, default_value = "max_distance,min_coulomb")]
    construction: Vec<Construction>,
    #[arg(long = "L", value_delimiter = ',', default_value = "10,50,100,500,1000")]
    grid: Vec<usize>,
    #[command(flatten)]
    optimizer: Optimizer,
    #[command(flatten)]
    output: Output,
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn emit(report: &Report, output: &Output) -> Result<()> {
    emit_text(output.out.as_deref(), &report.render(output.format))
}

fn run(cli: Cli) -> Result<()> {
    let mut cache = cli.cache_dir.map_or_else(DiskCache::from_env, DiskCache::new);
    let started = Instant::now();
    match cli.command {
        Command::GenPoints(a) => {
            let cfg = GenPoints {
                construction: a.construction,
                dim: a.dim,
                len: a.len,
                randomization: a.randomization,
                seed: a.seed,
                optimizer: a.optimizer.config(),
            };
            let g = experiments::gen_points(&cfg, &mut cache)?;
            emit_text(a.out.as_deref(), &format_pointset(&g.set, g.config_hash))?;
            if let Some(d) = g.discrepancy {
                match a.out {
                    Some(_) => println!("spherical_cap_discrepancy={d}"),
                    None => eprintln!("spherical_cap_discrepancy={d}"),
                }
            }
        }
        Command::Estimate(a) => {
            let (x, y) = (read_cloud(&a.a)?, read_cloud(&a.b)?);
            let spec = EstimatorSpec {
                p: a.p,
                projections: a.len,
                scheme: a.scheme,
                seed: a.seed,
                optimizer: a.optimizer.config(),
            };
            let interval = a.replicates.map(|replicates| IntervalRequest {
                replicates,
                alpha: a.alpha,
                method: a.bootstrap.map_or(IntervalMethod::Clt, |resamples| IntervalMethod::Bootstrap { resamples }),
            });
            let mut report = experiments::estimate(&x, &y, &spec, interval, &mut cache)?;
            report.config("a", a.a.display().to_string()).config("b", a.b.display().to_string());
            emit(&report, &a.output)?;
        }
        Command::W2(a) => {
            let mut report = experiments::exact_w2(&read_cloud(&a.a)?, &read_cloud(&a.b)?)?;
            report.config("a", a.a.display().to_string()).config("b", a.b.display().to_string());
            emit(&report, &a.output)?;
        }
        Command::ApproxError(a) => {
            let (x, y, reference) = if a.dirac {
                let (x, y) = synth::dirac_pair([1.0, 0.0, 0.0]);
                (x, y, Reference::ClosedForm(dirac_truth([1.0, 0.0, 0.0], a.p)))
            } else {
                let (pa, pb) = (a.a.as_ref().expect("clap"), a.b.as_ref().expect("clap"));
                let reference =
                    Reference::MonteCarlo { projections: a.reference_l, seed: derive_seed(a.seed, stream::REFERENCE) };
                (read_cloud(pa)?, read_cloud(pb)?, reference)
            };
            let cfg = ApproxError {
                p: a.p,
                grid: a.grid,
                reference,
                mc_seeds: replicate_seeds(a.seed, a.seeds),
                constructions: a.construction,
                optimizer: a.optimizer.config(),
            };
            let mut report = experiments::approx_error(&x, &y, &cfg, &mut cache)?;
            report.config("master_seed", a.seed);
            match (&a.a, &a.b) {
                (Some(pa), Some(pb)) => {
                    report.config("a", pa.display().to_string()).config("b", pb.display().to_string());
                }
                _ => {
                    report.config("dirac", true);
                }
            }
            emit(&report, &a.output)?;
        }
        Command::Interpolate(a) => {
            let (x, y) = (read_cloud(&a.source)?, read_cloud(&a.target)?);
            let cfg = a.flow.config(a.steps, a.eta);
            let (mut report, trace) = experiments::interpolate(&x, &y, &cfg, &mut cache, &mut InstantClock::new())?;
            report.config("source", a.source.display().to_string()).config("target", a.target.display().to_string());
            for c in &trace.checkpoints {
                write_cloud(&a.out.join(format!("step_{:05}.xyz", c.step)), &c.points)?;
            }
            write_text(&a.out.join(format!("w2.{}", a.format)), &report.render(a.format))?;
            let total: u64 = trace.step_nanos.iter().sum();
            eprintln!("{} steps in {:.3} s", trace.step_nanos.len(), total as f64 * 1e-9);
        }
        Command::StyleTransfer(a) => {
            let (src, tgt) = (read_ppm(&a.source)?, read_ppm(&a.target)?);
            let cfg = a.flow.config(a.steps, a.eta);
            let kmeans_seed = derive_seed(a.flow.seed.unwrap_or(0), stream::KMEANS);
            let (mut report, out) =
                experiments::style_transfer(&src, &tgt, &cfg, a.k, kmeans_seed, &mut cache, &mut InstantClock::new())?;
            report.config("source", a.source.display().to_string()).config("target", a.target.display().to_string());
            write_ppm(&a.out, &out.image, a.ascii)?;
            if let Some(path) = &a.palette {
                write_text(path, &palette_csv(&out.final_palette))?;
            }
            emit_text(a.report.as_deref(), &report.render(a.format))?;
        }
        Command::DiscrepancyCurve(a) => {
            let seeds = (0..a.seeds as u64).map(|i| derive_seed(a.seed, stream::REPLICATE + i)).collect();
            let cfg = DiscrepancyCurve {
                constructions: a.construction,
                grid: a.grid,
                random_seeds: seeds,
                optimizer: a.optimizer.config(),
            };
            let mut report = experiments::discrepancy_curve(&cfg, &mut cache)?;
            report.config("master_seed", a.seed);
            emit(&report, &a.output)?;
        }
        Command::Synth(a) => {
            let cloud: PointCloud = match a.kind {
                SynthKind::Blobs => synth::gaussian_blobs(a.n, a.dim, a.k, a.seed)?,
                SynthKind::Sphere => synth::sphere_shell(a.n, 1.0, a.seed)?,
                SynthKind::Torus => synth::torus(a.n, 1.0, 0.3, a.seed)?,
                SynthKind::Cube => synth::uniform_cube(a.n, a.seed)?,
                SynthKind::Dirac => synth::dirac_pair([1.0, 0.0, 0.0]).1,
            };
            let text = qsw::text::format_cloud(&cloud.scaled(a.scale));
            emit_text(a.out.as_deref(), &text)?;
        }
        Command::WarmCache(a) => {
            let report = experiments::warm_cache(&a.construction, &a.grid, &a.optimizer.config(), &mut cache)?;
            emit(&report, &a.output)?;
            eprintln!(
                "cache {}: {} hits, {} built in {:.1} s",
                cache.dir().display(),
                cache.hits,
                cache.misses,
                started.elapsed().as_secs_f64()
            );
        }
    }
    for e in &cache.write_errors {
        eprintln!("warning: could not write cache file {e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
