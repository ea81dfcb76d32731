//! `njcr`: hyperspectral anomaly detection from the command line.

mod config;
mod error;
mod run;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use njcr_core::pipeline::{Method, PipelineParams};
use njcr_core::segmentation::Connectivity;
use njcr_core::solver::Kernel;
use njcr_core::synthetic::SceneParams;

use config::PipelineConfig;
use error::{CliError, CliResult, EXIT_OK};
use stages::{DetectJob, EvalFiles};

#[derive(Parser)]
#[command(name = "njcr", version, about = "Hyperspectral anomaly detection by NJCR/KNJCR")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with implanted target panels.
    Synth(SynthArgs),
    /// Over-segment a cube into superpixels.
    Segment(SegmentArgs),
    /// Build the union dictionary.
    Dict(DictArgs),
    /// Score every pixel with RX, NJCR or KNJCR.
    Detect(DetectArgs),
    /// Evaluate a score map against ground truth.
    Eval(EvalArgs),
    /// Run the whole pipeline from a JSON config.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for scene.cube, scene.mask and scene.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Scene parameters as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    materials: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnectivityArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Args)]
struct SegmentationFlags {
    /// Requested superpixel count.
    #[arg(long)]
    superpixels: Option<usize>,
    /// Edge-weight scale (default: median adjacent distance).
    #[arg(long)]
    sigma_g: Option<f64>,
    #[arg(long, value_enum)]
    connectivity: Option<ConnectivityArg>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    cube: PathBuf,
    /// Output label raster.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG of superpixel boundaries.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    seg: SegmentationFlags,
}

#[derive(Args)]
struct DictionaryFlags {
    /// Background samples per superpixel.
    #[arg(long)]
    m: Option<usize>,
    /// Anomaly samples from the RX ranking.
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Args)]
struct DictArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// RX scores; computed from the cube when absent.
    #[arg(long)]
    rx: Option<PathBuf>,
    /// Output directory for dictionary.cube and dictionary.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    rx_ridge: Option<f64>,
    #[command(flatten)]
    dict: DictionaryFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rx,
    Njcr,
    Knjcr,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rx => Method::Rx,
            MethodArg::Njcr => Method::Njcr,
            MethodArg::Knjcr => Method::Knjcr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// RBF kernel width.
    #[arg(long)]
    sigma: Option<f64>,
    /// Drop the nonnegativity constraint.
    #[arg(long)]
    no_nonnegative: bool,
    /// Drop the sum-to-one constraint.
    #[arg(long)]
    no_sum_to_one: bool,
    /// Solve against the background sub-dictionary only.
    #[arg(long)]
    background_only: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long, value_enum, default_value = "njcr")]
    method: MethodArg,
    /// Directory holding dictionary.cube and dictionary.json.
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Output score raster.
    #[arg(long)]
    out: PathBuf,
    /// Also write `pixel_index,row,col,score` CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Convergence report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    rx_ridge: Option<f64>,
    /// Exit with an error when the solver hits max-iter.
    #[arg(long)]
    fail_on_nonconvergence: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Output directory for roc.json, roc.csv, separability.csv, roc.svg.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cube: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Generate the default synthetic scene as input.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    rx_ridge: Option<f64>,
    #[arg(long)]
    fail_on_nonconvergence: bool,
    #[command(flatten)]
    seg: SegmentationFlags,
    #[command(flatten)]
    dict: DictionaryFlags,
    #[command(flatten)]
    solver: SolverFlags,
}

impl SegmentationFlags {
    fn apply(&self, p: &mut njcr_core::SegmentParams) {
        if let Some(s) = self.superpixels {
            p.target_count = s;
        }
        if let Some(s) = self.sigma_g {
            p.sigma_g = Some(s);
        }
        if let Some(c) = self.connectivity {
            p.connectivity = match c {
                ConnectivityArg::Four => Connectivity::Four,
                ConnectivityArg::Eight => Connectivity::Eight,
            };
        }
        if let Some(s) = self.seed {
            p.seed = s;
        }
    }
}

impl DictionaryFlags {
    fn apply(&self, p: &mut njcr_core::DictionaryParams) {
        if let Some(m) = self.m {
            p.m_per_superpixel = m;
        }
        if let Some(n) = self.p {
            p.p_anomaly = n;
        }
    }
}

impl SolverFlags {
    fn apply(&self, params: &mut PipelineParams) {
        let s = &mut params.solver;
        if let Some(v) = self.lambda {
            s.lambda = v;
        }
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if let Some(v) = self.eps {
            s.epsilon = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        let sigma = match s.kernel {
            Kernel::Rbf { sigma } => sigma,
            Kernel::Linear => 4.0,
        };
        match self.kernel {
            Some(KernelArg::Linear) => s.kernel = Kernel::Linear,
            Some(KernelArg::Rbf) => s.kernel = Kernel::Rbf { sigma },
            None => {}
        }
        if let (Some(sigma), Kernel::Rbf { .. }) = (self.sigma, s.kernel) {
            s.kernel = Kernel::Rbf { sigma };
        }
        if self.no_nonnegative {
            s.constraints.nonnegative = false;
        }
        if self.no_sum_to_one {
            s.constraints.sum_to_one = false;
        }
        if self.background_only {
            params.background_only = true;
        }
    }
}

fn synth(args: SynthArgs) -> CliResult<()> {
    let mut params: SceneParams = match &args.config {
        Some(path) => stages::read_json(path)?,
        None => SceneParams::default(),
    };
    let bg = &mut params.background;
    if let Some(v) = args.seed {
        bg.seed = v;
    }
    if let Some(v) = args.width {
        bg.width = v;
    }
    if let Some(v) = args.height {
        bg.height = v;
    }
    if let Some(v) = args.bands {
        bg.bands = v;
    }
    if let Some(v) = args.materials {
        bg.materials = v;
    }
    if let Some(v) = args.noise {
        bg.noise_std = v;
    }
    let dir = &args.out_dir;
    let prov = stages::synth(
        &params,
        &dir.join("scene.cube"),
        &dir.join("scene.mask"),
        &dir.join("scene.json"),
    )?;
    println!(
        "wrote {}x{}x{} scene with {} anomalous pixels to {}",
        params.background.width,
        params.background.height,
        params.background.bands,
        prov.anomalous_pixels,
        dir.display()
    );
    Ok(())
}

fn segment(args: SegmentArgs) -> CliResult<()> {
    let mut params = njcr_core::SegmentParams::default();
    args.seg.apply(&mut params);
    let count = stages::segment_cube(&args.cube, &params, &args.out, args.svg.as_deref())?;
    println!("{count} superpixels");
    Ok(())
}

fn dict(args: DictArgs) -> CliResult<()> {
    let mut params = njcr_core::DictionaryParams::default();
    args.dict.apply(&mut params);
    let rx_path = match &args.rx {
        Some(p) => p.clone(),
        None => {
            let path = args.out_dir.join("rx.scores");
            let ridge = args.rx_ridge.unwrap_or(PipelineParams::default().rx_ridge);
            stages::rx(&args.cube, ridge, &path)?;
            path
        }
    };
    let m = stages::dict(
        &args.cube,
        &args.labels,
        &rx_path,
        &params,
        &args.out_dir.join("dictionary.cube"),
        &args.out_dir.join("dictionary.json"),
    )?;
    println!(
        "dictionary: {} background + {} anomaly atoms",
        m.k_background, m.k_anomaly
    );
    Ok(())
}

fn detect(args: DetectArgs) -> CliResult<()> {
    let mut params = PipelineParams::default();
    args.solver.apply(&mut params);
    if let Some(r) = args.rx_ridge {
        params.rx_ridge = r;
    }
    params
        .solver
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dict_files = args
        .dict
        .as_ref()
        .map(|d| (d.join("dictionary.cube"), d.join("dictionary.json")));
    let job = DetectJob {
        cube: &args.cube,
        method: args.method.into(),
        dictionary: dict_files
            .as_ref()
            .map(|(a, m)| (a.as_path(), m.as_path())),
        solver: &params.solver,
        background_only: params.background_only,
        rx_ridge: params.rx_ridge,
        scores: &args.out,
        csv: args.csv.as_deref(),
        report: args.report.as_deref(),
    };
    if let Some(report) = stages::detect(&job)? {
        println!(
            "{} iterations, converged: {}, primal {:.3e}, dual {:.3e}",
            report.iterations, report.converged, report.primal_residual, report.dual_residual
        );
        if args.fail_on_nonconvergence && !report.converged {
            return Err(CliError::NotConverged {
                iterations: report.iterations,
            });
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult<()> {
    let ev = stages::eval(&args.scores, &args.mask, &EvalFiles::in_dir(&args.out_dir))?;
    println!(
        "AUC(Pd,Pf) {:.4}  AUC(Pf,tau) {:.4}  gap {:.4}",
        ev.roc.auc_pd_pf,
        ev.roc.auc_pf_tau,
        ev.separability.gap()
    );
    Ok(())
}

fn run(args: RunArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(c) = args.cube {
        cfg.cube = Some(c);
        cfg.synthetic = None;
    }
    if let Some(m) = args.mask {
        cfg.mask = Some(m);
    }
    if args.synthetic {
        cfg.cube = None;
        cfg.synthetic.get_or_insert_with(SceneParams::default);
    }
    if let Some(d) = args.out_dir {
        cfg.output_dir = d;
    }
    if let Some(m) = args.method {
        cfg.params.method = m.into();
    }
    if let Some(r) = args.rx_ridge {
        cfg.params.rx_ridge = r;
    }
    if args.fail_on_nonconvergence {
        cfg.fail_on_nonconvergence = true;
    }
    args.seg.apply(&mut cfg.params.segmentation);
    args.dict.apply(&mut cfg.params.dictionary);
    args.solver.apply(&mut cfg.params);

    let summary = run::run(&cfg)?;
    if let Some(e) = &summary.evaluation {
        println!(
            "{:?}: AUC(Pd,Pf) {:.4}  AUC(Pf,tau) {:.4}",
            summary.method, e.auc_pd_pf, e.auc_pf_tau
        );
    }
    if let Some(e) = &summary.rx_baseline {
        println!("RX baseline: AUC(Pd,Pf) {:.4}", e.auc_pd_pf);
    }
    println!("summary: {}", cfg.output_dir.join("summary.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(error::EXIT_CONFIG);
        }
    }
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Segment(a) => segment(a),
        Command::Dict(a) => dict(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
