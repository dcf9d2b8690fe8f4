use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bask::io::{
    read_bundle, read_manifest, records_from_csv, run_tracking, simulate, write_bundle, FilterKind, RunConfig,
};
use bask::metrics::{aggregate, Stat};
use bask::scene_sim::SCENARIO_NAMES;

#[derive(Parser)]
#[command(name = "bask", version, about = "Filter dense-correspondence keypoints over camera trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once
enum Command {
    /// Render a built-in scenario into a trajectory bundle.
    Simulate {
        /// Scenario name (symmetric_lid, rubbish_bin, occluder_pass).
        scenario: String,
        #[arg(long)]
        seed: u64,
        /// Output bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track every reference of a bundle and write `<out>.csv` and `<out>.json`.
    Track(TrackArgs),
    /// Aggregate a track CSV per timestep (mean and population std).
    Metrics {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = StatArg::GtError)]
        stat: StatArg,
    },
    /// Print a bundle manifest.
    Inspect { bundle: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    GtError,
    MeanModePx,
    NEff,
}

#[derive(Args)]
struct TrackArgs {
    bundle: PathBuf,
    #[arg(long)]
    filter: FilterKind,
    /// Mandatory for particle runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path stem.
    #[arg(long)]
    out: PathBuf,
    /// Correspondence temperature for every tracker.
    #[arg(long)]
    alpha: Option<f64>,
    /// Overrides --alpha for the discrete filter.
    #[arg(long)]
    discrete_alpha: Option<f64>,
    /// Overrides --alpha for the particle filter.
    #[arg(long)]
    particle_alpha: Option<f64>,
    /// Discrete filter random walk, pixels.
    #[arg(long)]
    sigma_r_px: Option<f64>,
    #[arg(long)]
    epsilon_floor: Option<f64>,
    #[arg(long)]
    particles: Option<usize>,
    /// Particle random walk per axis, meters.
    #[arg(long)]
    sigma_r: Option<f64>,
    #[arg(long)]
    p_w: Option<f64>,
    #[arg(long)]
    sigma_d: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    neff_frac: Option<f64>,
    #[arg(long)]
    p_inject: Option<f64>,
}

impl TrackArgs {
    fn config(&self) -> RunConfig {
        let mut c = RunConfig::new(self.filter);
        if let Some(a) = self.alpha {
            c = c.with_alpha(a);
        }
        c.seed = self.seed;
        let d = &mut c.discrete;
        let p = &mut c.particle;
        macro_rules! set {
            ($($src:ident => $dst:expr),*) => {$( if let Some(v) = self.$src { $dst = v; } )*};
        }
        set!(discrete_alpha => d.alpha, particle_alpha => p.alpha, sigma_r_px => d.sigma_r, epsilon_floor => d.epsilon_floor, particles => p.n_particles,
             sigma_r => p.sigma_r, p_w => p.p_w, sigma_d => p.sigma_d, epsilon => p.epsilon,
             tau => p.tau, neff_frac => p.neff_frac, p_inject => p.p_inject);
        c
    }
}

fn run(cli: Cli) -> bask::Result<()> {
    match cli.command {
        Command::Simulate { scenario, seed, out } => {
            let bundle = simulate(&scenario, seed)?;
            write_bundle(&bundle, &out)?;
            eprintln!(
                "wrote {} ({} frames, {} references) to {}",
                scenario,
                bundle.len(),
                bundle.manifest.references.len(),
                out.display()
            );
        }
        Command::Track(args) => {
            let cfg = args.config();
            if cfg.filter == FilterKind::Particle && cfg.seed.is_none() {
                return Err(bask::Error::InvalidArgument("--seed is required with --filter particle".into()));
            }
            eprintln!("config: {}", serde_json::to_string(&cfg)?);
            let bundle = read_bundle(&args.bundle)?;
            let out = run_tracking(&bundle, &cfg, Some(&args.out))?;
            for k in &out.report.keypoints {
                eprintln!(
                    "{:>12}  mean gt error {}",
                    k.keypoint,
                    k.mean_gt_error.map_or("-".into(), |e| format!("{e:.4} m"))
                );
            }
        }
        Command::Metrics { csv, stat } => {
            let records = records_from_csv(File::open(&csv)?)?;
            let stat = match stat {
                StatArg::GtError => Stat::GtError,
                StatArg::MeanModePx => Stat::MeanModePx,
                StatArg::NEff => Stat::NEff,
            };
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for row in aggregate(&records, stat)? {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Command::Inspect { bundle } => {
            let m = read_manifest(&bundle)?;
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &m)?;
            match writeln!(stdout) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let bask::Error::UnknownScenario { .. } = e {
                eprintln!("scenarios: {}", SCENARIO_NAMES.join(", "));
            }
            ExitCode::FAILURE
        }
    }
}
