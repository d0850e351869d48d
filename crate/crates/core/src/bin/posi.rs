use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use posi::binreg::{ci_bin, naive_ci_bin};
use posi::constants::{b_alpha, k_quantile, CorrelationMatrix, DEFAULT_B_TOL, DEFAULT_DRAWS};
use posi::design::read_response_path;
use posi::hetlm::ci_hlm;
use posi::lm::{ci_individual, ci_lm, posi_constant_lm, xi_matrix};
use posi::sim::{load_scenarios, presets, run_scenario, sidecar_json, write_csv, ScenarioConfig};
use posi::{CandidateModel, CandidateSet, DesignMatrix, PosiError};

#[derive(Parser)]
#[command(name = "posi", version, about = "Confidence intervals valid after model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical values K and B.
    #[command(subcommand)]
    Constant(ConstantCmd),
    /// Homoskedastic linear models.
    #[command(subcommand)]
    Lm(LmCmd),
    /// Heteroskedastic linear models (Eicker sandwich).
    #[command(subcommand)]
    Hetlm(HetlmCmd),
    /// Binary regression.
    #[command(subcommand)]
    Bin(BinCmd),
    /// Run coverage simulations and write a CSV report.
    Simulate(SimulateArgs),
    /// Shipped simulation scenarios.
    #[command(subcommand)]
    Presets(PresetsCmd),
}

#[derive(Subcommand)]
enum ConstantCmd {
    /// Monte Carlo quantile of max |Z| for Z ~ N(0, corr).
    KQuantile {
        /// Headerless k × k correlation CSV.
        #[arg(long)]
        corr: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Universal upper bound B_α(q, N).
    BAlpha {
        #[arg(long)]
        q: usize,
        #[arg(long = "big-n")]
        big_n: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_B_TOL)]
        tol: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Design CSV with a header row of column names.
    #[arg(long)]
    design: PathBuf,
    /// Response values, one per line.
    #[arg(long)]
    response: PathBuf,
    /// Candidate set JSON, {"models":[{"indices":[...]}, ...]}.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
}

impl DataArgs {
    fn load(&self) -> posi::Result<(DesignMatrix, nalgebra::DVector<f64>, CandidateSet)> {
        Ok((
            DesignMatrix::from_csv_path(&self.design)?,
            read_response_path(&self.response)?,
            CandidateSet::from_json_path(&self.candidates)?,
        ))
    }
}

#[derive(Subcommand)]
enum LmCmd {
    /// Intervals for the coefficients of the selected model.
    Ci {
        #[command(flatten)]
        data: DataArgs,
        /// Selected model as 1-based indices, e.g. "1,3".
        #[arg(long)]
        selected: String,
        /// Cover one coefficient shared by all candidates, using K(corr(Ξ)).
        #[arg(long)]
        individual: bool,
        /// Column (1-based) for --individual; defaults to the first column common to all candidates.
        #[arg(long)]
        column: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum HetlmCmd {
    Ci {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        selected: String,
    },
}

#[derive(Subcommand)]
enum BinCmd {
    Ci {
        #[command(flatten)]
        data: DataArgs,
        /// "1,2" or JSON such as '{"indices":[1,2],"link":"probit"}'.
        #[arg(long)]
        selected: String,
        /// Normal-quantile intervals with the model-based variance instead.
        #[arg(long)]
        naive: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON (one object or a list).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Preset group or scenario id instead of --config.
    #[arg(long)]
    preset: Option<String>,
    /// CSV report path; the JSON sidecar goes next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Override the replication count of every scenario.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum PresetsCmd {
    /// List preset groups and scenario ids.
    List,
    /// Print the scenario JSON for a group or id.
    Show { name: String },
}

fn print_json<T: Serialize>(v: &T) -> posi::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| {
        if e.is_io() {
            PosiError::Io(e.into())
        } else {
            e.into()
        }
    })?;
    writeln!(out)?;
    Ok(())
}

fn parse_selected(s: &str) -> posi::Result<CandidateModel> {
    let t = s.trim();
    if t.starts_with('{') {
        Ok(serde_json::from_str(t)?)
    } else {
        CandidateModel::parse_one_based(t)
    }
}

fn constant(cmd: ConstantCmd) -> posi::Result<()> {
    match cmd {
        ConstantCmd::KQuantile { corr, alpha, draws, seed } => {
            print_json(&k_quantile(&CorrelationMatrix::from_csv_path(corr)?, alpha, draws, seed)?)
        }
        ConstantCmd::BAlpha { q, big_n, alpha, tol } => print_json(&b_alpha(q, big_n, alpha, tol)?),
    }
}

fn lm(cmd: LmCmd) -> posi::Result<()> {
    let LmCmd::Ci { data, selected, individual, column, draws, seed } = cmd;
    let (x, y, cands) = data.load()?;
    let selected = parse_selected(&selected)?;
    if !individual {
        let k = posi_constant_lm(&x, &cands, data.alpha, draws, seed)?;
        return print_json(&ci_lm(&x, &y, &cands, data.alpha, &selected, &k)?);
    }
    let column = match column {
        Some(0) => return Err(PosiError::InvalidInput("--column is 1-based".into())),
        Some(c) => c - 1,
        None => (0..x.p())
            .find(|&j| cands.models().iter().all(|m| m.contains(j)))
            .ok_or_else(|| PosiError::InvalidInput("no column is shared by every candidate".into()))?,
    };
    let xi = k_quantile(&xi_matrix(&x, &cands, column)?, data.alpha, draws, seed)?;
    print_json(&ci_individual(&x, &y, &cands, data.alpha, &selected, column, &xi)?)
}

fn hetlm(cmd: HetlmCmd) -> posi::Result<()> {
    let HetlmCmd::Ci { data, selected } = cmd;
    let (x, y, cands) = data.load()?;
    print_json(&ci_hlm(&x, &y, &cands, data.alpha, &parse_selected(&selected)?)?)
}

fn bin(cmd: BinCmd) -> posi::Result<()> {
    let BinCmd::Ci { data, selected, naive } = cmd;
    let (x, y, cands) = data.load()?;
    let selected = parse_selected(&selected)?;
    if naive {
        print_json(&naive_ci_bin(&x, &y, &cands, data.alpha, &selected)?)
    } else {
        print_json(&ci_bin(&x, &y, &cands, data.alpha, &selected)?)
    }
}

fn presets_cmd(cmd: PresetsCmd) -> posi::Result<()> {
    match cmd {
        PresetsCmd::List => {
            let mut out = io::stdout().lock();
            for g in &presets::GROUPS {
                writeln!(out, "{:<8} {}", g.name, g.description)?;
                for c in (g.scenarios)() {
                    writeln!(out, "    {}", c.scenario_id)?;
                }
            }
            Ok(())
        }
        PresetsCmd::Show { name } => match presets::find(&name) {
            Some(list) => print_json(&list),
            None => Err(PosiError::InvalidInput(format!("unknown preset '{name}'"))),
        },
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Config problems map to exit code 2, everything else to 1.
enum Failure {
    Config(PosiError),
    Run(PosiError),
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut scenarios: Vec<ScenarioConfig> = match (&args.config, &args.preset) {
        (Some(path), _) => load_scenarios(path).map_err(Failure::Config)?,
        (None, Some(name)) => presets::find(name)
            .ok_or_else(|| Failure::Config(PosiError::InvalidInput(format!("unknown preset '{name}'"))))?,
        (None, None) => unreachable!("clap requires one of --config/--preset"),
    };
    if let Some(r) = args.reps {
        for c in &mut scenarios {
            c.reps = r;
        }
    }
    for c in &scenarios {
        c.validate().map_err(Failure::Config)?;
    }
    let run = || -> posi::Result<Vec<_>> {
        let mut reports = Vec::with_capacity(scenarios.len());
        for c in &scenarios {
            let r = run_scenario(c)?;
            eprintln!("{}: {} reps in {:.1?}", c.scenario_id, c.reps, r.wall_time);
            reports.push(r);
        }
        Ok(reports)
    };
    let reports = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::Config(PosiError::InvalidInput(format!("--threads: {e}"))))?
            .install(run),
        None => run(),
    }
    .map_err(Failure::Run)?;
    let write = || -> posi::Result<()> {
        write_csv(&reports, BufWriter::new(File::create(&args.out)?))?;
        std::fs::write(sidecar_path(&args.out), sidecar_json(&reports)? + "\n")?;
        Ok(())
    };
    write().map_err(Failure::Run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Constant(c) => constant(c),
        Command::Lm(c) => lm(c),
        Command::Hetlm(c) => hetlm(c),
        Command::Bin(c) => bin(c),
        Command::Presets(c) => presets_cmd(c),
        Command::Simulate(a) => match simulate(a) {
            Ok(()) => Ok(()),
            Err(Failure::Config(e)) => {
                eprintln!("posi: config error: {e}");
                return ExitCode::from(2);
            }
            Err(Failure::Run(e)) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(PosiError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("posi: {e}");
            ExitCode::FAILURE
        }
    }
}
