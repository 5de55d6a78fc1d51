use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoferlab::crit::Verdict;
use hoferlab::flow::Stepper;
use hoferlab::scenarios::{registry_listing, run_scenario, write_outputs, ScenarioConfig};

#[derive(Parser)]
#[command(name = "hoferlab", version, about = "Hofer length and criticality of exact Lagrangian paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, length.csv, probes.csv and extrema.csv.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Print the scenario registry and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    scenario: Option<String>,
    /// Flat JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    phase: Option<f64>,
    #[arg(long)]
    tsamples: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_parser = parse_stepper)]
    stepper: Option<Stepper>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_stepper(s: &str) -> Result<Stepper, String> {
    match s {
        "rk4" => Ok(Stepper::Rk4),
        "midpoint" => Ok(Stepper::Midpoint),
        _ => Err(format!("unknown stepper '{s}' (rk4 or midpoint)")),
    }
}

impl RunArgs {
    fn config(&self) -> hoferlab::Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => ScenarioConfig::read(path)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(scenario, n, k, s, gap, amplitude, phase, tsamples, steps, stepper, budget, seed);
        if self.mesh.is_some() {
            c.mesh = self.mesh;
        }
        if self.config.is_none() && self.scenario.is_none() {
            return Err(hoferlab::Error::InvalidConfig("--scenario or --config is required".into()));
        }
        Ok(c)
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("HOFERLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(args: &RunArgs) -> hoferlab::Result<Verdict> {
    let cfg = args.config()?;
    let report = run_scenario(&cfg)?;
    if let Some(out) = &args.out {
        write_outputs(&report, out)?;
    }
    let c = &report.criticality;
    println!("scenario   {}", report.scenario);
    println!("length     {}", report.length.total);
    if let Some(e) = report.expected_length {
        println!("expected   {e}");
    }
    println!("verdict    {}", serde_json::to_string(&c.verdict)?.trim_matches('"'));
    println!("reason     {}", c.reason);
    if let Some(cert) = &c.certificate {
        println!("certificate {} decrease {} at s = {}", cert.id, cert.decrease, cert.s_star);
    }
    for note in &report.notes {
        println!("note       {note}");
    }
    println!("wall clock {:.3} s", report.wall_clock_seconds);
    Ok(c.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match cli.command {
        Command::Run(args) if args.list => {
            print!("{}", registry_listing());
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(&args) {
            Ok(Verdict::Inconclusive) => ExitCode::from(2),
            Ok(_) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
