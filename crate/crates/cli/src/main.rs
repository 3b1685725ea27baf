use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twistbad_cli::commands::{cmd_game, cmd_lambda, cmd_pipeline, cmd_quality, cmd_transfer};
use twistbad_cli::error::exit;
use twistbad_cli::{CliError, ExperimentConfig, Outcome};
use twistbad_core::quality::QualityKind;

#[derive(Parser, Debug)]
#[command(name = "twistbad", version, about = "Weighted twisted badly approximable points: experiments and certificates")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working precision in decimal digits (at least 30).
    #[arg(long, global = true)]
    digits: Option<u32>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for JSON and CSV artifacts; JSON goes to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Matrix rows split by ';', entries by ','. Example: "sqrt(2);sqrt(3)".
    #[arg(long, global = true)]
    theta: Option<String>,
    /// Weights, comma separated. Example: "2/3,1/3".
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<String>>,
    #[arg(long, global = true)]
    enumeration_budget: Option<u64>,
    #[arg(long, global = true)]
    game_budget: Option<u64>,
    #[arg(long, global = true)]
    transfer_budget: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exhaustive lower estimate of a quality functional.
    Quality(QualityArgs),
    /// Plays Alice's strategy against Bob and reports the witness.
    Game(GameArgs),
    /// Builds the lattice sequence with all its checks.
    Lambda(LambdaArgs),
    /// Verifies the transference chain at a target point.
    Transfer {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[command(flatten)]
        transfer: TransferArgs,
    },
    /// Certificate, game witness, sequence and transference in one run.
    Pipeline {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        lambda: LambdaArgs,
        #[command(flatten)]
        transfer: TransferArgs,
    },
}

#[derive(Args, Debug)]
struct QualityArgs {
    /// homogeneous, dual or twisted; repeatable.
    #[arg(long = "kind")]
    kinds: Vec<QualityKind>,
    /// Search range `0 < |q| <= Q`.
    #[arg(long = "Q")]
    q_range: Option<u64>,
    /// Target for the twisted functional, comma separated.
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct GameArgs {
    /// identity, parabola, cubic, or a JSON curve object.
    #[arg(long)]
    curve: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    depth: Option<u32>,
    /// center, seeded_random or adversary.
    #[arg(long)]
    bob: Option<String>,
    #[arg(long)]
    certificate_q: Option<u64>,
    #[arg(long)]
    epsilon: Option<String>,
    /// `lo,hi` of the first ball.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    b0: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct LambdaArgs {
    /// JSON subspace object.
    #[arg(long)]
    subspace: Option<String>,
    #[arg(long)]
    gamma_q: Option<u64>,
    #[arg(long)]
    r_max: Option<usize>,
}

#[derive(Args, Debug)]
struct TransferArgs {
    /// Target point, comma separated.
    #[arg(long = "target", value_delimiter = ',')]
    target: Option<Vec<String>>,
    #[arg(long)]
    q_max: Option<u64>,
    /// `q0` of the orbit control, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    negative_control_q: Option<Vec<i64>>,
}

fn parse_json(text: &str, what: &str) -> Result<serde_json::Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl CommonArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.digits {
            cfg.digits = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = &self.theta {
            cfg.theta = v.clone();
        }
        if let Some(v) = &self.k {
            cfg.k = v.clone();
        }
        if let Some(v) = self.enumeration_budget {
            cfg.budgets.enumeration = v;
        }
        if let Some(v) = self.game_budget {
            cfg.budgets.game = v;
        }
        if let Some(v) = self.transfer_budget {
            cfg.budgets.transfer = v;
        }
    }
}

impl QualityArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if !self.kinds.is_empty() {
            cfg.quality.kinds = self.kinds.clone();
        }
        if let Some(v) = self.q_range {
            cfg.quality.q_range = v;
        }
        if let Some(v) = &self.x {
            cfg.quality.x = Some(v.clone());
        }
    }
}

impl GameArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        let g = &mut cfg.game;
        if let Some(v) = &self.curve {
            g.curve = if v.trim_start().starts_with('{') {
                parse_json(v, "curve")?
            } else {
                serde_json::Value::String(v.clone())
            };
        }
        if let Some(v) = &self.beta {
            g.beta = v.clone();
        }
        if let Some(v) = self.depth {
            g.depth = v;
        }
        if let Some(v) = &self.bob {
            g.bob = v.clone();
        }
        if let Some(v) = self.certificate_q {
            g.certificate_q = Some(v);
        }
        if let Some(v) = &self.epsilon {
            g.epsilon = Some(v.clone());
        }
        if let Some(v) = &self.b0 {
            g.b0 = Some([v[0].clone(), v[1].clone()]);
        }
        Ok(())
    }
}

impl LambdaArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(v) = &self.subspace {
            cfg.lambda.subspace = Some(parse_json(v, "subspace")?);
        }
        if let Some(v) = self.gamma_q {
            cfg.lambda.gamma_q = v;
        }
        if let Some(v) = self.r_max {
            cfg.lambda.r_max = v;
        }
        Ok(())
    }
}

impl TransferArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.target {
            cfg.transfer.x = Some(v.clone());
        }
        if let Some(v) = self.q_max {
            cfg.transfer.q_max = Some(v);
        }
        if let Some(v) = &self.negative_control_q {
            cfg.transfer.negative_control_q = Some(v.clone());
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cli.common.apply(&mut cfg);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let outcome = match &cli.command {
        Command::Quality(a) => {
            a.apply(&mut cfg);
            cmd_quality(&mut cfg)?
        }
        Command::Game(a) => {
            a.apply(&mut cfg)?;
            cmd_game(&mut cfg)?
        }
        Command::Lambda(a) => {
            a.apply(&mut cfg)?;
            cmd_lambda(&mut cfg)?
        }
        Command::Transfer { lambda, transfer } => {
            lambda.apply(&mut cfg)?;
            transfer.apply(&mut cfg);
            cmd_transfer(&mut cfg)?
        }
        Command::Pipeline { game, lambda, transfer } => {
            game.apply(&mut cfg)?;
            lambda.apply(&mut cfg)?;
            transfer.apply(&mut cfg);
            cmd_pipeline(&mut cfg)?
        }
    };
    match &cfg.out {
        Some(dir) => outcome.write_to(dir)?,
        None => print!("{}", outcome.json()),
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(exit::IO as u8))
}
