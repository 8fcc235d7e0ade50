use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpcomp::allocate::{GlobalBudget, StatisticInput};
use dpcomp::api::{build_instance, decimal_string, ParamInput};
use dpcomp::{
    allocate_budget, compose, curve, to_csv, AllocationRequest, ApiError, ComposeRequest, CurveRequest, Limits,
    MethodChoice, ServiceConfig, Settings, Target,
};
use dpcomp_core::rug::Float;
use dpcomp_core::{enumerate_delta, exact_delta_of_epsilon, parse_decimal, PrecisionConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "dpcomp",
    version,
    about = "Compose (epsilon, delta) differential privacy guarantees"
)]
struct Cli {
    /// Working precision of every float computation, in bits.
    #[arg(long, global = true, default_value_t = 128)]
    precision_bits: u32,

    /// Largest k handled by exact subset enumeration; `auto` switches to
    /// approx-optimal above it.
    #[arg(long, global = true, env = "DPCOMP_ENUM_LIMIT", default_value_t = 25)]
    enum_limit: usize,

    /// Largest k for the 4^k four-outcome enumeration used by `verify`.
    #[arg(long, global = true, default_value_t = 10)]
    rr_enum_limit: usize,

    /// Largest k accepted by approx-optimal.
    #[arg(long, global = true, env = "DPCOMP_MAX_K_APPROX", default_value_t = 10_000)]
    max_k_approx: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Global guarantee for one list of mechanisms.
    Compose(ComposeArgs),
    /// epsilon_g against k for k copies of one mechanism, as CSV.
    #[command(alias = "compare")]
    Curve(CurveArgs),
    /// Split a global budget across statistics in proportion to weights.
    Allocate(AllocateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Check the subset formula against brute-force enumeration.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ComposeArgs {
    /// Comma-separated epsilons, one per mechanism.
    #[arg(long)]
    eps: String,
    /// Comma-separated deltas, or one delta for every mechanism.
    #[arg(long, default_value = "0")]
    delta: String,
    /// Find the least epsilon_g for this delta_g.
    #[arg(long)]
    delta_g: Option<String>,
    /// Find the least delta_g for this epsilon_g.
    #[arg(long, conflicts_with = "delta_g", required_unless_present = "delta_g")]
    epsilon_g: Option<String>,
    #[arg(long, default_value = "auto")]
    method: String,
    /// Additive accuracy of approx-optimal.
    #[arg(long)]
    eta: Option<String>,
    /// Slack delta of advanced composition; defaults to half of delta_g - k delta.
    #[arg(long)]
    delta_prime: Option<String>,
}

#[derive(Args)]
struct CurveArgs {
    /// Epsilon of each copy.
    #[arg(long)]
    eps: String,
    #[arg(long, default_value = "0")]
    delta: String,
    #[arg(long)]
    delta_g: String,
    /// start:stop:step, inclusive.
    #[arg(long)]
    k_range: String,
    #[arg(long, default_value = "basic,advanced,homogeneous-optimal")]
    methods: String,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    delta_prime: Option<String>,
}

#[derive(Args)]
struct AllocateArgs {
    /// Comma-separated positive weights, one per statistic.
    #[arg(long)]
    weights: String,
    /// Comma-separated deltas, or one delta for every statistic.
    #[arg(long, default_value = "0")]
    deltas: String,
    /// Comma-separated statistic names; defaults to s1, s2, ...
    #[arg(long)]
    names: Option<String>,
    #[arg(long)]
    epsilon_g: String,
    #[arg(long)]
    delta_g: String,
    #[arg(long, default_value = "auto")]
    method: String,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    delta_prime: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "DPCOMP_PORT", default_value_t = dpcomp::service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    host: IpAddr,
    /// Concurrent computations; defaults to the number of CPUs.
    #[arg(long, env = "DPCOMP_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    eps: String,
    #[arg(long, default_value = "0")]
    delta: String,
    #[arg(long)]
    epsilon_g: String,
}

#[derive(Serialize)]
struct VerifyReport {
    k: usize,
    epsilon_g: String,
    subset_formula: String,
    enumeration: String,
    relative_gap: f64,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

/// Pairs each value with a delta, repeating a single delta.
fn broadcast(values: &[String], deltas: &str, what: &str) -> Result<Vec<String>, ApiError> {
    let deltas = split_list(deltas);
    match deltas.len() {
        1 => Ok(vec![deltas[0].clone(); values.len()]),
        n if n == values.len() => Ok(deltas),
        n => Err(ApiError::BadRequest(format!(
            "{n} deltas given for {} {what}; pass one delta or one per {what}",
            values.len()
        ))),
    }
}

fn params(eps: &str, delta: &str) -> Result<Vec<ParamInput>, ApiError> {
    let eps = split_list(eps);
    if eps.is_empty() {
        return Err(ApiError::BadRequest("--eps needs at least one value".into()));
    }
    let deltas = broadcast(&eps, delta, "mechanisms")?;
    Ok(eps
        .into_iter()
        .zip(deltas)
        .map(|(epsilon, delta)| ParamInput { epsilon, delta })
        .collect())
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response types serialize");
    s.push('\n');
    s
}

fn run_compose(args: ComposeArgs, settings: &Settings) -> Result<String, ApiError> {
    let target = match (args.delta_g, args.epsilon_g) {
        (Some(d), None) => Target::DeltaG(d),
        (None, Some(e)) => Target::EpsilonG(e),
        _ => {
            return Err(ApiError::BadRequest(
                "pass exactly one of --delta-g and --epsilon-g".into(),
            ))
        }
    };
    let req = ComposeRequest {
        params: params(&args.eps, &args.delta)?,
        target,
        method: args.method.parse()?,
        eta: args.eta,
        delta_prime: args.delta_prime,
        precision_bits: None,
    };
    compose(&req, settings).map(|r| json(&r))
}

fn run_curve(args: CurveArgs, settings: &Settings) -> Result<String, ApiError> {
    let req = CurveRequest {
        eps: args.eps,
        delta: args.delta,
        delta_g: args.delta_g,
        k_range: args.k_range,
        methods: args.methods,
        eta: args.eta,
        delta_prime: args.delta_prime,
        precision_bits: None,
    };
    curve(&req, settings).map(|rows| to_csv(&rows))
}

fn run_allocate(args: AllocateArgs, settings: &Settings) -> Result<String, ApiError> {
    let weights = split_list(&args.weights);
    if weights.is_empty() {
        return Err(ApiError::BadRequest("--weights needs at least one value".into()));
    }
    let deltas = broadcast(&weights, &args.deltas, "statistics")?;
    let names = match args.names {
        Some(n) => split_list(&n),
        None => (1..=weights.len()).map(|i| format!("s{i}")).collect(),
    };
    if names.len() != weights.len() {
        return Err(ApiError::BadRequest(format!(
            "{} names given for {} weights",
            names.len(),
            weights.len()
        )));
    }
    let statistics = names
        .into_iter()
        .zip(weights)
        .zip(deltas)
        .map(|((name, weight), delta)| StatisticInput { name, weight, delta })
        .collect();
    let req = AllocationRequest {
        statistics,
        global: GlobalBudget {
            epsilon_g: args.epsilon_g,
            delta_g: args.delta_g,
        },
        method: args.method.parse::<MethodChoice>()?,
        eta: args.eta,
        delta_prime: args.delta_prime,
        precision_bits: None,
    };
    allocate_budget(&req, settings).map(|r| json(&r))
}

fn run_verify(args: VerifyArgs, settings: &Settings) -> Result<String, ApiError> {
    let instance = build_instance(&params(&args.eps, &args.delta)?)?;
    let cfg = &settings.precision;
    let eps_g = parse_decimal(&args.epsilon_g)
        .map_err(|_| ApiError::BadRequest(format!("epsilon_g: cannot parse {:?}", args.epsilon_g)))?;
    let eps_g = cfg.float(&eps_g);
    let formula = exact_delta_of_epsilon(&instance, &eps_g, settings.limits.enum_limit, cfg)?;
    let brute = enumerate_delta(&instance, &eps_g, settings.limits.rr_enum_limit, cfg)?;
    let diff = Float::with_val(cfg.precision_bits, &formula - &brute).abs();
    let scale = formula.to_f64().abs().max(brute.to_f64().abs());
    let report = VerifyReport {
        k: instance.len(),
        epsilon_g: decimal_string(&eps_g),
        subset_formula: decimal_string(&formula),
        enumeration: decimal_string(&brute),
        relative_gap: if scale > 0.0 { diff.to_f64() / scale } else { 0.0 },
    };
    Ok(json(&report))
}

fn run_serve(args: ServeArgs, settings: Settings) -> ExitCode {
    let defaults = ServiceConfig::default();
    let config = ServiceConfig {
        settings,
        workers: args.workers.unwrap_or(defaults.workers),
    };
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("dpcomp: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("dpcomp: listening on {addr}");
    match runtime.block_on(dpcomp::serve(addr, config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpcomp: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let precision = match PrecisionConfig::with_precision_bits(cli.precision_bits) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("dpcomp: {e}");
            return ExitCode::from(1);
        }
    };
    let settings = Settings {
        precision,
        limits: Limits {
            enum_limit: cli.enum_limit,
            rr_enum_limit: cli.rr_enum_limit,
            max_k_approx: cli.max_k_approx,
            ..Limits::default()
        },
    };
    let output = match cli.command {
        Command::Compose(args) => run_compose(args, &settings),
        Command::Curve(args) => run_curve(args, &settings),
        Command::Allocate(args) => run_allocate(args, &settings),
        Command::Verify(args) => run_verify(args, &settings),
        Command::Serve(args) => return run_serve(args, settings),
    };
    match output {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{}", json(&e.body()));
            ExitCode::from(e.exit_code())
        }
    }
}
