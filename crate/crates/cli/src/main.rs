//! Command line front end: rule inference, query translation, data exchange, evaluation,
//! translation verification and network simulation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetpeer::translate::Direction;

#[derive(Parser)]
#[command(name = "hetpeer", version, about = "Schema mappings and query translation between heterogeneous XML peers")]
struct Cli {
    /// Print translation traces on stderr.
    #[arg(long, global = true)]
    trace: bool,
    /// Worker threads for verification and scaling runs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// More diagnostics on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Schemas {
    /// DTD of the rule bodies.
    #[arg(long)]
    source: PathBuf,
    /// DTD of the rule heads.
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args)]
struct QueryInput {
    /// Query text.
    #[arg(conflicts_with = "query_file")]
    query: Option<String>,
    /// File with one query per line; `#` starts a comment line.
    #[arg(long)]
    query_file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Forward,
    Backward,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Direction {
        match d {
            Dir::Forward => Direction::Forward,
            Dir::Backward => Direction::Backward,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Infer mapping rules from two DTDs and their correspondences.
    Infer {
        #[command(flatten)]
        schemas: Schemas,
        #[arg(long)]
        corr: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Translate queries along a rule file.
    Translate {
        #[command(flatten)]
        schemas: Schemas,
        #[arg(long)]
        rules: PathBuf,
        /// `forward` takes source queries to the target, `backward` the other way.
        #[arg(long, value_enum)]
        direction: Dir,
        #[command(flatten)]
        input: QueryInput,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Apply rules to a source instance.
    Exchange {
        #[arg(long)]
        source: PathBuf,
        /// Validate the result against this DTD.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate queries on an instance.
    Eval {
        /// Validate the instance against this DTD first.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        input: QueryInput,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check translations against the exchange semantics on random source instances.
    Verify {
        #[command(flatten)]
        schemas: Schemas,
        #[arg(long)]
        rules: PathBuf,
        /// Rules defining the exchanged instances; `--rules` when absent.
        #[arg(long)]
        reference_rules: Option<PathBuf>,
        /// A query file or a directory of `*.txt` query files. Files named `forward*` or
        /// `backward*` set their direction.
        #[arg(long)]
        queries: PathBuf,
        /// Direction for query files whose name does not set one.
        #[arg(long, value_enum)]
        direction: Option<Dir>,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Broadcast queries through a simulated peer network.
    Simulate {
        #[command(flatten)]
        schemas: Schemas,
        #[arg(long)]
        corr: PathBuf,
        /// TOML file with `peers`, `degree`, `schemas`, `seed`, `instances`,
        /// `instance_dir` and `origin`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        peers: Option<usize>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long = "schemas")]
        schema_count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        origin: Option<usize>,
        #[arg(long)]
        query: Vec<String>,
        #[arg(long)]
        query_file: Option<PathBuf>,
        /// Schema counts to sweep, as `a..b` (inclusive) or a comma list.
        #[arg(long)]
        scaling: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    let opts = commands::Opts { trace: cli.trace, jobs: cli.jobs.max(1) };
    let result = match cli.cmd {
        Cmd::Infer { schemas, corr, output } => commands::infer(&schemas.source, &schemas.target, &corr, output.as_deref()),
        Cmd::Translate { schemas, rules, direction, input, output } => commands::translate(
            &opts,
            &schemas.source,
            &schemas.target,
            &rules,
            direction.into(),
            input.query.as_deref(),
            input.query_file.as_deref(),
            output.as_deref(),
        ),
        Cmd::Exchange { source, target, rules, instance, output } => {
            commands::exchange(&source, target.as_deref(), &rules, &instance, output.as_deref())
        }
        Cmd::Eval { schema, instance, input, output } => {
            commands::eval(schema.as_deref(), &instance, input.query.as_deref(), input.query_file.as_deref(), output.as_deref())
        }
        Cmd::Verify { schemas, rules, reference_rules, queries, direction, instances, seed } => commands::verify(
            &opts,
            &schemas.source,
            &schemas.target,
            &rules,
            reference_rules.as_deref(),
            &queries,
            direction.map(Into::into),
            instances,
            seed,
        ),
        Cmd::Simulate { schemas, corr, config, peers, degree, schema_count, seed, origin, query, query_file, scaling } => {
            let overrides = commands::SimOverrides { peers, degree, schemas: schema_count, seed, origin };
            commands::simulate(
                &opts,
                &schemas.source,
                &schemas.target,
                &corr,
                config.as_deref(),
                overrides,
                &query,
                query_file.as_deref(),
                scaling.as_deref(),
            )
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
