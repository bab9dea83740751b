use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sphere_fv::grid::validate_grid;
use sphere_fv_cli::config::{GridSpec, Pairs, RunConfig};
use sphere_fv_cli::{
    convergence_study, execute, write_burgers_oracle, write_convergence, CliError,
};

#[derive(Parser)]
#[command(name = "sphere-fv", version, about = "Finite volume solver for scalar conservation laws on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of key=value pairs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides such as n_lat=30 or --order=1.
    #[arg(value_name = "KEY=VALUE", allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a test case and write the requested outputs.
    Run(ConfigArgs),
    /// Build the configured grid and check its invariants.
    ValidateGrid {
        #[command(flatten)]
        args: ConfigArgs,
        /// Also write the cell table as CSV.
        #[arg(long)]
        cells_output: Option<PathBuf>,
    },
    /// Measure L1 errors over a sequence of refined grids.
    Converge {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated increasing refinement factors.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        refinements: Vec<usize>,
        /// Write the table as CSV instead of printing it.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the 1D periodic Burgers reference solution.
    OracleBurgers {
        #[arg(long)]
        n_cells: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn load_pairs(args: &ConfigArgs) -> Result<Pairs, CliError> {
    let mut pairs = Pairs::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        pairs.extend_from(&text, 0)?;
    }
    for token in &args.overrides {
        pairs.insert_token(token.trim_start_matches('-'), 0)?;
    }
    Ok(pairs)
}

fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    std::fs::write(path, buf).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let cfg = RunConfig::from_pairs(&load_pairs(&args)?)?;
            let out = execute(&cfg)?;
            for (k, v) in &out.summary {
                println!("{k}={v}");
            }
            for p in &out.written {
                println!("wrote {}", p.display());
            }
        }
        Command::ValidateGrid { args, cells_output } => {
            let grid = GridSpec::from_pairs(&load_pairs(&args)?)?.build()?;
            println!("cells={}", grid.n_cells());
            println!("bands={}", grid.bands().len());
            println!("edges={}", grid.edges().len());
            println!("total_area={}", grid.total_area());
            let (lo, hi) = grid
                .cells()
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.area), hi.max(c.area)));
            println!("min_area={lo}");
            println!("max_area={hi}");
            if let Some(path) = cells_output {
                write_file(&path, |b| grid.write_cells_csv(b))?;
            }
            let violations = validate_grid(&grid);
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("{v}");
                }
                return Err(CliError::Usage(format!("{} grid invariant violations", violations.len())));
            }
            println!("ok");
        }
        Command::Converge { args, refinements, output } => {
            let cfg = RunConfig::from_pairs(&load_pairs(&args)?)?;
            let rows = convergence_study(&cfg, &refinements)?;
            match output {
                Some(path) => write_file(&path, |b| write_convergence(&rows, b))?,
                None => write_convergence(&rows, &mut std::io::stdout().lock()).map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?,
            }
        }
        Command::OracleBurgers { n_cells, t, output } => write_burgers_oracle(n_cells, t, &output)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
