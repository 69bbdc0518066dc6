use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vfree_cli::{to_sorted_json, CertFile, Failure, Overrides};
use vfree_core::pipeline::Stage;

#[derive(Parser)]
#[command(name = "vfree", version, about = "Embeddings of virtually free groups into doubles of finite groups, with certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Prime for the residual-p step (default 2, or the document's value)
    #[arg(long, global = true)]
    prime: Option<usize>,
    /// Radius of the injectivity ball checked for embeddings
    #[arg(long, global = true)]
    ball_radius: Option<usize>,
    /// Largest coset enumeration allowed
    #[arg(long, global = true)]
    coset_cap: Option<usize>,
    /// Deepest mod-p derived series term tried
    #[arg(long, global = true)]
    series_depth_cap: Option<usize>,
    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Normal form of the document's word
    Wp { input: PathBuf },
    /// Embed the document's group, by default all the way into a double
    Embed {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "double")]
        stage: StageArg,
    },
    /// Virtual retraction onto the document's subgroup
    Retract { input: PathBuf },
    /// Re-check a certificate; exit status 1 if it fails
    Verify { certificate: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Cone,
    Special,
    Single,
    Double,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Cone => Stage::Cone,
            StageArg::Special => Stage::Special,
            StageArg::Single => Stage::Single,
            StageArg::Double => Stage::Double,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure { code: 1, message: format!("{}: {e}", p.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let o = Overrides {
        prime: cli.prime,
        ball_radius: cli.ball_radius,
        coset_cap: cli.coset_cap,
        series_depth_cap: cli.series_depth_cap,
    };
    let cert = |c: CertFile| to_sorted_json(&c);
    match &cli.command {
        Command::Wp { input } => emit(&cli.out, &vfree_cli::wp(&vfree_cli::load(&read(input)?)?)?),
        Command::Embed { input, stage } => {
            let c = vfree_cli::embed(&vfree_cli::load(&read(input)?)?, (*stage).into(), &o)?;
            emit(&cli.out, &cert(c))
        }
        Command::Retract { input } => {
            let c = vfree_cli::retract(&vfree_cli::load(&read(input)?)?, &o)?;
            emit(&cli.out, &cert(c))
        }
        Command::Verify { certificate } => {
            let bad = vfree_cli::verify(&read(certificate)?, &o)?;
            if bad.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(Failure { code: 1, message: bad.join("\n") })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
