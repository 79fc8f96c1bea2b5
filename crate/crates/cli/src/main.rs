use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod parse;

#[derive(Parser, Debug)]
#[command(name = "torus-spectra", version, about = "Multiplier sets, Darboux deformations and conformal flows of Dirac tori")]
struct Cli {
    /// Worker threads for sample-parallel commands.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FixtureName {
    CliffordS3,
    CliffordR3,
}

/// Where the potential comes from: a CSV file or a named fixture.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    #[arg(long)]
    potential: Option<PathBuf>,
    #[arg(long, value_enum)]
    fixture: Option<FixtureName>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a fixture's potential, spinors and manifest.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        #[arg(long)]
        out: PathBuf,
        /// Truncation of the R³ potential.
        #[arg(long, default_value_t = 32)]
        cutoff: usize,
    },
    /// Eigenvalues ν of the slice at fixed μ.
    Slice {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
        mu: C64,
        #[arg(long, default_value_t = 16)]
        cutoff: usize,
        #[arg(long)]
        adjoint: bool,
        #[arg(long, default_value_t = 1e-8)]
        residual_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiplier cloud along a contour of μ values.
    Cloud {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = parse::contour, allow_hyphen_values = true)]
        contour: parse::Contour,
        #[arg(long, default_value_t = 16)]
        cutoff: usize,
        #[arg(long, default_value_t = 1e-6)]
        delta_conv: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Matched distance between two cloud CSV files.
    CloudDist {
        a: PathBuf,
        b: PathBuf,
        /// Cutoff the clouds were computed at (sets the comparison window).
        #[arg(long, default_value_t = 16)]
        cutoff: usize,
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true, default_value = "6.283185307179586")]
        gamma1: C64,
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true, default_value = "0+6.283185307179586i")]
        gamma2: C64,
        /// Exit 4 when the distance exceeds this.
        #[arg(long)]
        verify: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest singular values and kernel dimension at given multipliers.
    KernelDim {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
        kappa1: C64,
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
        kappa2: C64,
        #[arg(long, default_value_t = 16)]
        cutoff: usize,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Threshold relative to the largest computed singular value.
        #[arg(long)]
        relative: bool,
        #[arg(long)]
        adjoint: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infinitesimal Darboux deformation and its first-order isospectrality.
    Darboux {
        #[command(flatten)]
        source: Source,
        /// μ of the pair Ψᴰ (generic potentials only).
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true, default_value = "0.13+0.41i")]
        mu_pair: C64,
        /// μ of the deformed function ψ (generic potentials only).
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true, default_value = "0.31-0.22i")]
        mu_psi: C64,
        /// Slice where the isospectral defect is measured.
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true, default_value = "0.3i")]
        mu: C64,
        #[arg(long, default_value_t = 10)]
        cutoff: usize,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Write δU as a field CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Exit 4 unless the defect ratio is in [3.5, 4.5] and residuals are small.
        #[arg(long)]
        verify: bool,
    },
    /// Conformal flow of the S³ Clifford torus with an invariance report.
    Flow {
        #[arg(long, value_enum, default_value = "clifford-s3")]
        fixture: FixtureName,
        #[arg(long, default_value_t = 1e-3)]
        dtau: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, value_parser = parse::contour, allow_hyphen_values = true, default_value = "0:i:8")]
        contour: parse::Contour,
        /// Cutoff of the flowed fields.
        #[arg(long, default_value_t = 12)]
        cutoff: usize,
        /// Cutoff of the report's multiplier clouds.
        #[arg(long, default_value_t = 8)]
        cloud_cutoff: usize,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Final potential as a field CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 4 unless drifts are below the invariance thresholds.
        #[arg(long)]
        verify: bool,
    },
    /// Willmore energy 4∫|U|².
    Willmore {
        #[command(flatten)]
        source: Source,
    },
    /// Immersed torus of the S³ fixture as a 4D OBJ mesh.
    Surface {
        #[arg(long, value_enum, default_value = "clifford-s3")]
        fixture: FixtureName,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hill operator −ψ″ + uψ: discriminant scan and resonant points.
    Hill {
        /// Fourier coefficient `n=value` of u in e^{2πinx/T}; repeatable.
        #[arg(long = "coeff", value_parser = parse::coefficient, allow_hyphen_values = true)]
        coeffs: Vec<(i64, C64)>,
        /// File with one sample `re,im` per line on a uniform grid.
        #[arg(long, conflicts_with = "coeffs")]
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        period: f64,
        /// Energies `start:end:count`.
        #[arg(long, value_parser = parse::contour, allow_hyphen_values = true, default_value = "0:4:401")]
        energies: parse::Contour,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resonant points in the real window spanned by the energies.
        #[arg(long)]
        resonances: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Zakharov–Shabat monodromy of a y-only potential.
    Nls {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
        k: C64,
        /// Also compare with the truncated 2D operator at this cutoff.
        #[arg(long)]
        crosscheck: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let argv = match parse::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return commands::fail(&commands::CliError::Input(e)),
    };
    let matches = match Cli::command().args_override_self(true).try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return commands::fail(&commands::CliError::Input(first.to_string()));
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return commands::fail(&commands::CliError::Input(e.to_string())),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return commands::fail(&commands::CliError::Input("--threads must be at least 1".into()));
        }
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => commands::fail(&e),
    }
}
