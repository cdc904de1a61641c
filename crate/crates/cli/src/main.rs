use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod input;

/// Discrete exterior calculus on tetrahedral lattices.
///
/// Meshes are given as a file path or a built-in name: `single-tet`,
/// `regular-tet`, `kuhn-cube`, `box:N`, `annulus:SECTORS:RADIAL:LAYERS`,
/// `sliver:N:THICKNESS`.
#[derive(Parser, Debug)]
#[command(name = "declat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the structural audit (exit status 1 if any section fails).
    Audit(AuditArgs),
    /// Assemble incidence and Hodge matrices and write them in COO form.
    Assemble(AssembleArgs),
    /// Leapfrog time stepping with an energy trace.
    Simulate(SimulateArgs),
    /// Lowest cavity modes of the PEC-bounded mesh.
    Eigen(EigenArgs),
    /// Dynamic degree-of-freedom counts and the Euler/Hodge table.
    Dof(DofArgs),
    /// PML reflection measurement on the waveguide test mesh.
    Pml(PmlArgs),
    /// Charge-conservation study of the particle scatter.
    Pic(PicArgs),
    /// Write a built-in mesh to a file.
    Genmesh(GenmeshArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MeshArgs {
    /// Mesh file or built-in mesh name.
    #[arg(long)]
    pub mesh: String,
    /// Uniform relative permittivity.
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Uniform relative permeability.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Per-tet material file with one `eps mu` pair per line (overrides
    /// `--eps` and `--mu`).
    #[arg(long)]
    pub materials: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Inject a fault before auditing: sign-flip, non-transpose,
    /// asymmetric-hodge or indefinite-hodge.
    #[arg(long)]
    pub inject: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AssembleArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Time step in seconds (default: `--cfl` times the stability bound).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fraction of the stability bound used when `--dt` is absent.
    #[arg(long, default_value_t = 0.9)]
    pub cfl: f64,
    /// Run even if `--dt` exceeds the stability bound.
    #[arg(long)]
    pub force: bool,
    /// `exact`, `spai:K` or `spai:K:DROP`.
    #[arg(long, default_value = "exact")]
    pub hodge_inverse: String,
    /// Initial electric field: zero or random.
    #[arg(long, default_value = "random")]
    pub init: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Leave the outer boundary free instead of PEC.
    #[arg(long)]
    pub no_pec: bool,
    /// Trace CSV path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the run summary JSON, including the comparison against
    /// the exact inverse when an approximate one is used.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EigenArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Number of nonzero eigenvalues to compute.
    #[arg(long, default_value_t = 6)]
    pub count: usize,
    /// Spectral shift (default: 1e-3 tr K / tr M).
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DofArgs {
    /// Mesh file or built-in mesh name.
    #[arg(long)]
    pub mesh: String,
    /// Also run the eigensolver and cross-check the mode counts.
    #[arg(long)]
    pub eigen: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PmlArgs {
    /// Sweep the profile strength and thickness instead of one measurement.
    #[arg(long)]
    pub sweep: bool,
    /// Angular frequency in rad/s.
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub omega: f64,
    /// Peak PML loss in 1/s for a single measurement.
    #[arg(long, default_value_t = 4.0)]
    pub omega_max: f64,
    /// PML thickness in meters.
    #[arg(long, default_value_t = 1.0)]
    pub thickness: f64,
    /// Cell size in meters.
    #[arg(long, default_value_t = 0.05)]
    pub h: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PicArgs {
    /// Mesh file or built-in mesh name.
    #[arg(long, default_value = "box:4")]
    pub mesh: String,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Particle charge in coulombs.
    #[arg(long, default_value_t = 1.0)]
    pub charge: f64,
    /// Scatter interval in seconds.
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    /// Conservation report JSON path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also push one particle through a uniform field and write its trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub trace_steps: usize,
}

#[derive(Args, Debug)]
pub struct GenmeshArgs {
    /// Built-in mesh name.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool> = match cli.command {
        Command::Audit(a) => commands::audit(a),
        Command::Assemble(a) => commands::assemble(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Eigen(a) => commands::eigen(a),
        Command::Dof(a) => commands::dof(a),
        Command::Pml(a) => commands::pml(a),
        Command::Pic(a) => commands::pic(a),
        Command::Genmesh(a) => commands::genmesh(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
