//! Command-line surface: cone checks, decomposition and coarsening, SDP
//! reformulation, the conic solver, distance bounds, and the SOS programs.
//!
//! Exit codes: 0 success / member / feasible, 1 non-member / infeasible,
//! 2 inconclusive, 64 usage error, 65 data error.

use crate::cone::{
    certify_membership_with, check_dd, check_sdd, coarsen_decomposition, dual_membership,
    MembershipStatus,
};
use crate::linalg::{dist_psd, sym_eig};
use crate::partition::{is_sub_partition, Partition};
use crate::reformulate::to_block_fw_program_sparse;
use crate::solver::{solve, SolveSettings, SolveStatus};
use crate::sos::{build_alpha_sdsos_program, build_sos_program};
use crate::{io, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Parser)]
#[command(
    name = "blockfw",
    about = "Block factor-width-two cones: membership, decomposition, bounds, and block conic programs",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output style: human text or machine-readable key=value lines.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Significant digits for floating output.
    #[arg(long, global = true, default_value_t = 6)]
    precision: usize,
    /// Solver thread cap (defaults to BLOCKFW_THREADS or 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Kv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConeKind {
    Fw,
    Dual,
    Psd,
    Sdd,
    Dd,
}

#[derive(Subcommand)]
enum Command {
    /// Test membership of a matrix in the selected cone.
    Check {
        /// Matrix file (first line n, then n rows of n reals).
        matrix: PathBuf,
        /// Partition: inline sizes ("2 2 2") or a file path.
        #[arg(long)]
        partition: Option<String>,
        #[arg(long, value_enum, default_value_t = ConeKind::Fw)]
        cone: ConeKind,
        /// Relative membership tolerance.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Projection sweep cap.
        #[arg(long, default_value_t = 20_000)]
        max_sweeps: usize,
    },
    /// Decompose a cone member into PSD pair blocks, written as matrix files.
    Decompose {
        matrix: PathBuf,
        #[arg(long)]
        partition: String,
        /// Directory receiving block_<i>_<j>.mat files.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Re-express a decomposition under a coarser partition.
    Coarsen {
        matrix: PathBuf,
        /// Fine partition the decomposition is found under.
        #[arg(long)]
        partition: String,
        /// Coarser target partition.
        #[arg(long)]
        to: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Rewrite a single-block SDP over the pair-block cone (SDPA to SDPA).
    Reformulate {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        partition: String,
        /// Drop pair blocks whose data is entirely zero.
        #[arg(long)]
        drop_zero_pairs: bool,
    },
    /// Solve a conic program in sparse SDPA form.
    Solve {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps_abs: f64,
        #[arg(long, default_value_t = 1e-6)]
        eps_rel: f64,
        #[arg(long, default_value_t = 50_000)]
        max_iters: usize,
    },
    /// Closed-form distance bounds and the worst-case witness.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
    },
    /// Sum-of-squares programs.
    #[command(subcommand)]
    Sos(SosCommand),
}

#[derive(Subcommand)]
enum SosCommand {
    /// Minimize gamma with p(x) + gamma a sum of squares (optionally over a
    /// balanced block partition of the Gram basis).
    Min {
        poly: PathBuf,
        /// Block count for the balanced Gram partition; full SOS if absent.
        #[arg(long)]
        partition_blocks: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iters: usize,
    },
    /// Feasibility of P(x) + shift * I as an SOS matrix.
    Matrix {
        polymatrix: PathBuf,
        #[arg(long)]
        shift: f64,
        /// Relaxation: full Gram PSD, the natural block partition, or the
        /// trivial-partition (scalar SDSOS) restriction.
        #[arg(long, value_enum, default_value_t = MatrixRelaxation::Natural)]
        relaxation: MatrixRelaxation,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iters: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatrixRelaxation {
    Sos,
    Natural,
    Sdsos,
}

/// Inline partition ("2 2 2") or file path; inline wins when both parse.
fn load_partition(spec: &str) -> Result<Partition> {
    if let Ok(p) = io::parse_partition(spec) {
        return Ok(p);
    }
    io::read_partition(spec)
}

fn fmt_g(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sig = sig.max(1);
    let exp = v.abs().log10().floor() as i32;
    let s = if exp >= -4 && exp < sig as i32 {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        return format!("{:.*e}", sig - 1, v);
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct Printer {
    format: Format,
    precision: usize,
}

impl Printer {
    fn kv(&self, key: &str, value: impl std::fmt::Display) {
        match self.format {
            Format::Kv => println!("{key}={value}"),
            Format::Text => println!("{key}: {value}"),
        }
    }

    fn kvf(&self, key: &str, value: f64) {
        let s = fmt_g(value, self.precision);
        match self.format {
            Format::Kv => println!("{key}={s}"),
            Format::Text => println!("{key}: {s}"),
        }
    }
}

/// Run the CLI on explicit arguments (the first element is the program name)
/// and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are successful terminations.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli
        .output
        .threads
        .or_else(|| std::env::var("BLOCKFW_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1);
    let printer = Printer { format: cli.output.format, precision: cli.output.precision };
    match dispatch(cli.command, &printer, threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Inconclusive(_) => EXIT_INCONCLUSIVE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn dispatch(cmd: Command, pr: &Printer, threads: usize) -> Result<i32> {
    match cmd {
        Command::Check { matrix, partition, cone, tol, max_sweeps } => {
            cmd_check(&matrix, partition.as_deref(), cone, tol, max_sweeps, pr)
        }
        Command::Decompose { matrix, partition, out_dir, tol } => {
            cmd_decompose(&matrix, &partition, &out_dir, tol, pr)
        }
        Command::Coarsen { matrix, partition, to, out_dir, tol } => {
            cmd_coarsen(&matrix, &partition, &to, out_dir.as_deref(), tol, pr)
        }
        Command::Reformulate { input, output, partition, drop_zero_pairs } => {
            cmd_reformulate(&input, &output, &partition, drop_zero_pairs, pr)
        }
        Command::Solve { input, eps_abs, eps_rel, max_iters } => {
            cmd_solve(&input, eps_abs, eps_rel, max_iters, threads, pr)
        }
        Command::Bounds { n, p } => cmd_bounds(n, p, pr),
        Command::Sos(SosCommand::Min { poly, partition_blocks, eps, max_iters }) => {
            cmd_sos_min(&poly, partition_blocks, eps, max_iters, threads, pr)
        }
        Command::Sos(SosCommand::Matrix { polymatrix, shift, relaxation, eps, max_iters }) => {
            cmd_sos_matrix(&polymatrix, shift, relaxation, eps, max_iters, threads, pr)
        }
    }
}

fn partition_or_trivial(spec: Option<&str>, n: usize) -> Result<Partition> {
    match spec {
        Some(s) => {
            let p = load_partition(s)?;
            if p.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "partition covers {} but the matrix has dimension {n}",
                    p.n()
                )));
            }
            Ok(p)
        }
        None => Partition::trivial(n),
    }
}

fn cmd_check(
    matrix: &PathBuf,
    partition: Option<&str>,
    cone: ConeKind,
    tol: f64,
    max_sweeps: usize,
    pr: &Printer,
) -> Result<i32> {
    let a = io::read_matrix(matrix)?;
    match cone {
        ConeKind::Fw => {
            let alpha = partition_or_trivial(partition, a.n())?;
            let res = certify_membership_with(&a, &alpha, tol, max_sweeps)?;
            let status = match res.status {
                MembershipStatus::Member => "member",
                MembershipStatus::NonMember => "non_member",
                MembershipStatus::Inconclusive => "inconclusive",
            };
            pr.kv("cone", "fw");
            pr.kv("partition", &alpha);
            pr.kv("status", status);
            pr.kvf("gap", res.gap);
            if let Some(dec) = &res.decomposition {
                pr.kv("blocks", dec.block_count());
            }
            if let Some(y) = &res.separator {
                pr.kvf("separator_inner_product", y.inner(&a));
            }
            Ok(match res.status {
                MembershipStatus::Member => EXIT_OK,
                MembershipStatus::NonMember => EXIT_NEGATIVE,
                MembershipStatus::Inconclusive => EXIT_INCONCLUSIVE,
            })
        }
        ConeKind::Dual => {
            let alpha = partition_or_trivial(partition, a.n())?;
            let dm = dual_membership(&a, &alpha, tol)?;
            pr.kv("cone", "dual");
            pr.kv("partition", &alpha);
            pr.kv("status", if dm.is_member { "member" } else { "non_member" });
            if let Some((i, j)) = dm.worst_pair {
                pr.kv("worst_pair", format!("{} {}", i + 1, j + 1));
            }
            pr.kvf("worst_min_eig", dm.worst_min_eig);
            Ok(if dm.is_member { EXIT_OK } else { EXIT_NEGATIVE })
        }
        ConeKind::Psd => {
            let (vals, _) = sym_eig(&a)?;
            let member = vals[0] >= -tol * (1.0 + a.fro_norm());
            pr.kv("cone", "psd");
            pr.kv("status", if member { "member" } else { "non_member" });
            pr.kvf("min_eig", vals[0]);
            pr.kvf("dist_psd", dist_psd(&a)?);
            Ok(if member { EXIT_OK } else { EXIT_NEGATIVE })
        }
        ConeKind::Sdd => {
            let out = check_sdd(&a, tol)?;
            pr.kv("cone", "sdd");
            pr.kv("status", if out.is_sdd { "member" } else { "non_member" });
            if let Some(d) = &out.scaling {
                let parts: Vec<String> = d.iter().map(|v| fmt_g(*v, pr.precision)).collect();
                pr.kv("scaling", parts.join(" "));
            }
            Ok(if out.is_sdd { EXIT_OK } else { EXIT_NEGATIVE })
        }
        ConeKind::Dd => {
            let member = check_dd(&a);
            pr.kv("cone", "dd");
            pr.kv("status", if member { "member" } else { "non_member" });
            Ok(if member { EXIT_OK } else { EXIT_NEGATIVE })
        }
    }
}

fn cmd_decompose(
    matrix: &PathBuf,
    partition: &str,
    out_dir: &PathBuf,
    tol: f64,
    pr: &Printer,
) -> Result<i32> {
    let a = io::read_matrix(matrix)?;
    let alpha = partition_or_trivial(Some(partition), a.n())?;
    let res = certify_membership_with(&a, &alpha, tol, 20_000)?;
    match res.status {
        MembershipStatus::Member => {
            let dec = res.decomposition.ok_or_else(|| {
                Error::InvalidArgument("single-block membership has no pair decomposition".into())
            })?;
            std::fs::create_dir_all(out_dir)?;
            for (&(i, j), x) in dec.blocks() {
                let path = out_dir.join(format!("block_{}_{}.mat", i + 1, j + 1));
                io::write_matrix(x, path)?;
            }
            pr.kv("status", "member");
            pr.kv("blocks_written", dec.block_count());
            pr.kvf("gap", res.gap);
            Ok(EXIT_OK)
        }
        MembershipStatus::NonMember => {
            pr.kv("status", "non_member");
            pr.kvf("gap", res.gap);
            Ok(EXIT_NEGATIVE)
        }
        MembershipStatus::Inconclusive => {
            pr.kv("status", "inconclusive");
            pr.kvf("gap", res.gap);
            Ok(EXIT_INCONCLUSIVE)
        }
    }
}

fn cmd_coarsen(
    matrix: &PathBuf,
    fine_spec: &str,
    coarse_spec: &str,
    out_dir: Option<&std::path::Path>,
    tol: f64,
    pr: &Printer,
) -> Result<i32> {
    let a = io::read_matrix(matrix)?;
    let fine = partition_or_trivial(Some(fine_spec), a.n())?;
    let coarse = partition_or_trivial(Some(coarse_spec), a.n())?;
    let witness = is_sub_partition(&fine, &coarse)?.ok_or_else(|| {
        Error::InvalidArgument(format!("{fine} is not a sub-partition of {coarse}"))
    })?;
    let res = certify_membership_with(&a, &fine, tol, 20_000)?;
    match res.status {
        MembershipStatus::Member => {
            let dec = res.decomposition.expect("member carries a decomposition");
            let coarse_dec = coarsen_decomposition(&dec, &witness)?;
            let report = coarse_dec.validate(&a, tol * (1.0 + a.fro_norm()))?;
            pr.kv("status", "member");
            pr.kv("fine", &fine);
            pr.kv("coarse", &coarse);
            pr.kvf("residual", report.residual);
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(dir)?;
                for (&(i, j), x) in coarse_dec.blocks() {
                    io::write_matrix(x, dir.join(format!("block_{}_{}.mat", i + 1, j + 1)))?;
                }
                pr.kv("blocks_written", coarse_dec.block_count());
            }
            Ok(EXIT_OK)
        }
        MembershipStatus::NonMember => {
            pr.kv("status", "non_member");
            Ok(EXIT_NEGATIVE)
        }
        MembershipStatus::Inconclusive => {
            pr.kv("status", "inconclusive");
            Ok(EXIT_INCONCLUSIVE)
        }
    }
}

fn cmd_reformulate(
    input: &PathBuf,
    output: &PathBuf,
    partition: &str,
    drop_zero_pairs: bool,
    pr: &Printer,
) -> Result<i32> {
    let sdp = io::read_sdpa(input)?;
    if sdp.block_sizes().len() != 1 {
        return Err(Error::InvalidProgram(format!(
            "reformulation expects a single-block SDP, the input has {} blocks",
            sdp.block_sizes().len()
        )));
    }
    let alpha = partition_or_trivial(Some(partition), sdp.block_sizes()[0])?;
    let zero_tol = if drop_zero_pairs { Some(0.0) } else { None };
    let bf = to_block_fw_program_sparse(&sdp, &alpha, zero_tol)?;
    io::write_sdpa(&bf.program, output)?;
    pr.kv("partition", &alpha);
    pr.kv("pair_blocks", bf.program.block_sizes().len());
    pr.kv("constraints", bf.program.m());
    Ok(EXIT_OK)
}

fn cmd_solve(
    input: &PathBuf,
    eps_abs: f64,
    eps_rel: f64,
    max_iters: usize,
    threads: usize,
    pr: &Printer,
) -> Result<i32> {
    let prog = io::read_sdpa(input)?;
    let settings = SolveSettings { eps_abs, eps_rel, max_iters, threads };
    let sol = solve(&prog, &settings)?;
    let status = match sol.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::InfeasibleEvidence => "infeasible_evidence",
        SolveStatus::UnboundedEvidence => "unbounded_evidence",
        SolveStatus::MaxIters => "max_iters",
    };
    pr.kv("status", status);
    pr.kvf("objective", sol.objective);
    pr.kvf("primal_residual", sol.primal_residual);
    pr.kvf("dual_residual", sol.dual_residual);
    pr.kv("iterations", sol.iterations);
    Ok(match sol.status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::InfeasibleEvidence | SolveStatus::UnboundedEvidence => EXIT_NEGATIVE,
        SolveStatus::MaxIters => EXIT_INCONCLUSIVE,
    })
}

fn cmd_bounds(n: usize, p: usize, pr: &Printer) -> Result<i32> {
    let upper = crate::bounds::upper_bound_dist(p)?;
    let lower = crate::bounds::lower_bound_dist(n, p)?;
    pr.kv("n", n);
    pr.kv("p", p);
    pr.kvf("upper", *upper.numer() as f64 / *upper.denom() as f64);
    pr.kv("upper_exact", format!("{}/{}", upper.numer(), upper.denom()));
    pr.kvf("lower", lower);
    if n % p == 0 {
        let w = crate::bounds::worst_case_witness(n, p)?;
        pr.kvf("witness_distance", w.distance);
        pr.kvf("witness_norm", w.matrix.fro_norm());
    } else {
        pr.kv("witness", "skipped (partition not homogeneous)");
    }
    Ok(EXIT_OK)
}

fn solve_exit(pr: &Printer, status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::InfeasibleEvidence | SolveStatus::UnboundedEvidence => {
            let _ = pr;
            EXIT_NEGATIVE
        }
        SolveStatus::MaxIters => EXIT_INCONCLUSIVE,
    }
}

fn cmd_sos_min(
    poly: &PathBuf,
    partition_blocks: Option<usize>,
    eps: f64,
    max_iters: usize,
    threads: usize,
    pr: &Printer,
) -> Result<i32> {
    let p = io::read_poly(poly)?;
    let settings = SolveSettings { eps_abs: eps, eps_rel: eps, max_iters, threads };
    let prog = match partition_blocks {
        None => build_sos_program(&p)?,
        Some(blocks) => {
            let basis_len = build_sos_program(&p)?.basis.len();
            let alpha = Partition::balanced(basis_len, blocks)?;
            build_alpha_sdsos_program(&p, &alpha)?
        }
    };
    pr.kv("basis_size", prog.basis.len());
    if let Some(alpha) = &prog.alpha {
        pr.kv("partition", alpha);
    }
    let sol = solve(&prog.program, &settings)?;
    let status = match sol.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::InfeasibleEvidence => "infeasible_evidence",
        SolveStatus::UnboundedEvidence => "unbounded_evidence",
        SolveStatus::MaxIters => "max_iters",
    };
    pr.kv("status", status);
    if sol.status == SolveStatus::Optimal {
        pr.kvf("gamma", prog.gamma_from_objective(sol.objective));
    }
    pr.kv("iterations", sol.iterations);
    Ok(solve_exit(pr, sol.status))
}

fn cmd_sos_matrix(
    polymatrix: &PathBuf,
    shift: f64,
    relaxation: MatrixRelaxation,
    eps: f64,
    max_iters: usize,
    threads: usize,
    pr: &Printer,
) -> Result<i32> {
    let pm = io::read_polymatrix(polymatrix)?;
    let msp = crate::sos::matrix_sos_program(&pm, shift)?;
    let settings = SolveSettings { eps_abs: eps, eps_rel: eps, max_iters, threads };
    let (label, program) = match relaxation {
        MatrixRelaxation::Sos => ("sos", msp.sos.clone()),
        MatrixRelaxation::Natural => ("natural", msp.natural_block_program()?.program),
        MatrixRelaxation::Sdsos => {
            let trivial = Partition::trivial(msp.sos.block_sizes()[0])?;
            ("sdsos", msp.block_program(&trivial)?.program)
        }
    };
    pr.kv("relaxation", label);
    pr.kvf("shift", shift);
    pr.kv("gram_size", msp.sos.block_sizes()[0]);
    let sol = solve(&program, &settings)?;
    let status = match sol.status {
        SolveStatus::Optimal => "feasible",
        SolveStatus::InfeasibleEvidence => "infeasible",
        SolveStatus::UnboundedEvidence => "unbounded_evidence",
        SolveStatus::MaxIters => "inconclusive",
    };
    pr.kv("status", status);
    pr.kvf("primal_residual", sol.primal_residual);
    pr.kv("iterations", sol.iterations);
    Ok(solve_exit(pr, sol.status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_g_examples() {
        assert_eq!(fmt_g(1.0 / 3.0, 6), "0.333333");
        assert_eq!(fmt_g(0.2182178902, 6), "0.218218");
        assert_eq!(fmt_g(0.0, 6), "0");
        assert_eq!(fmt_g(19.3009006, 6), "19.3009");
        assert_eq!(fmt_g(1.0, 6), "1");
        assert_eq!(fmt_g(-1.5e-9, 3), "-1.50e-9");
        assert_eq!(fmt_g(2120.0, 4), "2120");
    }

    #[test]
    fn inline_partition_beats_file() {
        let p = load_partition("2 2 2").unwrap();
        assert_eq!(p.sizes(), &[2, 2, 2]);
        assert!(load_partition("/nonexistent/path").is_err());
    }
}
