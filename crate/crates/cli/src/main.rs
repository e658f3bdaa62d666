use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use fracparts::denomstruct::{analyze, DEFAULT_DELTA};
use fracparts::diophantine::{build_relations, RelationOptions, RelationTriple};
use fracparts::driver::{
    measure_exponent, parse_system_file, parse_system_file_prec, read_certificate, solve_file, verify_certificate, GeneratorSpec,
    SolverConfig, Status, CSV_HEADER,
};
use fracparts::expsum::{large_coefficients_with, DichotomyOptions, FourierDichotomy};
use fracparts::intmat::{IMat, QMat};
use fracparts::latgeom::{quasi_orthogonal_generators, reduce_basis, sublattice_determinants, wedge_norm, LatticeBasis};
use fracparts::system::{brute_force_min, first_hit, DEFAULT_ENUM_CAP};
use fracparts::{Error, Real, SystemState};

#[derive(Parser)]
#[command(name = "fracparts", version, about = "Small simultaneous fractional parts of polynomial systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for n < x with every ||f_i(n)|| < eps_i
    Solve {
        system: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// write the certificate here
        #[arg(long)]
        cert: Option<PathBuf>,
        /// use the structural preset (pursue relations even when hits are plentiful)
        #[arg(long)]
        structural: bool,
    },
    /// Exhaustive scan: first hit and the minimiser of max_i ||f_i(n)||
    Oracle {
        system: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        cap: u64,
    },
    /// Fitted decay exponent of min_{n<x} max_i ||f_i(n)|| over random systems
    Exponent {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        /// comma separated, e.g. 1e3,1e4,1e5
        #[arg(long, value_delimiter = ',', value_parser = parse_count)]
        x: Vec<u64>,
        #[arg(long, default_value_t = 50)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "monomial")]
        generator: GeneratorSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check every step of a certificate without searching
    VerifyCert { cert: PathBuf },
    /// Fourier dichotomy for a system
    FourierScan {
        system: PathBuf,
        /// override the horizon in the file
        #[arg(long)]
        x: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        c_hit: f64,
        #[arg(long, default_value_t = 1 << 15)]
        max_box: u64,
        #[arg(long)]
        precision: Option<u32>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rational relations from the witnesses of a dichotomy
    Relations {
        system: PathBuf,
        /// output of fourier-scan
        dichotomy: PathBuf,
        #[arg(long)]
        q_rel: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        tol_rel: f64,
        #[arg(long, default_value_t = 4.0)]
        c_cfg: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Cluster relations by denominator, with divisor diagnostics
    DenomAnalyze {
        /// output of relations
        relations: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Lattice utilities on JSON matrices of integer/rational strings
    #[command(group(ArgGroup::new("mode").required(true).args(["wedge", "reduce", "generators", "det_identity"])))]
    Lattice {
        input: PathBuf,
        /// input: rows of vectors; prints the r-volume
        #[arg(long)]
        wedge: bool,
        /// input: basis rows; prints the reduced basis
        #[arg(long)]
        reduce: bool,
        /// input: a system file; needs --bounds and --eta
        #[arg(long)]
        generators: bool,
        /// input: {"h1": [[..]], "h2": [[..]]}
        #[arg(long)]
        det_identity: bool,
        #[arg(long, value_delimiter = ',')]
        bounds: Vec<String>,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long, default_value_t = 1)]
        n_target: u64,
        #[arg(long, default_value_t = 0.25)]
        c_orth: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct OutArg {
    /// write JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v < 2f64.powi(63)) {
        return Err(format!("not a positive integer: {s}"));
    }
    Ok(v as u64)
}

type CliResult = Result<ExitCode, String>;

fn io<E: std::fmt::Display>(ctx: &Path) -> impl Fn(E) -> String + '_ {
    move |e| format!("{}: {e}", ctx.display())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(io(path))
}

fn emit<T: Serialize>(value: &T, out: &OutArg) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match &out.out {
        Some(p) => fs::write(p, text + "\n").map_err(io(p)),
        None => {
            say(&text);
            Ok(())
        }
    }
}

/// Stdout line that tolerates a closed pipe.
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn lib(e: Error) -> String {
    e.to_string()
}

fn status_code(s: Status) -> ExitCode {
    match s {
        Status::Found => ExitCode::SUCCESS,
        Status::NotFound | Status::Inconclusive => ExitCode::from(2),
    }
}

fn parse_qmat(rows: Vec<Vec<String>>) -> Result<QMat, String> {
    rows.iter()
        .map(|r| r.iter().map(|s| Real::parse(s).map(|v| v.value().clone()).map_err(lib)).collect())
        .collect()
}

fn parse_imat(rows: Vec<Vec<String>>) -> Result<IMat, String> {
    rows.iter()
        .map(|r| r.iter().map(|s| s.trim().parse().map_err(|_| format!("not an integer: {s}"))).collect())
        .collect()
}

#[derive(serde::Deserialize)]
struct MatPair {
    h1: Vec<Vec<String>>,
    h2: Vec<Vec<String>>,
}

fn run(cmd: Cmd) -> CliResult {
    match cmd {
        Cmd::Solve { system, config, cert, structural } => {
            let cfg = match (config, structural) {
                (Some(p), _) => read_json::<SolverConfig>(&p)?,
                (None, true) => SolverConfig::structural(),
                (None, false) => SolverConfig::default(),
            };
            cfg.validate().map_err(lib)?;
            let out = solve_file(&system, &cfg).map_err(lib)?;
            if let Some(p) = cert {
                fs::write(&p, out.certificate.to_json() + "\n").map_err(io(&p))?;
            }
            say(&serde_json::to_string_pretty(&out).map_err(|e| e.to_string())?);
            Ok(status_code(out.status))
        }
        Cmd::Oracle { system, cap } => {
            let st = parse_system_file(&system).map_err(lib)?;
            let hit = first_hit(&st.system, &st.eps, &st.y, cap).map_err(lib)?;
            let (argmin, min) = brute_force_min(&st.system, &st.y, cap).map_err(lib)?;
            let v = serde_json::json!({
                "first_hit": hit.as_ref().map(|(n, _)| n.to_string()),
                "dists": hit.as_ref().map(|(_, d)| d.iter().map(Real::to_string).collect::<Vec<_>>()),
                "argmin": argmin.to_string(),
                "min_max_dist": min.to_string(),
                "min_max_dist_f64": min.to_f64(),
            });
            say(&serde_json::to_string_pretty(&v).unwrap());
            Ok(if hit.is_some() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::Exponent { k, d, x, trials, seed, generator, out } => {
            let cfg = SolverConfig { seed, ..Default::default() };
            let (rows, summary) = measure_exponent(generator, k, d, &x, trials, &cfg).map_err(lib)?;
            let mut text = String::from(CSV_HEADER);
            text.push('\n');
            for r in &rows {
                text += &fracparts::driver::csv_line(r);
                text.push('\n');
            }
            match &out {
                Some(p) => fs::write(p, &text).map_err(io(p))?,
                None => {
                    let _ = std::io::stdout().lock().write_all(text.as_bytes());
                }
            }
            let flagged = rows.iter().filter(|r| r.flag.is_some()).count();
            eprintln!(
                "k={k} d={d}: {}/{} trials fitted, median exponent {}, {flagged} flagged rows",
                summary.fitted,
                summary.trials,
                summary.median_exponent.map_or("n/a".into(), |m| format!("{m:.4}"))
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::VerifyCert { cert } => {
            let c = read_certificate(&cert).map_err(lib)?;
            let check = verify_certificate(&c);
            say(&serde_json::to_string_pretty(&check).map_err(|e| e.to_string())?);
            Ok(if check.ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::FourierScan { system, x, c_hit, max_box, precision, out } => {
            let mut st = match precision {
                Some(p) => parse_system_file_prec(&system, p),
                None => parse_system_file(&system),
            }
            .map_err(lib)?;
            if let Some(x) = x {
                st = SystemState::new(st.system, st.eps, Real::parse(&x).map_err(lib)?).map_err(lib)?;
            }
            let opts = DichotomyOptions { max_box, ..Default::default() };
            let dich = large_coefficients_with(&st.system, &st.eps, &st.y, c_hit, &opts).map_err(lib)?;
            emit(&dich, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Relations { system, dichotomy, q_rel, tol_rel, c_cfg, out } => {
            let st = parse_system_file(&system).map_err(lib)?;
            let dich: FourierDichotomy = read_json(&dichotomy)?;
            let opts = RelationOptions { q_rel, tol_rel, c_cfg };
            let rel = build_relations(&st.system, &st.eps, &st.y, &dich, &opts).map_err(lib)?;
            emit(&rel, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::DenomAnalyze { relations, delta, out } => {
            let rel: Vec<RelationTriple> = read_json(&relations)?;
            let rep = analyze(&rel, delta).map_err(lib)?;
            emit(&rep, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Lattice { input, wedge, reduce, generators, det_identity: _, bounds, eta, n_target, c_orth, out } => {
            if wedge {
                let m = parse_qmat(read_json(&input)?)?;
                let v = wedge_norm(&m).map_err(lib)?;
                emit(&serde_json::json!({ "wedge_norm": v.to_string(), "wedge_norm_f64": v.to_f64() }), &out)?;
            } else if reduce {
                let m = parse_qmat(read_json(&input)?)?;
                let b = reduce_basis(&LatticeBasis::new(m).map_err(lib)?).map_err(lib)?;
                emit(&b, &out)?;
            } else if generators {
                let st = parse_system_file(&input).map_err(lib)?;
                let eta = Real::parse(eta.as_deref().ok_or("--generators needs --eta")?).map_err(lib)?;
                let bounds: Vec<Real> = bounds.iter().map(|s| Real::parse(s)).collect::<Result<_, _>>().map_err(lib)?;
                let g = quasi_orthogonal_generators(&st.system, &bounds, &eta, n_target, c_orth).map_err(lib)?;
                emit(&g, &out)?;
            } else {
                let pair: MatPair = read_json(&input)?;
                let rep = sublattice_determinants(&parse_imat(pair.h1)?, &parse_imat(pair.h2)?).map_err(lib)?;
                emit(&rep, &out)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
