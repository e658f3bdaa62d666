//! The density-increment loop, solution certificates and their replay, the
//! exponent experiment, and file plumbing.

use std::path::Path;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denomstruct::cluster_by_denominator;
use crate::diophantine::{build_relations, RelationOptions};
use crate::error::{Error, Result};
use crate::expsum::{large_coefficients_with, DichotomyOptions, FourierDichotomy};
use crate::latgeom::{build_relation_lattice, quasi_orthogonal_generators_with, relation_point_count, GeneratorOptions, GeneratorOutcome};
use crate::real::{rat, rat_log2, Real, DEFAULT_PREC};
use crate::reduction::{check_step, default_delta_const, density_invariant, lift_solution, q0_pow, reduce_dimension, DensityReport, ReductionStep};
use crate::system::{below, brute_force_min, certainly_less, eval_system, first_hit, floor_u64, Poly, PolySystem, SystemFile, SystemState, DEFAULT_ENUM_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub c_hit: f64,
    pub c_cfg: f64,
    pub c_orth: f64,
    /// `None` selects `1/(16 (k+d)^2)` at each level
    pub delta_const: Option<Real>,
    pub tol_rel: f64,
    pub c_slack: Option<f64>,
    pub precision_bits: u32,
    pub enum_cap: u64,
    pub max_depth: usize,
    pub brute_force_threshold: u64,
    pub max_box: u64,
    pub point_cap: u64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c_hit: 0.05,
            c_cfg: 4.0,
            c_orth: 0.25,
            delta_const: None,
            tol_rel: 1.0,
            c_slack: None,
            precision_bits: DEFAULT_PREC,
            enum_cap: DEFAULT_ENUM_CAP,
            max_depth: 8,
            brute_force_threshold: 1000,
            max_box: 1 << 15,
            point_cap: 20_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Settings under which planted structure is pursued even when hits are
    /// plentiful: the hit-density branch effectively never fires and the
    /// reduction keeps a usable horizon.
    pub fn structural() -> SolverConfig {
        SolverConfig { c_hit: 1e12, delta_const: Some(Real::ratio(1, 2)), brute_force_threshold: 16, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.brute_force_threshold < 1 {
            return Err(Error::InvalidInput("brute_force_threshold must be >= 1".into()));
        }
        if !(self.c_cfg > 2.0) {
            return Err(Error::InvalidInput("C_cfg must exceed 2".into()));
        }
        if !(self.c_hit > 0.0) || !(self.c_orth > 0.0 && self.c_orth <= 1.0) || !(self.tol_rel > 0.0) {
            return Err(Error::InvalidInput("c_hit, tol_rel must be positive and c_orth in (0, 1]".into()));
        }
        if let Some(d) = &self.delta_const {
            if !d.value().is_positive() || d.value() >= &BigRational::one() {
                return Err(Error::InvalidInput("delta_const must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Found,
    NotFound,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Terminal {
    FoundN {
        #[serde(with = "crate::serde_str::one")]
        n: BigInt,
        dists: Vec<Real>,
        /// the solution at each level, root first
        #[serde(with = "crate::serde_str::vec")]
        path: Vec<BigInt>,
    },
    Exhausted {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub root: SystemState,
    pub config: SolverConfig,
    pub chain: Vec<ReductionStep>,
    pub terminal: Terminal,
}

impl Certificate {
    /// Builds a `FoundN` certificate, re-verifying the root distances.
    pub fn found(root: SystemState, config: SolverConfig, chain: Vec<ReductionStep>, path: Vec<BigInt>) -> Result<Certificate> {
        let n = path.first().cloned().ok_or(Error::EmptyInput)?;
        let dists = verify_point(&root, &n)?;
        Ok(Certificate { root, config, chain, terminal: Terminal::FoundN { n, dists, path } })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Exact distances at `n`, failing unless `1 <= n < y` and every distance is
/// decisively below its tolerance.
pub fn verify_point(state: &SystemState, n: &BigInt) -> Result<Vec<Real>> {
    if !n.is_positive() || BigRational::from_integer(n.clone()) >= *state.y.value() {
        return Err(Error::HorizonOverflow { n: n.to_string(), y: state.y.to_string() });
    }
    let dists = eval_system(&state.system, n);
    for (i, (d, e)) in dists.iter().zip(state.eps.eps()).enumerate() {
        if !certainly_less(d, e) {
            return Err(Error::LiftVerification { index: i, dist: d.to_string(), eps: e.to_string() });
        }
    }
    Ok(dists)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// integers evaluated by scans (hit counts, direct and brute-force searches)
    pub evaluations: u64,
    pub reductions: u64,
    pub branches: Vec<String>,
    pub fallbacks: Vec<String>,
    pub density: Vec<DensityReport>,
    /// whether `Delta^-1 <= x^(2/C)` held at the root
    pub gate_held: bool,
    pub precision_failure: bool,
    pub precision_retry: bool,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: Status,
    #[serde(with = "crate::serde_str::opt")]
    pub n: Option<BigInt>,
    pub certificate: Certificate,
    pub stats: Stats,
}

enum Level {
    Found { path: Vec<BigInt>, chain: Vec<ReductionStep> },
    Exhausted(String),
    Unknown(String),
}

pub fn solve(state: &SystemState, config: &SolverConfig) -> SolveOutcome {
    let start = Instant::now();
    let mut stats = Stats { gate_held: gate(state, config.c_cfg), ..Default::default() };
    let level = match config.validate() {
        Ok(()) => search(state, 0, config, &mut stats),
        Err(e) => Level::Unknown(e.to_string()),
    };
    let (status, n, terminal_cert) = match level {
        Level::Found { path, chain } => match Certificate::found(state.clone(), config.clone(), chain.clone(), path.clone()) {
            Ok(c) => (Status::Found, Some(path[0].clone()), c),
            Err(e) => (Status::Inconclusive, None, exhausted(state, config, chain, format!("root re-verification failed: {e}"))),
        },
        Level::Exhausted(r) => (Status::NotFound, None, exhausted(state, config, Vec::new(), r)),
        Level::Unknown(r) => (Status::Inconclusive, None, exhausted(state, config, Vec::new(), r)),
    };
    stats.wall_ms = start.elapsed().as_millis() as u64;
    SolveOutcome { status, n, certificate: terminal_cert, stats }
}

fn exhausted(state: &SystemState, config: &SolverConfig, chain: Vec<ReductionStep>, reason: String) -> Certificate {
    Certificate { root: state.clone(), config: config.clone(), chain, terminal: Terminal::Exhausted { reason } }
}

/// `Delta^-1 <= x^(2/C)`, in log space.
pub fn gate(state: &SystemState, c: f64) -> bool {
    -rat_log2(state.eps.delta_product().value()) <= 2.0 / c * rat_log2(state.y.value())
}

fn search(state: &SystemState, depth: usize, cfg: &SolverConfig, stats: &mut Stats) -> Level {
    let hi = match below(&state.y) {
        Ok(h) => h,
        Err(e) => return Level::Unknown(e.to_string()),
    };
    if hi == 0 {
        return Level::Exhausted("no positive integer below the horizon".into());
    }
    if hi <= cfg.brute_force_threshold || depth >= cfg.max_depth {
        stats.branches.push(format!("depth {depth}: brute force"));
        return brute(state, cfg, stats);
    }
    match structured(state, depth, cfg, stats) {
        Some(l) => l,
        None => {
            stats.fallbacks.push(format!("depth {depth}: brute force"));
            brute(state, cfg, stats)
        }
    }
}

fn brute(state: &SystemState, cfg: &SolverConfig, stats: &mut Stats) -> Level {
    match first_hit(&state.system, &state.eps, &state.y, cfg.enum_cap) {
        Ok(Some((n, _))) => {
            stats.evaluations += n;
            Level::Found { path: vec![BigInt::from(n)], chain: Vec::new() }
        }
        Ok(None) => {
            stats.evaluations += below(&state.y).unwrap_or(0);
            Level::Exhausted("exhaustive scan found no solution".into())
        }
        Err(e) => Level::Unknown(format!("brute force unavailable: {e}")),
    }
}

fn structured(state: &SystemState, depth: usize, cfg: &SolverConfig, stats: &mut Stats) -> Option<Level> {
    let (sys, eps, x) = (&state.system, &state.eps, &state.y);
    let note = |stats: &mut Stats, s: String| stats.fallbacks.push(format!("depth {depth}: {s}"));
    let opts = DichotomyOptions { max_box: cfg.max_box, enum_cap: cfg.enum_cap };
    let dich = match large_coefficients_with(sys, eps, x, cfg.c_hit, &opts) {
        Ok(d) => d,
        Err(e) => {
            note(stats, format!("dichotomy: {e}"));
            return None;
        }
    };
    stats.evaluations += floor_u64(x).unwrap_or(0);
    if let FourierDichotomy::HitDensity { .. } = dich {
        stats.branches.push(format!("depth {depth}: hit density"));
        return match first_hit(sys, eps, x, cfg.enum_cap) {
            Ok(Some((n, _))) => Some(Level::Found { path: vec![BigInt::from(n)], chain: Vec::new() }),
            _ => {
                note(stats, "hit-density scan found nothing".into());
                None
            }
        };
    }
    stats.branches.push(format!("depth {depth}: large coefficients"));
    if state.k() < 2 {
        note(stats, "k = 1 cannot be reduced".into());
        return None;
    }
    let ropts = RelationOptions { q_rel: None, tol_rel: cfg.tol_rel, c_cfg: cfg.c_cfg };
    let rels = match build_relations(sys, eps, x, &dich, &ropts) {
        Ok(r) if !r.is_empty() => r,
        Ok(_) => {
            note(stats, "no relations".into());
            return None;
        }
        Err(e) => {
            note(stats, format!("relations: {e}"));
            return None;
        }
    };
    let cluster = match cluster_by_denominator(&rels) {
        Ok(c) => c,
        Err(e) => {
            note(stats, format!("clustering: {e}"));
            return None;
        }
    };
    let lcm = cluster.q0.iter().fold(1u64, |a, &q| num_integer::lcm(a, q));
    let mut ladder = vec![lcm];
    if cluster.q_merged != lcm {
        ladder.push(cluster.q_merged);
    }
    let bounds: Vec<Real> = eps.eps().iter().map(|e| Real::exact(e.value().recip())).collect();
    let delta = cfg.delta_const.clone().unwrap_or_else(|| default_delta_const(state.k(), sys.d()));
    let gopts = GeneratorOptions { c_orth: cfg.c_orth, c_slack: cfg.c_slack, r_cap: None };
    for q0 in ladder {
        let eta_v = (q0_pow(q0, cfg.c_cfg).value() / (x.value() * rat(2, 1))).min(rat(1, 100));
        let eta = Real::exact(eta_v);
        let scaled = sys.scale(&Real::from_int(q0));
        let lat = match build_relation_lattice(&scaled, &bounds, &eta) {
            Ok(l) => l,
            Err(e) => {
                if matches!(e, Error::Precision { .. }) {
                    stats.precision_failure = true;
                }
                note(stats, format!("lattice (q0 = {q0}): {e}"));
                return None;
            }
        };
        let n_target = relation_point_count(&lat, cfg.point_cap).unwrap_or(cluster.members.len() as u64 + 1).max(2);
        let gens = match quasi_orthogonal_generators_with(&scaled, &bounds, &eta, n_target, &gopts) {
            Ok(GeneratorOutcome::Found(g)) => g,
            Ok(GeneratorOutcome::NoShortVector { reason, .. }) => {
                note(stats, format!("generators (q0 = {q0}): {reason}"));
                continue;
            }
            Err(e) => {
                note(stats, format!("generators (q0 = {q0}): {e}"));
                continue;
            }
        };
        let step = match reduce_dimension(state, &gens, q0, cfg.c_cfg, &delta) {
            Ok(s) => s,
            Err(e) => {
                note(stats, format!("reduction (q0 = {q0}): {e}"));
                continue;
            }
        };
        stats.reductions += 1;
        stats.density.push(density_invariant(state, &step, cfg.c_cfg));
        assert!(step.k_prime < state.k());
        match search(&step.child, depth + 1, cfg, stats) {
            Level::Found { mut path, mut chain } => match lift_solution(&step, &path[0], state) {
                Ok((n, _)) => {
                    path.insert(0, n);
                    chain.insert(0, step);
                    return Some(Level::Found { path, chain });
                }
                Err(e) => {
                    note(stats, format!("lift: {e}"));
                    return None;
                }
            },
            Level::Exhausted(r) | Level::Unknown(r) => {
                note(stats, format!("child at depth {}: {r}", depth + 1));
                return None;
            }
        }
    }
    None
}

/// Solve a system file at the configured precision, retrying once at double
/// precision when a rounding guard tripped and nothing was found.
pub fn solve_file(path: &Path, config: &SolverConfig) -> Result<SolveOutcome> {
    let state = parse_system_file_prec(path, config.precision_bits)?;
    let out = solve(&state, config);
    if out.status == Status::Found || !out.stats.precision_failure {
        return Ok(out);
    }
    let doubled = SolverConfig { precision_bits: config.precision_bits.saturating_mul(2), ..config.clone() };
    let state = parse_system_file_prec(path, doubled.precision_bits)?;
    let mut again = solve(&state, &doubled);
    again.stats.precision_retry = true;
    Ok(again)
}

// ---------------------------------------------------------------------------
// certificate replay

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CertCheck {
    pub ok: bool,
    pub steps_checked: usize,
    pub failures: Vec<String>,
}

/// Re-checks every step against its parent and the terminal claim, without
/// searching.
pub fn verify_certificate(cert: &Certificate) -> CertCheck {
    let mut failures = Vec::new();
    let mut states = vec![cert.root.clone()];
    for (i, step) in cert.chain.iter().enumerate() {
        let parent = states.last().unwrap();
        if step.k_prime >= parent.k() {
            failures.push(format!("step {i}: k' does not decrease"));
        }
        failures.extend(check_step(parent, step).into_iter().map(|f| format!("step {i}: {f}")));
        states.push(step.child.clone());
    }
    match &cert.terminal {
        Terminal::FoundN { n, dists, path } => {
            if path.len() != cert.chain.len() + 1 {
                failures.push("path length does not match the chain".into());
            } else {
                if &path[0] != n {
                    failures.push("path does not start at n".into());
                }
                for (lvl, (st, m)) in states.iter().zip(path).enumerate() {
                    if let Err(e) = verify_point(st, m) {
                        failures.push(format!("level {lvl}: {e}"));
                    }
                }
                for (i, step) in cert.chain.iter().enumerate() {
                    if path[i] != &path[i + 1] * step.lift_factor() {
                        failures.push(format!("step {i}: n is not n' q0 D2"));
                    }
                }
                let fresh = eval_system(&cert.root.system, n);
                if fresh.iter().map(Real::to_string).ne(dists.iter().map(Real::to_string)) {
                    failures.push("stored distances differ from re-evaluation".into());
                }
            }
        }
        Terminal::Exhausted { .. } => {}
    }
    CertCheck { ok: failures.is_empty(), steps_checked: cert.chain.len(), failures }
}

// ---------------------------------------------------------------------------
// files

pub fn parse_system_file(path: &Path) -> Result<SystemState> {
    parse_system_file_prec(path, DEFAULT_PREC)
}

pub fn parse_system_file_prec(path: &Path, prec: u32) -> Result<SystemState> {
    let text = std::fs::read_to_string(path)?;
    parse_system_str(&text, prec)
}

pub fn parse_system_str(text: &str, prec: u32) -> Result<SystemState> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        field: format!("line {} column {}", e.line(), e.column()),
        msg: e.to_string(),
    })?;
    file.into_state(prec)
}

pub fn emit_state(state: &SystemState, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(state)?)?;
    Ok(())
}

pub fn emit_outcome(outcome: &SolveOutcome, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(outcome)?)?;
    Ok(())
}

pub fn read_certificate(path: &Path) -> Result<Certificate> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

// ---------------------------------------------------------------------------
// exponent experiment

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorSpec {
    /// every coefficient uniform in `[0, 1)`
    Uniform,
    /// `alpha X^d` with `alpha` uniform in `[0, 1)`
    Monomial,
    /// the zero polynomial
    Zero,
}

impl std::str::FromStr for GeneratorSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GeneratorSpec::Uniform),
            "monomial" => Ok(GeneratorSpec::Monomial),
            "zero" => Ok(GeneratorSpec::Zero),
            _ => Err(Error::InvalidInput(format!("unknown generator '{s}' (uniform, monomial, zero)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub k: usize,
    pub d: usize,
    pub x: u64,
    pub trial_id: u64,
    pub seed: u64,
    pub min_max_dist: Option<Real>,
    /// slope of `-log(min_max)` against `log x` over the trial's grid
    pub fitted_exponent: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub k: usize,
    pub d: usize,
    pub trials: u64,
    pub fitted: u64,
    pub median_exponent: Option<f64>,
}

/// Uniform dyadic in `[0, 1)` with `bits` bits, from the stream keyed by
/// `(seed, trial)` at a word offset fixed by `index`.
pub fn draw_coeff(seed: u64, trial: u64, index: u64, bits: u32) -> BigRational {
    let bits = bits.clamp(1, 2048);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.set_word_pos(index as u128 * 64);
    let words = bits.div_ceil(32) as usize;
    let mut m = BigInt::zero();
    for _ in 0..words {
        m = (m << 32) + BigInt::from(rng.next_u32());
    }
    m >>= words * 32 - bits as usize;
    BigRational::new(m, BigInt::one() << bits as usize)
}

pub fn random_system(spec: GeneratorSpec, k: usize, d: usize, seed: u64, trial: u64, bits: u32) -> Result<PolySystem> {
    let polys = (0..k)
        .map(|i| {
            let cs = (1..=d)
                .map(|j| match spec {
                    GeneratorSpec::Zero => BigRational::zero(),
                    GeneratorSpec::Monomial if j < d => BigRational::zero(),
                    _ => draw_coeff(seed, trial, (i * d + j - 1) as u64, bits),
                })
                .collect();
            Poly::from_rats(cs)
        })
        .collect::<Result<Vec<_>>>()?;
    PolySystem::new(polys)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn measure_exponent(
    spec: GeneratorSpec,
    k: usize,
    d: usize,
    x_grid: &[u64],
    trials: u64,
    config: &SolverConfig,
) -> Result<(Vec<ExperimentRow>, ExperimentSummary)> {
    if trials < 1 || k < 1 || d < 1 {
        return Err(Error::Precondition("need trials, k, d >= 1".into()));
    }
    if x_grid.is_empty() || x_grid.windows(2).any(|w| w[0] >= w[1]) || x_grid[0] < 2 {
        return Err(Error::Precondition("x grid must be strictly ascending and start at >= 2".into()));
    }
    let seed = config.seed;
    let per_trial: Vec<Vec<ExperimentRow>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sys = random_system(spec, k, d, seed, t, config.precision_bits);
            let mut rows: Vec<ExperimentRow> = x_grid
                .iter()
                .map(|&x| {
                    let base = ExperimentRow { k, d, x, trial_id: t, seed, min_max_dist: None, fitted_exponent: None, flag: None };
                    let res = sys.as_ref().map_err(|e| e.to_string()).and_then(|s| {
                        brute_force_min(s, &Real::from_int(x), config.enum_cap).map_err(|e| e.to_string())
                    });
                    match res {
                        Ok((_, v)) => {
                            let flag = v.is_zero().then(|| "degenerate: min_max_dist = 0".to_string());
                            ExperimentRow { min_max_dist: Some(v), flag, ..base }
                        }
                        Err(e) => ExperimentRow { flag: Some(format!("skipped: {e}")), ..base },
                    }
                })
                .collect();
            let usable: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.flag.is_none())
                .map(|r| ((r.x as f64).ln(), r.min_max_dist.as_ref().unwrap().to_f64().ln()))
                .collect();
            if usable.len() >= 2 && usable.len() == rows.len() {
                let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
                let e = -ls_slope(&xs, &ys);
                rows.iter_mut().for_each(|r| r.fitted_exponent = Some(e));
            }
            rows
        })
        .collect();
    let mut exps: Vec<f64> = per_trial.iter().filter_map(|r| r[0].fitted_exponent).collect();
    let fitted = exps.len() as u64;
    let summary = ExperimentSummary { k, d, trials, fitted, median_exponent: median(&mut exps) };
    Ok((per_trial.into_iter().flatten().collect(), summary))
}

pub const CSV_HEADER: &str = "k,d,x,trial_id,seed,min_max_dist,fitted_exponent";

/// One CSV line; missing values are empty fields.
pub fn csv_line(r: &ExperimentRow) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.k,
        r.d,
        r.x,
        r.trial_id,
        r.seed,
        r.min_max_dist.as_ref().map(|v| format!("{:e}", v.to_f64())).unwrap_or_default(),
        r.fitted_exponent.map(|e| format!("{e:.6}")).unwrap_or_default()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Epsilons;

    fn state(rows: &[&[&str]], eps: &[&str], x: i64) -> SystemState {
        SystemState::new(PolySystem::parse(rows).unwrap(), Epsilons::parse(eps).unwrap(), Real::from_int(x)).unwrap()
    }

    #[test]
    fn half_x_small_horizon() {
        let st = state(&[&["1/2"]], &["0.01"], 10);
        let out = solve(&st, &SolverConfig::default());
        assert_eq!(out.status, Status::Found);
        assert_eq!(out.n, Some(BigInt::from(2)));
        assert!(verify_certificate(&out.certificate).ok);
    }

    #[test]
    fn duplicate_sqrt2_via_reduction() {
        let st = state(&[&["0", "sqrt(2)"], &["0", "sqrt(2)"]], &["0.05", "0.05"], 10_000);
        let out = solve(&st, &SolverConfig::structural());
        assert_eq!(out.status, Status::Found, "{:?}", out.stats);
        assert_eq!(out.certificate.chain.len(), 1, "{:?}", out.stats);
        assert_eq!(out.certificate.chain[0].gens.h_vecs, crate::intmat::to_imat(&[vec![1, -1]]));
        let check = verify_certificate(&out.certificate);
        assert!(check.ok, "{check:?}");
        assert!(out.stats.density.iter().all(|d| d.pass));
        // oracle comparison
        let (_, best) = brute_force_min(&st.system, &st.y, 1 << 20).unwrap();
        assert!(best.value() < &rat(1, 20));
        let n = out.n.unwrap();
        assert!(eval_system(&st.system, &n).iter().all(|d| d.value() < &rat(1, 20)));
    }

    #[test]
    fn single_sqrt2() {
        let st = state(&[&["0", "sqrt(2)"]], &["0.05"], 10_000);
        let out = solve(&st, &SolverConfig::default());
        assert_eq!(out.status, Status::Found);
        let (_, best) = brute_force_min(&st.system, &st.y, 1 << 20).unwrap();
        let n = out.n.unwrap();
        let dn = eval_system(&st.system, &n);
        assert!(dn[0].value() < &rat(1, 20) && best.value() <= dn[0].value());
    }

    #[test]
    fn not_found_is_exhaustive() {
        // ||n/2|| is 0 or 1/2; n = 1 only
        let st = state(&[&["1/2"]], &["0.1"], 2);
        let out = solve(&st, &SolverConfig::default());
        assert_eq!(out.status, Status::NotFound);
        assert!(matches!(out.certificate.terminal, Terminal::Exhausted { .. }));
    }

    #[test]
    fn tampered_certificate_rejected() {
        let st = state(&[&["0", "sqrt(2)"], &["0", "sqrt(2)"]], &["0.05", "0.05"], 10_000);
        let out = solve(&st, &SolverConfig::structural());
        let mut c = out.certificate.clone();
        if let Terminal::FoundN { n, .. } = &mut c.terminal {
            *n += 1;
        }
        assert!(!verify_certificate(&c).ok);
        let mut c = out.certificate.clone();
        c.chain[0].q0 = 2;
        assert!(!verify_certificate(&c).ok);
    }

    #[test]
    fn deterministic_certificates() {
        let st = state(&[&["0", "sqrt(3)"], &["0", "sqrt(3)"], &["1/7", "0"]], &["0.05", "0.05", "0.1"], 50_000);
        let a = solve(&st, &SolverConfig::structural());
        let b = solve(&st, &SolverConfig::structural());
        assert_eq!(a.certificate.to_json(), b.certificate.to_json());
    }

    #[test]
    fn file_round_trip() {
        let s = parse_system_str(r#"{"d":1,"polys":[["1/2"]],"eps":["0.01"],"x":"100"}"#, DEFAULT_PREC).unwrap();
        assert_eq!(s.k(), 1);
        assert!(parse_system_str(r#"{"d":0,"polys":[[]],"eps":["0.01"],"x":"100"}"#, DEFAULT_PREC).is_err());
        assert!(parse_system_str(r#"{"d":1,"polys":[["1/2"]],"eps":["0.7"],"x":"100"}"#, DEFAULT_PREC).is_err());
        assert!(parse_system_str(r#"{"d":1,"polys":[["1/2", "1"]],"eps":["0.1"],"x":"100"}"#, DEFAULT_PREC).is_err());
        let r = parse_system_str(r#"{"d":2,"polys":[["0","sqrt(2)/1"]],"eps":["0.01"],"x":"100"}"#, DEFAULT_PREC).unwrap();
        assert!(!r.system.poly(0).coeff(2).is_exact());
        let once = serde_json::to_string(&r).unwrap();
        let twice = serde_json::to_string(&parse_system_str(&once, DEFAULT_PREC).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn exponent_harness() {
        let cfg = SolverConfig { seed: 7, ..Default::default() };
        let (rows, sum) = measure_exponent(GeneratorSpec::Uniform, 1, 1, &[1000, 10_000, 100_000], 9, &cfg).unwrap();
        assert_eq!(rows.len(), 27);
        let m = sum.median_exponent.unwrap();
        assert!(m > 0.7 && m < 1.3, "{m}");
        let (rows, sum) = measure_exponent(GeneratorSpec::Zero, 1, 2, &[100, 1000], 2, &cfg).unwrap();
        assert!(rows.iter().all(|r| r.flag.is_some() && r.min_max_dist.as_ref().unwrap().is_zero()));
        assert_eq!(sum.median_exponent, None);
        // reproducible draws
        assert_eq!(draw_coeff(1, 2, 3, 64), draw_coeff(1, 2, 3, 64));
        assert_ne!(draw_coeff(1, 2, 3, 64), draw_coeff(1, 2, 4, 64));
        assert!(measure_exponent(GeneratorSpec::Uniform, 1, 1, &[100, 10], 1, &cfg).is_err());
    }

    #[test]
    fn slope_and_median() {
        assert!((ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-12);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
