//! Named experiments driven by JSON configurations.
//!
//! A scenario expands its sweep lists into jobs, runs them (in parallel when
//! the `parallel` feature is on), and assembles a CSV table in sweep order
//! together with a JSON metadata record. Random inputs are drawn from
//! [`SeededRng`] streams forked from `rng_seed` by the seed index, so a
//! configuration fully determines its output.

mod config;
mod fields;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

pub use config::{
    apply_override, default_config, resolve_config, BoundaryData, EnergyConfig, ExtendConfig, FieldConfig,
    ScenarioConfig, Subcommand, SweepConfig,
};

use crate::error::{Error, Result};
use crate::exponent::{build_exponent, ExponentField};
use crate::grid::{make_domain, sym_gradient, whitney_decomposition, GridDomain, WhitneyStats, WHITNEY_UPPER};
use crate::linearize::{gamma_convergence_experiment, EnergySpec};
use crate::par;
use crate::rigidity::{
    korn_report, lusin_truncate, mixed_korn_decompose, mixed_rigidity_decompose, nitsche_extend, rigidity_report,
    weighted_poincare_report, AffineGraph, MixedSplit, RigidityReport,
};
use crate::rng::SeededRng;
use crate::varnorm::{luxemburg_norm, maximal_function, modular, norm, MaximalMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Bool(bool),
    Text(String),
    /// Undefined value, e.g. the ratio of two vanishing sides.
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn is_non_finite(&self) -> bool {
        matches!(self, Cell::Num(v) if !v.is_finite())
    }
}

/// A result table whose last column is the row flag (`ok` or a label).
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Whether each row carries a failure flag.
    pub failed: Vec<bool>,
    /// Messages of errors raised inside rows.
    pub errors: Vec<String>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        let mut header: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        header.push("flag".into());
        Self {
            header,
            rows: Vec::new(),
            failed: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn push_error(&mut self, cells: Vec<Cell>, e: &Error) {
        self.errors.push(format!("row {}: {e}", self.rows.len()));
        self.push(cells, error_flag(e));
    }

    /// Appends a row that fails unless `flag` is `ok`.
    fn push(&mut self, cells: Vec<Cell>, flag: String) {
        let failed = flag != "ok";
        self.push_row(cells, flag, failed);
    }

    /// Appends a row; a non-finite number always marks it as failed.
    fn push_row(&mut self, mut cells: Vec<Cell>, mut flag: String, mut failed: bool) {
        debug_assert_eq!(cells.len() + 1, self.header.len());
        if !failed && cells.iter().any(Cell::is_non_finite) {
            flag = if flag == "ok" { "non-finite".into() } else { format!("{flag}+non-finite") };
            failed = true;
        }
        cells.push(Cell::Text(flag));
        self.rows.push(cells);
        self.failed.push(failed);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::render).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn flagged(&self) -> usize {
        self.failed.iter().filter(|f| **f).count()
    }
}

/// In-memory result of a scenario.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub csv: String,
    pub rows: usize,
    pub flagged: usize,
    /// Fitted constants and summary statistics.
    pub constants: Value,
    pub errors: Vec<String>,
}

/// Exit status and message of [`run`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunStatus {
    pub code: i32,
    pub message: String,
}

/// Resolves the configuration, runs the scenario and writes `data.csv` and
/// `meta.json` into `out_dir`.
pub fn run(subcommand: &str, config_text: Option<&str>, overrides: &[String], out_dir: &Path) -> RunStatus {
    let invalid = |e: Error| RunStatus {
        code: EXIT_INVALID,
        message: e.to_string(),
    };
    let sub: Subcommand = match subcommand.parse() {
        Ok(s) => s,
        Err(e) => return invalid(e),
    };
    let (config, tree) = match resolve_config(sub, config_text, overrides) {
        Ok(c) => c,
        Err(e) => return invalid(e),
    };
    if let Err(e) = fs::create_dir_all(out_dir) {
        return invalid(Error::Config(format!("cannot create {}: {e}", out_dir.display())));
    }
    let outcome = match execute(&config) {
        Ok(o) => o,
        Err(e) => return invalid(e),
    };
    let meta = json!({
        "subcommand": sub.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": tree,
        "rows": outcome.rows,
        "flagged_rows": outcome.flagged,
        "constants": outcome.constants,
        "errors": outcome.errors,
    });
    let write = || -> Result<()> {
        fs::write(out_dir.join("data.csv"), &outcome.csv)?;
        fs::write(out_dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    };
    if let Err(e) = write() {
        return invalid(Error::Config(format!("cannot write to {}: {e}", out_dir.display())));
    }
    if outcome.flagged > 0 {
        RunStatus {
            code: EXIT_FLAGGED,
            message: format!("{} of {} rows flagged", outcome.flagged, outcome.rows),
        }
    } else {
        RunStatus {
            code: EXIT_OK,
            message: format!("{} rows", outcome.rows),
        }
    }
}

/// Setup shared by every job at one resolution.
struct Level {
    resolution: usize,
    domain: Arc<GridDomain>,
    p: ExponentField,
}

fn levels(config: &ScenarioConfig) -> Result<Vec<Level>> {
    config
        .sweep
        .resolutions
        .iter()
        .map(|&resolution| {
            let domain = make_domain(config.domain.clone(), resolution)?;
            let p = build_exponent(&config.exponent, &domain)?;
            Ok(Level { resolution, domain, p })
        })
        .collect()
}

/// Runs a validated configuration without touching the filesystem.
///
/// Errors while building domains or exponents are configuration errors;
/// errors inside a job only flag that row.
pub fn execute(config: &ScenarioConfig) -> Result<Outcome> {
    let levels = levels(config)?;
    let root = SeededRng::new(config.rng_seed);
    let (table, constants) = match config.subcommand {
        Subcommand::Norm => run_norm(config, &levels, &root),
        Subcommand::Rigidity => run_ratio(config, &levels, &root, Estimator::Rigidity),
        Subcommand::Poincare => run_ratio(config, &levels, &root, Estimator::Poincare),
        Subcommand::Korn => run_korn(config, &levels, &root),
        Subcommand::Mixed => run_mixed(config, &levels, &root),
        Subcommand::Extend => run_extend(config, &levels, &root)?,
        Subcommand::Lusin => run_lusin(config, &levels, &root),
        Subcommand::Gamma => run_gamma(config, &levels)?,
        Subcommand::Whitney => run_whitney(&levels),
        Subcommand::Maximal => run_maximal(config, &levels, &root),
    };
    Ok(Outcome {
        csv: table.to_csv(),
        rows: table.rows.len(),
        flagged: table.flagged(),
        constants,
        errors: table.errors,
    })
}

/// Cartesian product `levels × seeds × params` in sweep order.
fn jobs<'a, T: Copy>(levels: &'a [Level], seeds: &[u64], params: &[T]) -> Vec<(&'a Level, u64, T)> {
    let mut out = Vec::new();
    for level in levels {
        for &seed in seeds {
            for &param in params {
                out.push((level, seed, param));
            }
        }
    }
    out
}

fn error_flag(e: &Error) -> String {
    match e {
        Error::NotConverged { .. } => "not-converged".into(),
        Error::NonFinite(_) => "non-finite".into(),
        _ => "error".into(),
    }
}

fn range(values: impl IntoIterator<Item = f64>) -> Value {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Value::Null;
    }
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    json!({"min": lo, "max": hi, "spread": if lo > 0.0 { hi / lo } else { f64::INFINITY }})
}

fn num_at(row: &[Cell], k: usize) -> f64 {
    match row[k] {
        Cell::Num(v) => v,
        _ => f64::NAN,
    }
}

fn run_norm(config: &ScenarioConfig, levels: &[Level], root: &SeededRng) -> (Table, Value) {
    let mut table = Table::new(&["resolution", "h", "seed", "scale", "norm", "modular", "bracket_slack"]);
    let results = par::map_slice(&jobs(levels, &config.sweep.seeds, &config.sweep.eps), |&(lv, seed, c)| {
        let mut rng = root.fork(seed);
        let f = fields::scalar_field(&lv.domain, &mut rng, config.field.amplitude).scale(c);
        let res = (|| -> Result<(f64, f64)> { Ok((luxemburg_norm(&f, &lv.p)?.value, modular(&f, &lv.p)?)) })();
        (lv, seed, c, res)
    });
    for (lv, seed, c, res) in results {
        let keys = vec![Cell::Int(lv.resolution as u64), Cell::Num(lv.domain.spacing()), Cell::Int(seed), Cell::Num(c)];
        match res {
            Ok((nv, rho)) => {
                let (pm, pp) = (lv.p.p_minus(), lv.p.p_plus());
                let lo = nv.powf(pm).min(nv.powf(pp));
                let hi = nv.powf(pm).max(nv.powf(pp));
                let slack = (rho - lo).min(hi - rho);
                let flag = if slack < -1e-8 * hi.max(1.0) { "bracket" } else { "ok" };
                let mut cells = keys;
                cells.extend([Cell::Num(nv), Cell::Num(rho), Cell::Num(slack)]);
                table.push(cells, flag.into());
            }
            Err(e) => {
                let mut cells = keys;
                cells.extend([Cell::Empty, Cell::Empty, Cell::Empty]);
                table.push_error(cells, &e);
            }
        }
    }
    let slack = range(table.rows.iter().map(|r| num_at(r, 6)));
    (table, json!({"bracket_slack": slack}))
}

#[derive(Clone, Copy)]
enum Estimator {
    Rigidity,
    Poincare,
}

fn ratio_cells(rep: &RigidityReport) -> Vec<Cell> {
    vec![
        Cell::Num(rep.lhs_norm),
        Cell::Num(rep.rhs_norm),
        rep.ratio.map_or(Cell::Empty, Cell::Num),
        Cell::Bool(rep.exact_zero),
    ]
}

fn run_ratio(config: &ScenarioConfig, levels: &[Level], root: &SeededRng, which: Estimator) -> (Table, Value) {
    let mut table = Table::new(&["resolution", "h", "seed", "eps", "lhs", "rhs", "ratio", "exact_zero"]);
    let results = par::map_slice(&jobs(levels, &config.sweep.seeds, &config.sweep.eps), |&(lv, seed, eps)| {
        let mut rng = root.fork(seed);
        let rep = match which {
            Estimator::Rigidity => {
                let u = fields::perturbed_rotation(&lv.domain, &mut rng, eps * config.field.amplitude);
                rigidity_report(&u, &lv.p)
            }
            Estimator::Poincare => {
                let f = fields::scalar_field(&lv.domain, &mut rng, config.field.amplitude).scale(eps);
                weighted_poincare_report(&f, &lv.p)
            }
        };
        (lv, seed, eps, rep)
    });
    for (lv, seed, eps, rep) in results {
        let mut cells = vec![Cell::Int(lv.resolution as u64), Cell::Num(lv.domain.spacing()), Cell::Int(seed), Cell::Num(eps)];
        match rep {
            Ok(rep) => {
                cells.extend(ratio_cells(&rep));
                table.push(cells, "ok".into());
            }
            Err(e) => {
                cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
                table.push_error(cells, &e);
            }
        }
    }
    let ratios = range(table.rows.iter().map(|r| num_at(r, 6)));
    (table, json!({"ratio": ratios}))
}

fn run_korn(config: &ScenarioConfig, levels: &[Level], root: &SeededRng) -> (Table, Value) {
    let mut table = Table::new(&[
        "resolution",
        "h",
        "seed",
        "eps",
        "lhs",
        "rhs",
        "ratio",
        "exact_zero",
        "mixed_residual",
        "mixed_ratio_f",
        "mixed_ratio_g",
    ]);
    let results = par::map_slice(&jobs(levels, &config.sweep.seeds, &config.sweep.eps), |&(lv, seed, eps)| {
        let mut rng = root.fork(seed);
        let u = fields::perturbed_skew(&lv.domain, &mut rng, eps * config.field.amplitude);
        let res = (|| {
            let rep = korn_report(&u, &lv.p)?;
            let q = lv.p.map(|v| config.field.q_scale * v)?;
            let eu = sym_gradient(&u)?;
            let (f, g) = fields::indicator_split(&eu);
            let mixed = mixed_korn_decompose(&u, &MixedSplit::new(f, g, lv.p.clone(), q)?)?;
            Ok::<_, Error>((rep, mixed.report))
        })();
        (lv, seed, eps, res)
    });
    for (lv, seed, eps, res) in results {
        let h = lv.domain.spacing();
        let mut cells = vec![Cell::Int(lv.resolution as u64), Cell::Num(h), Cell::Int(seed), Cell::Num(eps)];
        match res {
            Ok((rep, mixed)) => {
                cells.extend(ratio_cells(&rep));
                cells.extend([Cell::Num(mixed.residual), Cell::Num(mixed.ratio_f), Cell::Num(mixed.ratio_g)]);
                let flag = if mixed.residual > 10.0 * h { "residual" } else { "ok" };
                table.push(cells, flag.into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 7));
                table.push_error(cells, &e);
            }
        }
    }
    let c = json!({
        "ratio": range(table.rows.iter().map(|r| num_at(r, 6))),
        "mixed_ratio_f": range(table.rows.iter().map(|r| num_at(r, 9))),
        "mixed_ratio_g": range(table.rows.iter().map(|r| num_at(r, 10))),
    });
    (table, c)
}

fn run_mixed(config: &ScenarioConfig, levels: &[Level], root: &SeededRng) -> (Table, Value) {
    let mut table = Table::new(&[
        "resolution",
        "h",
        "seed",
        "eps",
        "mu",
        "residual",
        "ratio_f",
        "ratio_g",
        "levels",
        "lusin_changed",
    ]);
    let mut list = Vec::new();
    for (lv, seed, eps) in jobs(levels, &config.sweep.seeds, &config.sweep.eps) {
        for &mu in &config.sweep.mu {
            list.push((lv, seed, eps, mu));
        }
    }
    let results = par::map_slice(&list, |&(lv, seed, eps, mu)| {
        let mut rng = root.fork(seed);
        let u = fields::perturbed_rotation(&lv.domain, &mut rng, eps * config.field.amplitude);
        let res = (|| {
            let (f, g) = fields::dist_split(&u)?;
            let q = lv.p.map(|v| mu * v)?;
            mixed_rigidity_decompose(&u, &MixedSplit::new(f, g, lv.p.clone(), q)?, mu)
        })();
        (lv, seed, eps, mu, res)
    });
    for (lv, seed, eps, mu, res) in results {
        let mut cells = vec![
            Cell::Int(lv.resolution as u64),
            Cell::Num(lv.domain.spacing()),
            Cell::Int(seed),
            Cell::Num(eps),
            Cell::Num(mu),
        ];
        match res {
            Ok(out) => {
                let r = out.report;
                cells.extend([
                    Cell::Num(r.residual),
                    Cell::Num(r.ratio_f),
                    Cell::Num(r.ratio_g),
                    Cell::Int(r.levels as u64),
                    Cell::Int(r.lusin_changed as u64),
                ]);
                table.push(cells, if r.failed { "residual" } else { "ok" }.into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 5));
                table.push_error(cells, &e);
            }
        }
    }
    let c = json!({
        "residual_over_h": range(table.rows.iter().map(|r| num_at(r, 5) / num_at(r, 1))),
        "ratio_f": range(table.rows.iter().map(|r| num_at(r, 6))),
        "ratio_g": range(table.rows.iter().map(|r| num_at(r, 7))),
    });
    (table, c)
}

fn run_extend(config: &ScenarioConfig, levels: &[Level], root: &SeededRng) -> Result<(Table, Value)> {
    let graph = AffineGraph::from_shape(&config.domain)?;
    if config.extend.anchor.len() + 1 != config.domain.dim() {
        return Err(Error::Config("extend.anchor needs n - 1 coordinates".into()));
    }
    let mut table = Table::new(&[
        "resolution",
        "h",
        "seed",
        "radius",
        "residual",
        "modular_bound",
        "checked_nodes",
        "exponent_bounds_hold",
    ]);
    let results = par::map_slice(&jobs(levels, &config.sweep.seeds, &[()]), |&(lv, seed, ())| {
        let mut rng = root.fork(seed);
        let res = (|| {
            let u = fields::smooth_vector_field(&lv.domain, &mut rng, config.field.amplitude);
            let eu = sym_gradient(&u)?;
            let (f, g) = fields::indicator_split(&eu);
            let q = lv.p.map(|v| config.field.q_scale * v)?;
            nitsche_extend(&u, &f, &g, &lv.p, &q, &graph, &config.extend.anchor, config.extend.outer_radius)
        })();
        (lv, seed, res)
    });
    for (lv, seed, res) in results {
        let h = lv.domain.spacing();
        let mut cells = vec![Cell::Int(lv.resolution as u64), Cell::Num(h), Cell::Int(seed)];
        match res {
            Ok(out) => {
                let r = out.report;
                cells.extend([
                    Cell::Num(r.radius),
                    Cell::Num(r.residual),
                    Cell::Num(r.modular_bound),
                    Cell::Int(r.checked_nodes as u64),
                    Cell::Bool(r.exponent_bounds_hold),
                ]);
                let flag = if r.residual > 10.0 * h {
                    "residual"
                } else if !r.exponent_bounds_hold {
                    "exponent-bounds"
                } else {
                    "ok"
                };
                table.push(cells, flag.into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 5));
                table.push_error(cells, &e);
            }
        }
    }
    let c = json!({
        "modular_bound": range(table.rows.iter().map(|r| num_at(r, 5))),
        "residual_over_h": range(table.rows.iter().map(|r| num_at(r, 4) / num_at(r, 1))),
    });
    Ok((table, c))
}

fn run_lusin(config: &ScenarioConfig, levels: &[Level], root: &SeededRng) -> (Table, Value) {
    let mut table = Table::new(&[
        "resolution",
        "h",
        "seed",
        "lambda",
        "lipschitz_ratio",
        "changed_nodes",
        "changed_measure",
        "bad_measure",
        "tail_bound",
        "inclusion_holds",
        "degenerate",
    ]);
    let results = par::map_slice(&jobs(levels, &config.sweep.seeds, &config.sweep.lambda), |&(lv, seed, lambda)| {
        let mut rng = root.fork(seed);
        let u = fields::spiked_field(&lv.domain, &mut rng, config.field.amplitude);
        (lv, seed, lambda, lusin_truncate(&u, lambda))
    });
    for (lv, seed, lambda, res) in results {
        let mut cells = vec![Cell::Int(lv.resolution as u64), Cell::Num(lv.domain.spacing()), Cell::Int(seed), Cell::Num(lambda)];
        match res {
            Ok(out) => {
                let r = out.report;
                cells.extend([
                    Cell::Num(r.lipschitz_ratio),
                    Cell::Int(r.changed_nodes as u64),
                    Cell::Num(r.changed_measure),
                    Cell::Num(r.bad_measure),
                    Cell::Num(r.tail_bound),
                    Cell::Bool(r.inclusion_holds),
                    Cell::Bool(r.degenerate),
                ]);
                table.push(cells, if r.inclusion_holds { "ok" } else { "inclusion" }.into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 7));
                table.push_error(cells, &e);
            }
        }
    }
    let c = json!({
        "lipschitz_ratio": range(table.rows.iter().map(|r| num_at(r, 4))),
        "changed_over_bad_measure": range(table.rows.iter().map(|r| {
            let bad = num_at(r, 7);
            if bad > 0.0 { num_at(r, 6) / bad } else { f64::NAN }
        })),
    });
    (table, c)
}

fn run_gamma(config: &ScenarioConfig, levels: &[Level]) -> Result<(Table, Value)> {
    let lv = &levels[0];
    let h = fields::energy_boundary(&lv.domain, config.energy.boundary, config.energy.bump);
    let spec = EnergySpec::new(lv.p.clone(), h, config.energy.density, config.sweep.eps.clone())?;
    let table = gamma_convergence_experiment(&spec)?;
    let mut out = Table::new(&crate::linearize::CSV_HEADER[..11]);
    for r in &table.rows {
        let mut cells = vec![
            Cell::Num(r.eps),
            Cell::Num(r.energy),
            Cell::Num(r.gap),
            Cell::Num(r.wp_dist),
            Cell::Num(r.modular),
            Cell::Num(r.compactness_rhs),
        ];
        cells.extend(r.tails.iter().map(|t| Cell::Num(*t)));
        cells.push(Cell::Int(r.iterations as u64));
        out.push_row(cells, r.flag.clone(), r.failed());
    }
    let c = json!({
        "limit_energy": table.limit_energy,
        "limit_gradient_norm": table.limit_gradient_norm,
        "boundary_integral": table.boundary_integral,
        "compactness_ratio": range(table.diagnostics.iter().map(|d| d.compactness_ratio)),
        "poincare_constant": range(table.diagnostics.iter().map(|d| d.poincare_constant)),
        "diagnostics": serde_json::to_value(&table.diagnostics)?,
    });
    Ok((out, c))
}

fn run_whitney(levels: &[Level]) -> (Table, Value) {
    let mut table = Table::new(&["resolution", "h", "cubes", "overlap", "min_ratio", "max_ratio", "covers_inside"]);
    let refs: Vec<&Level> = levels.iter().collect();
    let results = par::map_slice(&refs, |&lv| {
        let cubes = whitney_decomposition(&lv.domain);
        let stats = WhitneyStats::compute(&lv.domain, &cubes);
        let sqrt_n = (lv.domain.dim() as f64).sqrt();
        let predicates = cubes.iter().all(|q| {
            let (lo, hi) = q.bounds();
            let (lo2, hi2) = q.bounds_scaled(2.0);
            let r = q.side();
            match lv.domain.box_clearance(&lo, &hi) {
                Some(d) => {
                    sqrt_n * r <= d
                        && d <= WHITNEY_UPPER * sqrt_n * r
                        && lv.domain.box_clearance(&lo2, &hi2).is_some()
                }
                None => false,
            }
        });
        (lv, stats, predicates)
    });
    for (lv, s, predicates) in results {
        let flag = if !predicates {
            "predicate"
        } else if !s.covers_inside {
            "cover"
        } else if s.overlap > 4usize.pow(lv.domain.dim() as u32) {
            "overlap"
        } else {
            "ok"
        };
        table.push(
            vec![
                Cell::Int(lv.resolution as u64),
                Cell::Num(lv.domain.spacing()),
                Cell::Int(s.cubes as u64),
                Cell::Int(s.overlap as u64),
                Cell::Num(s.min_ratio),
                Cell::Num(s.max_ratio),
                Cell::Bool(s.covers_inside),
            ],
            flag.into(),
        );
    }
    let c = json!({"d_over_side": range(table.rows.iter().flat_map(|r| [num_at(r, 4), num_at(r, 5)]))});
    (table, c)
}

fn run_maximal(config: &ScenarioConfig, levels: &[Level], root: &SeededRng) -> (Table, Value) {
    let mut table = Table::new(&["resolution", "h", "seed", "norm_f", "norm_mf", "norm_ratio", "local_over_global"]);
    let results = par::map_slice(&jobs(levels, &config.sweep.seeds, &[()]), |&(lv, seed, ())| {
        let mut rng = root.fork(seed);
        let f = fields::scalar_field(&lv.domain, &mut rng, config.field.amplitude);
        let res = (|| {
            let global = maximal_function(&f, MaximalMode::Global);
            let local = maximal_function(&f, MaximalMode::Local);
            let nf = norm(&f, &lv.p)?;
            let nm = norm(&global, &lv.p)?;
            let sigma = (0..lv.domain.len())
                .filter(|&i| lv.domain.is_active(i) && global.values()[i] > 0.0)
                .map(|i| local.values()[i] / global.values()[i])
                .fold(0.0f64, f64::max);
            Ok::<_, Error>((nf, nm, sigma))
        })();
        (lv, seed, res)
    });
    for (lv, seed, res) in results {
        let mut cells = vec![Cell::Int(lv.resolution as u64), Cell::Num(lv.domain.spacing()), Cell::Int(seed)];
        match res {
            Ok((nf, nm, sigma)) => {
                let ratio = if nf > 0.0 { Cell::Num(nm / nf) } else { Cell::Empty };
                cells.extend([Cell::Num(nf), Cell::Num(nm), ratio, Cell::Num(sigma)]);
                table.push(cells, "ok".into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 4));
                table.push_error(cells, &e);
            }
        }
    }
    let c = json!({
        "norm_ratio": range(table.rows.iter().map(|r| num_at(r, 5))),
        "local_over_global": range(table.rows.iter().map(|r| num_at(r, 6))),
    });
    (table, c)
}

#[cfg(test)]
mod tests;
