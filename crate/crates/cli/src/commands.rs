use std::fs;
use std::path::Path;

use birkhoff::beams::{conjugacy_test, FocusChainInput, FocusRecord};
use birkhoff::curve::ValidationReport;
use birkhoff::paths::{certify, max_length_path, solve_shooting, CertifiedPath, PathCertificate};
use birkhoff::ray::{launch_direction, trace, PathRecord, Trace};
use birkhoff::security::{construct_witness_with, verify_bundle, WitnessBundle, WitnessConfig, WitnessFailure};
use birkhoff::{Error, PolygonalPath, RayState, Table, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{ConjugateArgs, Endpoints, PathArgs, PlotArgs, Preset, TableArgs, TraceArgs, VerifyArgs, WitnessArgs};
use crate::svg;

/// Exit status plus a message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Structured output still worth writing (reports, partial bundles).
    pub output: Option<String>,
}

pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
            output: None,
        }
    }

    fn with_output(mut self, output: String) -> Self {
        self.output = Some(output);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MalformedTable(_) | Error::InvalidArgument(_) | Error::Domain(_) => EXIT_INVALID,
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
            output: None,
        }
    }
}

pub type Outcome = Result<String, Failure>;

/// Per-invocation state: tolerance and the one seeded generator.
pub struct Context {
    pub tol: f64,
    rng: ChaCha8Rng,
}

impl Context {
    pub fn new(seed: u64, tol: f64) -> Self {
        Context {
            tol,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn next_seed(&mut self) -> u64 {
        self.rng.gen()
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn point(v: &[f64]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("cannot parse {}: {e}", path.display())))
}

/// The table described by the options. The noise draws the first seed from the generator.
pub fn build_table(args: &TableArgs, ctx: &mut Context) -> Result<Table, Failure> {
    let noise_seed = ctx.next_seed();
    let mut table = if let Some(file) = &args.table {
        read_json::<Table>(file)?
    } else {
        let (a, b) = match args.preset.unwrap_or(Preset::Circle) {
            Preset::Circle => (args.radius, args.radius),
            Preset::Ellipse => (args.a, args.b),
        };
        if !(a > 0.0 && b > 0.0) {
            return Err(Failure::invalid("semi-axes must be positive"));
        }
        if args.noise != 0.0 {
            if args.preset == Some(Preset::Ellipse) {
                return Err(Failure::invalid("noise is only available for the circle preset"));
            }
            Table::noisy_circle(a, args.noise.abs(), args.harmonics, noise_seed)
        } else {
            Table::new(vec![0.0, a, 0.0], vec![0.0, 0.0, b], Vec::new(), birkhoff::curve::DEFAULT_GRID)?
        }
    };
    if let Some(grid) = args.grid {
        table = table.with_grid(grid)?;
    }
    Ok(table)
}

fn require_valid(table: &Table) -> Result<(), Failure> {
    let report = table.validate();
    if report.valid {
        Ok(())
    } else {
        Err(invalid_table(&report))
    }
}

fn invalid_table(report: &ValidationReport) -> Failure {
    let worst = report
        .failures
        .iter()
        .map(|f| format!("{:?} fails at s = {:.6} (value {:.3e})", f.invariant, f.at, f.value))
        .collect::<Vec<_>>()
        .join("; ");
    Failure::invalid(format!("invalid table: {worst}"))
}

#[derive(Serialize)]
struct TableOutput<'a> {
    report: &'a ValidationReport,
    table: &'a Table,
}

pub fn cmd_table(args: &TableArgs, ctx: &mut Context) -> Outcome {
    let table = build_table(args, ctx)?;
    let report = table.validate();
    let out = json(&TableOutput {
        report: &report,
        table: &table,
    });
    if report.valid {
        Ok(out)
    } else {
        Err(invalid_table(&report).with_output(out))
    }
}

pub fn cmd_trace(args: &TraceArgs, ctx: &mut Context) -> Outcome {
    let table = build_table(&args.table, ctx)?;
    require_valid(&table)?;
    let tr: Trace = match (args.s, args.alpha, &args.start) {
        (Some(s), Some(alpha), _) => {
            if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
                return Err(Failure::invalid("alpha must lie in (0, pi)"));
            }
            let v = launch_direction(&table, s, alpha);
            trace(&table, &RayState::new(table.point(s), v), args.bounces)?
        }
        (_, _, Some(start)) => {
            let p = point(start);
            if !table.contains(p) {
                return Err(Failure::invalid("start point lies outside the table"));
            }
            trace(&table, &RayState::new(p, Vec2::from_angle(args.angle)), args.bounces)?
        }
        _ => return Err(Failure::invalid("give --start or --s with --alpha")),
    };
    Ok(json(&tr))
}

fn endpoints(e: &Endpoints, table: &Table) -> Result<(Vec2, Vec2), Failure> {
    let (x, y) = (point(&e.x), point(&e.y));
    if !table.contains(x) || !table.contains(y) {
        return Err(Failure::invalid("endpoints must lie inside the table"));
    }
    Ok((x, y))
}

#[derive(Serialize)]
struct PathEntry {
    path: PathRecord,
    certificate: PathCertificate,
}

#[derive(Serialize)]
struct PathOutput {
    bounces: usize,
    paths: Vec<PathEntry>,
}

fn entry(table: &Table, c: &CertifiedPath) -> PathEntry {
    PathEntry {
        path: PathRecord::new(table, &c.path),
        certificate: c.certificate,
    }
}

pub fn cmd_path(args: &PathArgs, ctx: &mut Context) -> Outcome {
    let table = build_table(&args.table, ctx)?;
    require_valid(&table)?;
    let (x, y) = endpoints(&args.endpoints, &table)?;
    let found: Vec<CertifiedPath> = match args.shoot {
        Some(theta) => {
            let r = solve_shooting(&table, x, y, args.bounces, theta)?;
            let certificate = certify(&table, &r.path)?;
            vec![CertifiedPath {
                path: r.path,
                certificate,
            }]
        }
        None => max_length_path(&table, x, y, args.bounces, args.starts, ctx.next_seed()),
    };
    if found.is_empty() {
        return Err(Error::NoPath { bounces: args.bounces }.into());
    }
    Ok(json(&PathOutput {
        bounces: args.bounces,
        paths: found.iter().map(|c| entry(&table, c)).collect(),
    }))
}

#[derive(Serialize)]
struct ConjugateOutput {
    path: PathRecord,
    conjugate: bool,
    margin: f64,
    chain: Vec<FocusRecord>,
}

pub fn cmd_conjugate(args: &ConjugateArgs, ctx: &mut Context) -> Outcome {
    let table = build_table(&args.table, ctx)?;
    require_valid(&table)?;
    let (x, y) = endpoints(&args.endpoints, &table)?;
    let path = match &args.vertices {
        Some(v) => PolygonalPath::new(&table, x, y, v.clone()),
        None => max_length_path(&table, x, y, args.bounces, args.starts, ctx.next_seed())
            .into_iter()
            .next()
            .ok_or(Error::NoPath { bounces: args.bounces })?
            .path,
    };
    let report = conjugacy_test(&table, &path)?;
    let chain = FocusChainInput::from_path(&table, &path, 1.0).dump(Some((&table, &path)))?;
    Ok(json(&ConjugateOutput {
        path: PathRecord::new(&table, &path),
        conjugate: report.conjugate,
        margin: report.margin,
        chain,
    }))
}

pub fn cmd_witness(args: &WitnessArgs, ctx: &mut Context) -> Outcome {
    let table = build_table(&args.table, ctx)?;
    require_valid(&table)?;
    let (x, y) = endpoints(&args.endpoints, &table)?;
    if !(args.budget > 0.0) {
        return Err(Failure::invalid("budget must be positive"));
    }
    let config = WitnessConfig {
        tol: ctx.tol,
        starts: args.starts,
        ..WitnessConfig::default()
    };
    match construct_witness_with(&table, x, y, args.n, args.budget, ctx.next_seed(), &config) {
        Ok(bundle) => Ok(json(&bundle)),
        Err(e) => {
            let code = match (e.kind, &e.source) {
                (_, Error::InvalidArgument(_)) => EXIT_INVALID,
                (WitnessFailure::BudgetExhausted, _) => EXIT_BUDGET,
                (WitnessFailure::SolverFailure, _) => EXIT_SOLVER,
            };
            let out = json(&serde_json::json!({
                "error": e.to_string(),
                "kind": e.kind,
                "stage": e.stage,
                "partial": e.partial,
            }));
            Err(Failure {
                code,
                message: e.to_string(),
                output: Some(out),
            })
        }
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let bundle: WitnessBundle = read_json(&args.bundle)?;
    let report = verify_bundle(&bundle);
    let out = json(&report);
    if report.passed {
        Ok(out)
    } else {
        Err(Failure::invalid("bundle failed verification").with_output(out))
    }
}

pub fn cmd_plot(args: &PlotArgs, ctx: &mut Context) -> Outcome {
    let (table, paths, ends) = match &args.bundle {
        Some(file) => {
            let b: WitnessBundle = read_json(file)?;
            let paths = b.paths.into_iter().map(|c| c.path).collect();
            (b.table, paths, Some((b.x, b.y)))
        }
        None => (build_table(&args.table, ctx)?, Vec::new(), None),
    };
    if args.size < 16 {
        return Err(Failure::invalid("size must be at least 16 pixels"));
    }
    Ok(svg::render(&table, &paths, ends, args.focus, args.size))
}
