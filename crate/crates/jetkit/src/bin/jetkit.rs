//! Command-line driver for problem files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use jetkit::corpus;
use jetkit::expr::Coef;
use jetkit::forms::{gauge_transform, riccati_covering, FormError, HForm};
use jetkit::jet::Check;
use jetkit::numeric::{run_soliton, Grid, GridField, SolitonRun};
use jetkit::parser::{parse_matrix, parse_problem, render_form, render_problem, scope_of, Problem};
use jetkit::search::{search_pseudosymmetry, Slot};
use jetkit::verify::{exit_code, verify_problem, AssertionReport, Status};
use jetkit::{Expr, Oracle};

const SCHEMA: u32 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "jetkit", version, about = "Check jet-space identities, coverings and transformations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Seed of the sampling oracle.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Also write a machine report to this path (`-` for stdout).
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Accept only symbolic zeros; sampled passes exit with 3.
    #[arg(long, global = true)]
    strict_symbolic: bool,
    /// Include wall times in the JSON report (breaks byte-identical reruns).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the `[assert]` lines of problem files.
    Verify {
        /// Problem files, or names of built-in problems.
        #[arg(required_unless_present = "list")]
        files: Vec<String>,
        /// List the problem files in a directory instead.
        #[arg(long, value_name = "DIR")]
        list: Option<PathBuf>,
    },
    /// Emit the Riccati covering and conservation law of a matrix form.
    Riccati {
        file: String,
        /// 1-based pivot row.
        #[arg(long)]
        pivot: usize,
        /// Matrix form to use; defaults to the first one.
        #[arg(long)]
        form: Option<String>,
        /// Comma-separated names of the new nonlocal variables.
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
    },
    /// Gauge-transform a matrix form by `[[..], ..]`.
    Gauge {
        file: String,
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        matrix: String,
    },
    /// Integrate the covering from the seed and apply the transformation.
    Soliton {
        file: String,
        /// Square grid `LO HI H`.
        #[arg(long, num_args = 3, value_names = ["LO", "HI", "H"], allow_negative_numbers = true)]
        grid: Option<Vec<f64>>,
        /// Steps per axis over the grid range; 0 gives the origin alone.
        #[arg(long)]
        steps: Option<usize>,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bound on the deviation from the closed forms.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Solve the declared pseudosymmetry searches.
    Search {
        file: String,
        /// Search to run; all of them by default.
        #[arg(long)]
        name: Option<String>,
    },
    /// Print a problem with every rule written out.
    Render { file: String },
}

/// Human-readable output; moves to stderr when the JSON report goes to stdout.
macro_rules! say {
    ($common:expr, $($arg:tt)*) => {
        if $common.json_on_stdout() { eprintln!($($arg)*) } else { println!($($arg)*) }
    };
}

impl Common {
    fn json_on_stdout(&self) -> bool {
        self.json.as_ref().is_some_and(|p| p.as_os_str() == "-")
    }
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(USAGE, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let oracle = Oracle::with_seed(cli.common.seed);
    let res = match &cli.cmd {
        Cmd::Verify { files, list } => match list {
            Some(dir) => list_dir(dir, &cli.common),
            None => verify(files, &cli.common, &oracle),
        },
        Cmd::Riccati { file, pivot, form, names } => riccati(file, *pivot, form.as_deref(), names, &cli.common, &oracle),
        Cmd::Gauge { file, form, matrix } => gauge(file, form.as_deref(), matrix, &cli.common, &oracle),
        Cmd::Soliton { file, grid, steps, out, tol } => soliton(file, grid.as_deref(), *steps, out.as_deref(), *tol, &cli.common),
        Cmd::Search { file, name } => search(file, name.as_deref(), &cli.common, &oracle),
        Cmd::Render { file } => load(file).map(|(_, p)| {
            let common = &cli.common;
            say!(common, "{}", render_problem(&p).trim_end());
            0
        }),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("jetkit: {msg}");
            ExitCode::from(code)
        }
    }
}

/// A path on disk, else a built-in problem of that name.
fn load(file: &str) -> Result<(String, Problem), Failure> {
    let path = Path::new(file);
    let text = if path.exists() {
        std::fs::read_to_string(path).map_err(|e| Failure(USAGE, format!("{file}: {e}")))?
    } else if let Some(s) = corpus::source(file) {
        s.to_string()
    } else {
        return Err(Failure(USAGE, format!("{file}: no such file or built-in problem")));
    };
    let p = parse_problem(&text).map_err(|e| Failure(USAGE, format!("{file}: {e}")))?;
    Ok((file.to_string(), p))
}

fn emit(common: &Common, mut report: Value) -> Result<(), Failure> {
    let Some(path) = &common.json else { return Ok(()) };
    report["schema"] = json!(SCHEMA);
    report["seed"] = json!(common.seed);
    report["precision"] = json!(Oracle::default().digits);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if path.as_os_str() == "-" {
        print!("{text}");
    } else {
        std::fs::write(path, text).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn check_json(c: &Check) -> Value {
    json!({ "check": c.name, "verdict": c.verdict.label(), "detail": c.detail })
}

fn report_json(r: &AssertionReport, timings: bool) -> Value {
    let mut v = json!({
        "name": r.name,
        "kind": r.kind,
        "line": r.line,
        "verdict": r.status.label(),
        "details": r.checks.iter().map(check_json).collect::<Vec<_>>(),
    });
    if let Some(e) = &r.error {
        v["error"] = json!(e);
    }
    if timings {
        v["wall_time"] = json!(r.seconds);
    }
    v
}

fn list_dir(dir: &Path, common: &Common) -> Result<u8, Failure> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Failure(USAGE, format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "prob"))
        .map(|p| p.display().to_string())
        .collect();
    names.sort();
    for n in &names {
        say!(common, "{n}");
    }
    emit(common, json!({ "command": "verify", "files": names }))?;
    Ok(0)
}

fn verify(files: &[String], common: &Common, oracle: &Oracle) -> Result<u8, Failure> {
    let mut all = Vec::new();
    let mut out = Vec::new();
    for file in files {
        let (name, p) = load(file)?;
        let reports = verify_problem(&p, oracle);
        say!(common, "{name}");
        for r in &reports {
            say!(common, "  {:<20} line {:>3}  {}", r.status.label(), r.line, r.name);
            if let Some(e) = &r.error {
                say!(common, "      error: {e}");
            }
            for c in r.checks.iter().filter(|c| !c.pass() || r.status != Status::Pass) {
                if c.verdict.label() != "symbolic" {
                    say!(common, "      {}: {} {}", c.name, c.verdict.label(), short(&c.detail));
                }
            }
        }
        let passed = reports.iter().filter(|r| r.status.is_pass()).count();
        say!(common, "  {passed}/{} assertions pass", reports.len());
        out.push(json!({
            "file": name,
            "exit_code": exit_code(&reports, common.strict_symbolic),
            "assertions": reports.iter().map(|r| report_json(r, common.timings)).collect::<Vec<_>>(),
        }));
        all.extend(reports);
    }
    let code = exit_code(&all, common.strict_symbolic);
    if code == 0 && all.iter().any(|r| r.status == Status::ProbabilisticPass) {
        eprintln!("jetkit: warning: some checks passed by sampling only");
    }
    emit(common, json!({ "command": "verify", "problems": out, "exit_code": code }))?;
    Ok(code as u8)
}

fn short(s: &str) -> String {
    if s.chars().count() > 160 {
        format!("{}…", s.chars().take(160).collect::<String>())
    } else {
        s.to_string()
    }
}

fn matrix_form<'a>(p: &'a Problem, name: Option<&str>) -> Result<(&'a str, &'a HForm), Failure> {
    let found = match name {
        Some(n) => p.forms.iter().find(|(m, _)| m == n),
        None => p.forms.iter().find(|(_, f)| !f.is_scalar()),
    };
    let (n, f) = found.ok_or_else(|| Failure(USAGE, format!("no matrix form {}", name.unwrap_or(""))))?;
    if f.is_scalar() {
        return Err(Failure(USAGE, format!("form `{n}` is scalar")));
    }
    Ok((n.as_str(), f))
}

fn bare(system: jetkit::jet::EqSystem, forms: Vec<(String, HForm)>) -> Problem {
    Problem {
        system,
        forms,
        fields: vec![],
        morphisms: vec![],
        targets: vec![],
        searches: vec![],
        soliton: None,
        assertions: vec![],
    }
}

fn riccati(file: &str, pivot: usize, form: Option<&str>, names: &[String], common: &Common, oracle: &Oracle) -> Result<u8, Failure> {
    let (_, p) = load(file)?;
    let (fname, alpha) = matrix_form(&p, form)?;
    let l = alpha.dim();
    if pivot == 0 || pivot > l {
        return Err(Failure(USAGE, format!("pivot {pivot} out of range 1..={l}")));
    }
    let names: Vec<String> = if !names.is_empty() {
        names.to_vec()
    } else if l == 2 {
        vec!["rho".into()]
    } else {
        (1..l).map(|k| format!("rho{k}")).collect()
    };
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let base = p.base_system()?;
    let r = match riccati_covering(alpha, pivot, &refs, &base, &base.oracle(oracle)) {
        Err(FormError::NotZcr(m)) => {
            eprintln!("jetkit: `{fname}` is not a zero-curvature form: {m}");
            emit(common, json!({ "command": "riccati", "form": fname, "exit_code": 1, "error": m }))?;
            return Ok(1);
        }
        r => r?,
    };
    let merged = r.covering.merge()?;
    let text = render_problem(&bare(merged, vec![("mu".into(), r.mu.clone())]));
    say!(common, "{}", text.trim_end());
    let ok = r.checks.iter().all(|c| c.pass());
    let code = if ok { 0 } else { 1 };
    emit(
        common,
        json!({
            "command": "riccati",
            "form": fname,
            "pivot": pivot,
            "text": text,
            "details": r.checks.iter().map(check_json).collect::<Vec<_>>(),
            "exit_code": code,
        }),
    )?;
    Ok(code)
}

fn gauge(file: &str, form: Option<&str>, matrix: &str, common: &Common, oracle: &Oracle) -> Result<u8, Failure> {
    let (_, p) = load(file)?;
    let (fname, alpha) = matrix_form(&p, form)?;
    let s = parse_matrix(matrix, &scope_of(p.system.spec()))?;
    let g = gauge_transform(alpha, &s, &p.system, oracle)?;
    let name = format!("{fname}gauged");
    let text = render_form(&name, &g, &p.system);
    say!(common, "{}", text.trim_end());
    emit(common, json!({ "command": "gauge", "form": fname, "text": text, "exit_code": 0 }))?;
    Ok(0)
}

fn soliton(file: &str, grid: Option<&[f64]>, steps: Option<usize>, out: Option<&Path>, tol: f64, common: &Common) -> Result<u8, Failure> {
    let (_, p) = load(file)?;
    let sd = p.soliton.clone().ok_or_else(|| Failure(USAGE, format!("{file}: no [soliton] section")))?;
    let mut g = match grid {
        Some([lo, hi, h]) if *h > 0.0 && hi > lo => Grid::square(*lo, *hi, *h),
        Some(_) => return Err(Failure(USAGE, "grid needs LO < HI and H > 0".into())),
        None => sd.grid.clone(),
    };
    match steps {
        Some(0) => g = Grid { x0: sd.origin.0, x1: sd.origin.0, nx: 0, t0: sd.origin.1, t1: sd.origin.1, nt: 0 },
        Some(n) => {
            g.nx = n;
            g.nt = n;
        }
        None => {}
    }
    let run = run_soliton(&p, &sd, Some(&g)).map_err(|e| Failure(1, e.to_string()))?;
    if let Some(path) = out {
        let csv = combined(&run).to_csv()?;
        std::fs::write(path, csv).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))?;
    }
    let SolitonRun { source, image, deviations, residual } = &run;
    say!(common, "grid {}x{} nodes, {} masked", image.nx(), image.nt(), image.masked_count());
    say!(common, "path cross-check max difference {:.3e} over {} probes", source.cross.max_diff, source.cross.probes);
    for (v, d) in deviations {
        say!(common, "max |{v} - exact| = {d:.3e}");
    }
    match residual {
        Some(r) => say!(common, "target residual {r:.3e}"),
        None => say!(common, "target residual: grid too small"),
    }
    let ok = !source.cross.flagged() && deviations.iter().all(|(_, d)| *d < tol) && image.masked_count() < image.nx() * image.nt();
    let code = if ok { 0 } else { 1 };
    emit(
        common,
        json!({
            "command": "soliton",
            "grid": { "x": [g.x0, g.x1, g.nx], "t": [g.t0, g.t1, g.nt] },
            "masked": image.masked_count(),
            "cross_check": { "probes": source.cross.probes, "max_diff": source.cross.max_diff, "flagged": source.cross.flagged() },
            "deviations": deviations.iter().map(|(v, d)| json!({ "var": v, "max_abs": d })).collect::<Vec<_>>(),
            "residual": residual,
            "exit_code": code,
        }),
    )?;
    Ok(code)
}

/// Source and image columns side by side.
fn combined(run: &SolitonRun) -> GridField {
    let mut g = run.source.clone();
    g.names.extend(run.image.names.iter().cloned());
    g.values.extend(run.image.values.iter().cloned());
    g
}

fn search(file: &str, name: Option<&str>, common: &Common, oracle: &Oracle) -> Result<u8, Failure> {
    let (_, p) = load(file)?;
    let decls: Vec<_> = p.searches.iter().filter(|s| name.is_none_or(|n| s.name == n)).collect();
    if decls.is_empty() {
        return Err(Failure(USAGE, format!("{file}: no search {}", name.unwrap_or(""))));
    }
    let spec = p.system.spec();
    let mut out = Vec::new();
    let mut code = 0;
    for d in decls {
        let ansatz = p.ansatz(d).ok_or_else(|| Failure(USAGE, format!("unknown form `{}`", d.mu)))?;
        let outcomes = search_pseudosymmetry(&ansatz, &p.system, &p.system.oracle(oracle))?;
        let dim: usize = outcomes.iter().map(|o| o.basis.len()).sum();
        say!(common, "search {}: {} unknowns, solution dimension {dim}", d.name, ansatz.unknown_count());
        let mut fields = Vec::new();
        for o in &outcomes {
            for (k, coeffs) in o.basis.iter().enumerate() {
                let comps = components(&ansatz.slots, &ansatz.monomials, coeffs, spec);
                let text: Vec<String> = comps.iter().map(|(s, e)| format!("{s}: {}", p.system.render(e))).collect();
                let ok = o.checks[k].iter().all(|c| c.pass());
                if !ok {
                    code = 1;
                }
                say!(common, "  c = {}: {}  [{}]", o.c, text.join(", "), if ok { "verified" } else { "not verified" });
                fields.push(json!({
                    "c": o.c.to_string(),
                    "components": comps.iter().map(|(s, e)| json!({ "slot": s, "value": p.system.render(e) })).collect::<Vec<_>>(),
                    "verified": ok,
                }));
            }
        }
        out.push(json!({ "name": d.name, "dimension": dim, "fields": fields }));
    }
    emit(common, json!({ "command": "search", "searches": out, "exit_code": code }))?;
    Ok(code)
}

fn components(slots: &[Slot], monomials: &[Expr], coeffs: &[Coef], spec: &jetkit::jet::SystemSpec) -> Vec<(String, Expr)> {
    let nm = monomials.len();
    slots
        .iter()
        .enumerate()
        .map(|(s, slot)| {
            let e = Expr::sum((0..nm).map(|k| Expr::rat(coeffs[s * nm + k].clone()).mul(&monomials[k])));
            let name = match slot {
                Slot::Base(i) => spec.independent[*i].clone(),
                Slot::Var(v) => v.clone(),
            };
            (name, e)
        })
        .filter(|(_, e)| !e.is_zero())
        .collect()
}
