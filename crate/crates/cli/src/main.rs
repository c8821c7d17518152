use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use bratteli::catalog;
use bratteli::diagram::DEFAULT_MAX_DIGITS;
use bratteli::ergodicity::{
    chain_partition_search, check_main1, default_eps, min_entry_divergence, subdiagram_unique_ergodicity,
    unique_ergodicity_search, unique_ergodicity_search_f64, ChainOutcome, Partition,
};
use bratteli::linalg::{dstar_f64, parse_rat, RatMatrix};
use bratteli::series::{Idx, VertexSelection};
use bratteli::simplex::{
    cluster_extremes, diameter_csv, diameter_dstar, polytope, polytope_csv, product_matrix_f64, trace_from_limit,
    ClusterReport, TraceVerdict,
};
use bratteli::spec::Generator;
use bratteli::stationary::{class_graph, cross_validate, distinguished_classes, distinguished_measure, Distinction, DEFAULT_TOL};
use bratteli::subdiagram::{extension_finiteness, extension_mass, odometer_trace, restrict};
use bratteli::symbolic::{blocks, code_orbit, format_word, incidence_from_blocks, ordered, orbit, toeplitz_window};
use bratteli::{BratteliDiagram, DiagramSpec, Error, Rat, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bratteli", version, about = "Invariant measures on Bratteli diagrams")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Spec file, or catalog:NAME for a built-in entry.
    #[arg(long, global = true)]
    spec: Option<String>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, global = true, default_value_t = 64)]
    budget: usize,
    #[arg(long = "gap-ratio", global = true, default_value = "10")]
    gap_ratio: String,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Search,
    MinEntry,
    Block,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize the diagram and report its shape.
    Validate,
    Heights {
        #[arg(long)]
        level: Option<usize>,
    },
    Stochastic {
        #[arg(long)]
        level: usize,
    },
    Telescope {
        /// Comma-separated increasing levels starting at 0.
        #[arg(long)]
        levels: String,
    },
    Simplex {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        m: usize,
        /// CSV of the diameter series instead of the polytope.
        #[arg(long)]
        series: bool,
    },
    Unique {
        #[arg(long, value_enum, default_value = "search")]
        method: Method,
        /// Comma-separated decreasing tolerances.
        #[arg(long)]
        eps: Option<String>,
        /// Use 2^-1, ..., 2^-k when --eps is absent.
        #[arg(long = "eps-count", default_value_t = 3)]
        eps_count: usize,
        #[arg(long)]
        window: Option<usize>,
        /// Partition blocks separated by ';' (for --method block).
        #[arg(long)]
        blocks: Option<String>,
        #[arg(long, default_value_t = 0)]
        block: usize,
    },
    /// Cluster the extreme rows of G(n+m-1, n), or recover limit traces.
    Count {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        traces: bool,
    },
    Main1 {
        #[arg(long)]
        blocks: String,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value = "1/4")]
        c: String,
        #[arg(long, default_value = "1")]
        c1: String,
    },
    Chains {
        #[arg(long)]
        window: Option<usize>,
    },
    Stationary {
        /// Trace levels reported per distinguished measure.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Cross-check against the simplex limit with n_max,m.
        #[arg(long)]
        cross: Option<String>,
    },
    Extend {
        #[arg(long)]
        w: String,
        #[arg(long)]
        window: Option<usize>,
        /// Report extension masses for a one-vertex-per-level selection.
        #[arg(long)]
        mass: bool,
    },
    Code {
        #[arg(long, default_value_t = 1)]
        n0: usize,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        #[arg(long, default_value_t = 10)]
        radius: usize,
        #[arg(long)]
        compact: bool,
        /// Report the block families and recovered incidence matrices.
        #[arg(long)]
        blocks: bool,
        /// Enumerate the Vershik orbit of the tower over the vertex.
        #[arg(long)]
        orbit: bool,
    },
    Toeplitz {
        #[arg(long, default_value_t = 3)]
        stage: usize,
        #[arg(long, default_value_t = 5)]
        radius: usize,
    },
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Subcommand)]
enum CatalogCommand {
    List,
    Emit { name: String },
    Check { name: String },
}

struct Output {
    value: Value,
    csv: Option<String>,
    code: u8,
}

impl Output {
    fn ok(value: Value) -> Self {
        Output { value, csv: None, code: 0 }
    }

    fn status(value: Value) -> Self {
        let code = match value.get("status").and_then(Value::as_str) {
            Some("Certified") | None => 0,
            Some(_) => 2,
        };
        Output { value, csv: None, code }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => match emit(&cli.global, &out) {
            Ok(()) => ExitCode::from(out.code),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit(g: &Global, out: &Output) -> Result<()> {
    let text = match g.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.value).map_err(|e| Error::input(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => out
            .csv
            .clone()
            .ok_or_else(|| Error::input("csv output is only available for plot series"))?,
        Format::Text => {
            let mut s = String::new();
            render_text(&out.value, "", &mut s);
            s
        }
    };
    match &g.out {
        Some(p) => fs::write(p, text).map_err(|e| Error::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render_text(v: &Value, prefix: &str, s: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                render_text(x, &p, s);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in a.iter().enumerate() {
                render_text(x, &format!("{prefix}[{i}]"), s);
            }
        }
        Value::Array(a) => {
            let items: Vec<String> = a.iter().map(scalar).collect();
            s.push_str(&format!("{prefix}: [{}]\n", items.join(", ")));
        }
        _ => s.push_str(&format!("{prefix}: {}\n", scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(x) => x.clone(),
        other => other.to_string(),
    }
}

fn max_digits() -> Result<usize> {
    match std::env::var("BRATTELI_MAX_DIGITS") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("BRATTELI_MAX_DIGITS must be a positive integer, got '{s}'"))),
        Err(_) => Ok(DEFAULT_MAX_DIGITS),
    }
}

fn load_spec(g: &Global) -> Result<DiagramSpec> {
    let path = g.spec.as_deref().ok_or_else(|| Error::input("--spec is required"))?;
    if let Some(name) = path.strip_prefix("catalog:") {
        return Ok(catalog::entry(name)?.spec);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::input(format!("{path}: {e}")))?;
    DiagramSpec::parse(&text)
}

fn load(g: &Global) -> Result<BratteliDiagram> {
    let spec = load_spec(g)?;
    let natural = match &spec.generator {
        Generator::Explicit(ms) => ms.len() + 1,
        _ => 30,
    };
    let depth = g.depth.or(spec.depth).unwrap_or(natural);
    BratteliDiagram::materialize_capped(&spec, depth, max_digits()?)
}

fn deepen(d: &BratteliDiagram, need: usize) -> Result<BratteliDiagram> {
    match d.spec() {
        Some(spec) if d.depth() < need => BratteliDiagram::materialize_capped(spec, need, max_digits()?),
        _ => Ok(d.clone()),
    }
}

fn rational(s: &str) -> Result<Rat> {
    parse_rat(s.trim()).ok_or_else(|| Error::input(format!("'{s}' is not a rational number")))
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| Error::input(format!("bad {what} '{x}'"))))
        .collect()
}

fn idx(tok: &str) -> Result<Idx> {
    let t = tok.trim();
    if t == "top" {
        return Ok(Idx::FromTop(0));
    }
    if let Some(c) = t.strip_prefix("top-") {
        return c.parse().map(Idx::FromTop).map_err(|_| Error::input(format!("bad vertex '{t}'")));
    }
    t.parse().map(Idx::Fixed).map_err(|_| Error::input(format!("bad vertex '{t}'")))
}

/// `a,b` is the same set at every level; `a/b,c/...` lists W_1, W_2, ...
/// explicitly, with the tail inferred from the last two levels.
fn selection(s: &str, d: &BratteliDiagram) -> Result<VertexSelection> {
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() == 1 {
        let tail = s.split(',').map(idx).collect::<Result<Vec<_>>>()?;
        return Ok(VertexSelection::new(Vec::new(), Some(tail)));
    }
    let mut explicit = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        let size = d.level_size(i + 1);
        let level = p
            .split(',')
            .map(|t| idx(t)?.resolve(size).ok_or_else(|| Error::input(format!("vertex '{t}' not in level {}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        explicit.push(level);
    }
    let sel = VertexSelection::new(explicit, None);
    Ok(match sel.tail_pattern(|n| d.level_size(n)) {
        Some((tail, _)) => VertexSelection::new(sel.explicit, Some(tail)),
        None => sel,
    })
}

fn partition(s: &str, d: &BratteliDiagram) -> Result<Partition> {
    Ok(Partition::new(s.split(';').map(|b| selection(b, d)).collect::<Result<Vec<_>>>()?))
}

fn window(w: Option<usize>, d: &BratteliDiagram) -> usize {
    w.unwrap_or(d.depth()).min(d.depth())
}

fn strings(xs: &[Rat]) -> Vec<String> {
    xs.iter().map(ToString::to_string).collect()
}

fn matrix_json(m: &RatMatrix) -> Value {
    json!(m.to_rows().iter().map(|r| strings(r)).collect::<Vec<_>>())
}

fn matrix_csv(m: &RatMatrix) -> String {
    let mut s = String::from("row,col,numerator,denominator\n");
    for (i, r) in m.to_rows().iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            s.push_str(&format!("{i},{j},{},{}\n", x.numer(), x.denom()));
        }
    }
    s
}

fn verdict_json(v: &TraceVerdict) -> Value {
    json!({
        "consistent": v.consistent,
        "probability_vectors": v.probability_vectors,
        "max_residual": v.max_residual.to_string(),
        "residuals": strings(&v.residuals),
        "first_failure": v.first_failure.as_ref().map(|(n, r)| json!({"level": n, "residual": r.to_string()})),
    })
}

fn cluster_json(r: &ClusterReport) -> Value {
    json!({
        "analysis": "cluster_extremes",
        "level": r.n,
        "m": r.m,
        "count": r.count(),
        "separated": r.separated,
        "gap": r.gap.to_string(),
        "max_diameter": r.max_diameter.to_string(),
        "centroid_dimension": r.centroid_dimension(),
        "merges": strings(&r.merges),
        "clusters": r.clusters.iter().map(|c| json!({
            "members": c.members,
            "centroid": strings(&c.centroid),
            "diameter": c.diameter.to_string(),
        })).collect::<Vec<_>>(),
    })
}

fn float_unsupported(g: &Global, what: &str) -> Result<()> {
    if g.mode == Mode::Float {
        return Err(Error::input(format!("{what} has no float mode")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Output> {
    let g = &cli.global;
    let gap_ratio = rational(&g.gap_ratio)?;
    match &cli.command {
        Command::Catalog(c) => return run_catalog(c),
        Command::Toeplitz { stage, radius } => {
            let spec = load_spec(g)?;
            let Generator::ErsToeplitz(seed) = &spec.generator else {
                return Err(Error::input("toeplitz needs an ers-toeplitz spec"));
            };
            let word = toeplitz_window(seed, *stage, *radius)?;
            let stages = seed.stages(*stage)?;
            return Ok(Output::ok(json!({
                "analysis": "toeplitz",
                "stage": stage,
                "radius": radius,
                "window": word,
                "periods": stages.iter().map(|s| s.p()).collect::<Vec<_>>(),
                "seed": seed.to_json(),
            })));
        }
        _ => {}
    }
    let d = load(g)?;
    match &cli.command {
        Command::Validate => Ok(Output::ok(json!({
            "analysis": "validate",
            "depth": d.depth(),
            "level_sizes": d.level_sizes(),
            "warnings": d.warnings(),
            "ers": d.ers_check().ers,
        }))),
        Command::Heights { level } => {
            let levels: Vec<usize> = match level {
                Some(n) => vec![*n],
                None => (1..=d.depth()).collect(),
            };
            let mut rows = Vec::new();
            let mut csv = String::from("level,vertex,height\n");
            for &n in &levels {
                let h = d.heights(n)?;
                for (v, x) in h.iter().enumerate() {
                    csv.push_str(&format!("{n},{v},{x}\n"));
                }
                rows.push(json!({"level": n, "heights": h.iter().map(ToString::to_string).collect::<Vec<_>>()}));
            }
            Ok(Output {
                value: json!({"analysis": "heights", "levels": rows}),
                csv: Some(csv),
                code: 0,
            })
        }
        Command::Stochastic { level } => {
            if g.mode == Mode::Float {
                let f = d.stochastic_matrix_f64(*level)?;
                return Ok(Output::ok(json!({"analysis": "stochastic", "mode": "float", "level": level, "matrix": f})));
            }
            let f = d.stochastic_matrix(*level)?;
            Ok(Output {
                value: json!({"analysis": "stochastic", "level": level, "matrix": matrix_json(f)}),
                csv: Some(matrix_csv(f)),
                code: 0,
            })
        }
        Command::Telescope { levels } => {
            float_unsupported(g, "telescope")?;
            let ls: Vec<usize> = list(levels, "level")?;
            let t = d.telescope(&ls)?;
            Ok(Output::ok(json!({
                "analysis": "telescope",
                "levels": ls,
                "matrices": t.matrices().iter().map(|m| m.to_rows().iter().map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })))
        }
        Command::Simplex { level, m, series } => {
            if g.mode == Mode::Float {
                let diam: Vec<f64> = (0..=*m)
                    .map(|k| -> Result<f64> {
                        if k == 0 {
                            return Ok(if d.level_size(*level) > 1 { 2.0 } else { 0.0 });
                        }
                        let rows = product_matrix_f64(&d, *level, k - 1)?;
                        let mut best = 0.0f64;
                        for (i, a) in rows.iter().enumerate() {
                            for b in &rows[i + 1..] {
                                best = best.max(dstar_f64(a, b));
                            }
                        }
                        Ok(best)
                    })
                    .collect::<Result<_>>()?;
                return Ok(Output::ok(json!({"analysis": "simplex", "mode": "float", "level": level, "m": m, "diameters": diam})));
            }
            let mut diam = Vec::new();
            for k in 0..=*m {
                diam.push((k, diameter_dstar(&polytope(&d, *level, k)?)));
            }
            let p = polytope(&d, *level, *m)?;
            let csv = if *series { diameter_csv(&diam) } else { polytope_csv(&p) };
            Ok(Output {
                value: json!({
                    "analysis": "simplex",
                    "level": level,
                    "m": m,
                    "vertices": p.vertices.iter().map(|v| strings(v)).collect::<Vec<_>>(),
                    "tags": p.tags,
                    "diameter": diam.last().map(|(_, x)| x.to_string()),
                    "diameters": diam.iter().map(|(_, x)| x.to_string()).collect::<Vec<_>>(),
                }),
                csv: Some(csv),
                code: 0,
            })
        }
        Command::Unique { method, eps, eps_count, window: w, blocks, block } => {
            let w = window(*w, &d);
            match method {
                Method::Search => {
                    if g.mode == Mode::Float {
                        let e: Vec<f64> = match eps {
                            Some(s) => s
                                .split(',')
                                .map(|x| rational(x).map(|r| r.to_f64().unwrap_or(f64::NAN)))
                                .collect::<Result<_>>()?,
                            None => (1..=*eps_count).map(|i| 0.5f64.powi(i as i32)).collect(),
                        };
                        return Ok(Output::status(unique_ergodicity_search_f64(&d, &e, g.budget)?));
                    }
                    let e = match eps {
                        Some(s) => s.split(',').map(rational).collect::<Result<Vec<_>>>()?,
                        None => default_eps(*eps_count),
                    };
                    Ok(Output::status(unique_ergodicity_search(&d, &e, g.budget)?.to_json()))
                }
                Method::MinEntry => {
                    float_unsupported(g, "min-entry")?;
                    Ok(Output::status(min_entry_divergence(&d, w)?.to_json()))
                }
                Method::Block => {
                    float_unsupported(g, "block")?;
                    let b = blocks.as_deref().ok_or_else(|| Error::input("--method block needs --blocks"))?;
                    let p = partition(b, &d)?;
                    Ok(Output::status(subdiagram_unique_ergodicity(&d, &p, *block, w)?.to_json()))
                }
            }
        }
        Command::Count { level, m, traces } => {
            float_unsupported(g, "count")?;
            if *traces {
                let ts = trace_from_limit(&deepen(&d, level + m + 1)?, *level, *m, &gap_ratio)?;
                return Ok(Output::ok(json!({
                    "analysis": "trace_from_limit",
                    "n_max": level,
                    "m": m,
                    "count": ts.len(),
                    "traces": ts.iter().map(|t| json!({
                        "members": t.members,
                        "trace": (1..=t.trace.len()).map(|n| strings(t.trace.at(n).unwrap())).collect::<Vec<_>>(),
                        "verdict": verdict_json(&t.verdict),
                    })).collect::<Vec<_>>(),
                })));
            }
            Ok(Output::ok(cluster_json(&cluster_extremes(&d, *level, *m, &gap_ratio)?)))
        }
        Command::Main1 { blocks, window: w, c, c1 } => {
            float_unsupported(g, "main1")?;
            let p = partition(blocks, &d)?;
            let r = check_main1(&d, &p, window(*w, &d), &rational(c)?, &rational(c1)?)?;
            Ok(Output::ok(r.to_json()))
        }
        Command::Chains { window: w } => {
            float_unsupported(g, "chains")?;
            match chain_partition_search(&d, window(*w, &d), &gap_ratio)? {
                ChainOutcome::Found { structure, evidence } => Ok(Output::ok(json!({
                    "analysis": "chain_partition_search",
                    "status": "Found",
                    "structure": structure.to_json(),
                    "chains": structure.chains(),
                    "evidence": evidence,
                }))),
                ChainOutcome::NoAdmissiblePartition { violated, witness } => Ok(Output {
                    value: json!({
                        "analysis": "chain_partition_search",
                        "status": "NoAdmissiblePartition",
                        "violated": violated,
                        "witness": witness,
                    }),
                    csv: None,
                    code: 2,
                }),
            }
        }
        Command::Stationary { levels, cross } => run_stationary(g, &d, *levels, cross.as_deref(), &gap_ratio),
        Command::Extend { w, window: win, mass } => {
            float_unsupported(g, "extend")?;
            let sel = selection(w, &d)?;
            let win = window(*win, &d);
            let mut value = extension_finiteness(&d, &sel, win)?.to_json();
            let mut code = Output::status(value.clone()).code;
            if *mass {
                let sub = restrict(&d, &sel, win)?;
                let trace = odometer_trace(&sub, win)?;
                let em = extension_mass(&d, &sub, &trace)?;
                if em.diverging_evidence {
                    code = 2;
                }
                value["mass"] = em.to_json();
            }
            Ok(Output { value, csv: None, code })
        }
        Command::Code { n0, level, vertex, radius, compact, blocks: show_blocks, orbit: show_orbit } => {
            float_unsupported(g, "code")?;
            let o = ordered(&d)?;
            let mut value = json!({"analysis": "code", "n0": n0, "level": level, "vertex": vertex});
            if *show_blocks {
                let fams = blocks(&o, *n0, *level)?;
                value["blocks"] = json!(fams
                    .iter()
                    .map(|f| json!({
                        "level": f.level,
                        "lengths": f.blocks.iter().map(Vec::len).collect::<Vec<_>>(),
                        "blocks": f.blocks.iter().map(|b| format_word(b, *compact)).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>());
                value["recovered"] = json!(fams
                    .windows(2)
                    .map(|w| incidence_from_blocks(&w[0], &w[1], None).to_json())
                    .collect::<Vec<_>>());
            } else if *show_orbit {
                let paths = orbit(&o, *level, *vertex)?;
                value["orbit_length"] = json!(paths.len());
                value["height"] = json!(d.heights(*level)?[*vertex].to_string());
                value["symbols"] = json!(format_word(
                    &paths.iter().map(|p| o.symbol(p, *n0)).collect::<Result<Vec<_>>>()?,
                    *compact
                ));
            } else {
                let start = o.min_path(*level, *vertex)?;
                let word = code_orbit(&o, *n0, &start, *radius)?;
                value["radius"] = json!(radius);
                value["word"] = json!(format_word(&word, *compact));
            }
            Ok(Output::ok(value))
        }
        Command::Catalog(_) | Command::Toeplitz { .. } => unreachable!(),
    }
}

fn run_stationary(g: &Global, d: &BratteliDiagram, levels: usize, cross: Option<&str>, gap_ratio: &Rat) -> Result<Output> {
    let Some(Generator::Stationary(m)) = d.spec().map(|s| &s.generator) else {
        return Err(Error::input("stationary needs a stationary spec"));
    };
    let cg = class_graph(m)?;
    let dist = distinguished_classes(&cg, DEFAULT_TOL);
    let levels = levels.min(d.depth()).max(1);
    let mut measures = Vec::new();
    for (a, x) in dist.iter().enumerate() {
        if *x != Distinction::Distinguished {
            continue;
        }
        let dm = distinguished_measure(d, &cg, a)?;
        let mut j = dm.to_json(d, levels);
        if g.mode == Mode::Float {
            j["tower_masses_float"] =
                json!((1..=levels).map(|n| dm.tower_masses_f64(d, n)).collect::<Result<Vec<_>>>()?);
        }
        measures.push(j);
    }
    let mut value = json!({
        "analysis": "stationary",
        "classes": cg.to_json(),
        "distinction": dist.iter().map(Distinction::to_json).collect::<Vec<_>>(),
        "measures": measures,
    });
    let mut code = 0;
    if let Some(c) = cross {
        let nm: Vec<usize> = list(c, "cross parameter")?;
        let [n_max, m] = nm[..] else {
            return Err(Error::input("--cross takes n_max,m"));
        };
        let r = cross_validate(&deepen(d, n_max + m + 1)?, n_max, m, gap_ratio)?;
        if !r.agrees() {
            code = 2;
        }
        value["cross"] = r.to_json();
    }
    Ok(Output { value, csv: None, code })
}

fn run_catalog(c: &CatalogCommand) -> Result<Output> {
    match c {
        CatalogCommand::List => Ok(Output::ok(json!({
            "entries": catalog::names()
                .into_iter()
                .map(|n| catalog::entry(n).map(|e| json!({"name": e.name, "description": e.description})))
                .collect::<Result<Vec<_>>>()?,
        }))),
        CatalogCommand::Emit { name } => Ok(Output::ok(catalog::entry(name)?.spec.to_json())),
        CatalogCommand::Check { name } => {
            let e = catalog::entry(name)?;
            let results = e.check()?;
            let all = results.iter().all(|r| r.holds);
            Ok(Output {
                value: json!({
                    "analysis": "catalog_check",
                    "name": e.name,
                    "all_hold": all,
                    "facts": results.iter().map(|r| json!({"claim": r.claim, "holds": r.holds, "detail": r.detail})).collect::<Vec<_>>(),
                }),
                csv: None,
                code: if all { 0 } else { 2 },
            })
        }
    }
}
