//! `gaplab`: command-line front end. Every subcommand exits nonzero iff an
//! asserted invariant fails or the run errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use gaplab::atlas::{self, CutAtlas};
use gaplab::check::{self, Check};
use gaplab::harness::{self, ExperimentConfig, FixtureKind, FixtureParams, InstanceSource, Signature, Subject, Verdict};
use gaplab::instance::{self, Format, SupportGraph};
use gaplab::lp::{self, LpOptions, LpSolution};
use gaplab::maxent::{self, TreeSample};
use gaplab::num::{self, Q};
use gaplab::slack::{self, AlphaMode, SlackEngine, TreeAudit};

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Metric TSP integrality-gap laboratory")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the subtour LP by cutting planes.
    Lp {
        #[arg(long)]
        instance: PathBuf,
        /// Instance format; inferred from the extension and contents when omitted.
        #[arg(long)]
        format: Option<String>,
        /// Cap on separation rounds; each round adds at least one cut.
        #[arg(long, default_value_t = 500)]
        max_cuts: usize,
        #[arg(long, default_value = "sol.json")]
        out: PathBuf,
    },
    /// Fit max-entropy weights and sample spanning trees, one JSON line each.
    Tree {
        #[command(flatten)]
        src: SupportArgs,
        #[arg(long, default_value_t = 1e-6)]
        fit_eps: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value = "trees.jsonl")]
        out: PathBuf,
    },
    /// Per-tree tree, matching and shortcut-tour costs as CSV.
    Tour {
        #[arg(long)]
        lp: PathBuf,
        #[arg(long, default_value_t = 0)]
        pivot: usize,
        #[arg(long)]
        trees: PathBuf,
        #[arg(long, default_value = "tours.csv")]
        out: PathBuf,
    },
    /// Enumerate near-min cuts and build their atlas.
    Cuts {
        #[command(flatten)]
        src: SupportArgs,
        #[arg(long, default_value = "0.05")]
        eta: String,
        /// Use `≤ 2 + η` instead of `< 2 + η`.
        #[arg(long)]
        closed_threshold: bool,
        #[arg(long, default_value = "atlas.json")]
        out: PathBuf,
    },
    /// Audit the slack vector on every sampled tree, one JSON line each.
    Slack {
        #[command(flatten)]
        src: SupportArgs,
        /// An atlas written by `cuts`; it must match the rebuilt one.
        #[arg(long)]
        atlas: Option<PathBuf>,
        #[arg(long)]
        trees: PathBuf,
        #[arg(long, default_value = "0.05")]
        eta: String,
        #[arg(long, value_enum, default_value_t = Alpha::Hierarchy)]
        alpha: Alpha,
        /// Also check O-join feasibility of the shifted vector per tree.
        #[arg(long)]
        ojoin_check: bool,
        #[arg(long, default_value = "audit.jsonl")]
        out: PathBuf,
    },
    /// Write a synthetic support graph and print its atlas signature.
    Fixture {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value = "fixture.json")]
        out: PathBuf,
    },
    /// Batch pipeline with a bound table per instance.
    Experiment(ExperimentArgs),
    /// Rebuild the atlas and slack engine and re-run every invariant,
    /// optionally against stored `cuts` and `slack` output.
    Verify {
        #[command(flatten)]
        src: SupportArgs,
        #[arg(long, default_value = "0.05")]
        eta: String,
        #[arg(long)]
        atlas: Option<PathBuf>,
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Trees behind `--audit`; required with it.
        #[arg(long)]
        trees: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Alpha::Hierarchy)]
        alpha: Alpha,
    },
}

#[derive(Args)]
struct SupportArgs {
    /// LP solution from `lp`.
    #[arg(long, conflicts_with = "support")]
    lp: Option<PathBuf>,
    /// Support graph JSON, e.g. from `fixture`.
    #[arg(long)]
    support: Option<PathBuf>,
    /// Vertex split into `u₀,v₀` when reading an LP solution.
    #[arg(long, default_value_t = 0)]
    pivot: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Instance files (format inferred).
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Random Euclidean instances of this size.
    #[arg(long)]
    random_n: Option<usize>,
    #[arg(long, default_value_t = 20)]
    random_count: usize,
    #[arg(long, default_value_t = 100.0)]
    random_box: f64,
    /// Fixture kinds, or `all`.
    #[arg(long, num_args = 1..)]
    fixtures: Vec<String>,
    #[arg(long, default_value = "0.05")]
    eta: String,
    /// Defaults to `η/(4 + 2η)`.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long, value_enum, default_value_t = Alpha::Hierarchy)]
    alpha: Alpha,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    fit_eps: f64,
    #[arg(long)]
    allow_large_eta: bool,
    #[arg(long, default_value_t = 0)]
    ojoin_trees: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alpha {
    TwiceBeta,
    Hierarchy,
}

impl From<Alpha> for AlphaMode {
    fn from(a: Alpha) -> AlphaMode {
        match a {
            Alpha::TwiceBeta => AlphaMode::TwiceBeta,
            Alpha::Hierarchy => AlphaMode::Hierarchy,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn out_path(cli: &Cli, p: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    Ok(if p.is_absolute() { p.to_path_buf() } else { cli.out_dir.join(p) })
}

fn parse_q(s: &str) -> Result<Q> {
    Ok(num::parse(s)?)
}

fn infer_format(path: &Path, given: Option<&str>) -> Result<Format> {
    if let Some(f) = given {
        return Ok(f.parse()?);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsp") => Ok(Format::TsplibEuc2d),
        Some("json") => {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            Ok(if v.get("matrix").is_some() { Format::JsonMatrix } else { Format::JsonPoints })
        }
        _ => bail!("cannot infer the format of {}; pass --format", path.display()),
    }
}

fn load_support(src: &SupportArgs) -> Result<(SupportGraph, Option<LpSolution>)> {
    match (&src.lp, &src.support) {
        (Some(p), None) => {
            let sol = LpSolution::read_json(p).with_context(|| format!("reading {}", p.display()))?;
            let g = instance::split_node(&sol.instance, &sol, src.pivot)?;
            Ok((g, Some(sol)))
        }
        (None, Some(p)) => Ok((SupportGraph::read_json(p).with_context(|| format!("reading {}", p.display()))?, None)),
        _ => bail!("pass exactly one of --lp and --support"),
    }
}

fn read_trees(path: &Path) -> Result<Vec<TreeSample>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    BufReader::new(f)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let status = match (c.passed(), c.asserted) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "note",
        };
        println!("{status:>4}  {:<40} {}/{} failed", c.name, c.failed, c.checked);
        for f in c.failures.iter().take(3) {
            println!("        {f}");
        }
    }
}

fn build_engine(atlas: &CutAtlas, g: &SupportGraph, alpha: Alpha, checks: &mut Vec<Check>) -> Result<SlackEngine> {
    let mut mode: AlphaMode = alpha.into();
    if slack::alpha_for(mode, &atlas.eta, &slack::default_beta(&atlas.eta)).is_err() {
        eprintln!("note: eta too large for the hierarchy alpha; using alpha = 2 beta");
        mode = AlphaMode::TwiceBeta;
    }
    let engine = SlackEngine::build_unchecked(atlas, g, mode)?;
    checks.extend(engine.checks.iter().cloned());
    Ok(engine)
}

fn atlas_checks(atlas: &CutAtlas, g: &SupportGraph) -> Result<Vec<Check>> {
    let pool2 = atlas::enumerate_near_min_cuts(g, &(num::qi(2) * &atlas.eta), atlas.closed)?;
    Ok(atlas::structural_checks(atlas, g, &pool2)?)
}

/// Compares a stored atlas file against the rebuilt atlas cut by cut.
fn atlas_matches(path: &Path, atlas: &CutAtlas) -> Result<Check> {
    let stored: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut c = Check::new("stored-atlas-matches-rebuild");
    let fresh = atlas.to_json();
    for key in ["eta", "cuts", "components", "one_side_components"] {
        c.record(stored.get(key) == fresh.get(key), || format!("field `{key}` differs"));
    }
    Ok(c)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Lp { instance, format, max_cuts, out } => {
            let fmt = infer_format(instance, format.as_deref())?;
            let inst = instance::load_instance(instance, fmt)?;
            let sol = lp::solve_subtour_lp_with(&inst, &LpOptions { max_rounds: *max_cuts, ..LpOptions::default() })?;
            let path = out_path(cli, out)?;
            sol.write_json(&path)?;
            println!(
                "{}: n = {}, c(x) = {:.6}, {} support edges, {} rounds, extremal = {}",
                inst.name,
                inst.n,
                num::to_f64(&sol.objective),
                sol.edges.len(),
                sol.rounds,
                sol.extremal
            );
            Ok(true)
        }
        Cmd::Tree { src, fit_eps, samples, out } => {
            let (g, _) = load_support(src)?;
            let lambda = maxent::fit_support(&g, *fit_eps)?;
            let trees = harness::sample_trees(&lambda, &g, cli.seed, &g.name, *samples)?;
            write_jsonl(&out_path(cli, out)?, &trees)?;
            let ok = lambda.report.max_deviation <= *fit_eps;
            println!("{} trees; max marginal deviation {:.3e}", trees.len(), lambda.report.max_deviation);
            Ok(ok)
        }
        Cmd::Tour { lp: lp_path, pivot, trees, out } => {
            let sol = LpSolution::read_json(lp_path)?;
            let g = instance::split_node(&sol.instance, &sol, *pivot)?;
            let subject = Subject {
                name: sol.instance.name.clone(),
                lp_cost: sol.objective.clone(),
                instance: Some(sol.instance.clone()),
                graph: g,
                eta: num::q(1, 20),
            };
            let trees = read_trees(trees)?;
            let records: Vec<_> = trees.par_iter().map(|t| harness::tree_record(&subject, t)).collect::<gaplab::Result<_>>()?;
            let lp_cost = num::to_f64(&subject.lp_cost);
            let mut w = BufWriter::new(File::create(out_path(cli, out)?)?);
            writeln!(w, "draw,tree_cost,matching_cost,total,ratio,shortcut_cost")?;
            let mut ok = true;
            for r in &records {
                let m = r.matching_cost.unwrap_or(0.0);
                ok &= r.matching_excess.map_or(true, |e| e <= 1e-9);
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.draw,
                    r.tree_cost,
                    m,
                    r.tree_cost + m,
                    (r.tree_cost + m) / lp_cost,
                    r.shortcut_cost.unwrap_or(f64::NAN)
                )?;
            }
            w.flush()?;
            let mean = records.iter().map(|r| r.tree_cost + r.matching_cost.unwrap_or(0.0)).sum::<f64>() / records.len().max(1) as f64;
            println!("{} trees; mean (tree + matching)/c(x) = {:.6}", records.len(), mean / lp_cost);
            if !ok {
                eprintln!("a matching exceeded c(x)/2");
            }
            Ok(ok)
        }
        Cmd::Cuts { src, eta, closed_threshold, out } => {
            let (g, _) = load_support(src)?;
            let atlas = atlas::build_atlas(&g, &parse_q(eta)?, *closed_threshold)?;
            std::fs::write(out_path(cli, out)?, serde_json::to_string_pretty(&atlas.to_json())?)?;
            let checks = atlas_checks(&atlas, &g)?;
            println!("{} near-min cuts, signature {:?}", atlas.cuts.len(), Signature::of(&atlas));
            for w in &atlas.warnings {
                println!("warning: {w}");
            }
            print_checks(&checks);
            Ok(check::all_pass(&checks))
        }
        Cmd::Slack { src, atlas: stored, trees, eta, alpha, ojoin_check, out } => {
            let (g, _) = load_support(src)?;
            let atlas = atlas::build_atlas(&g, &parse_q(eta)?, false)?;
            let mut checks = Vec::new();
            if let Some(p) = stored {
                checks.push(atlas_matches(p, &atlas)?);
            }
            let engine = build_engine(&atlas, &g, *alpha, &mut checks)?;
            let trees = read_trees(trees)?;
            let audits: Vec<TreeAudit> =
                trees.par_iter().map(|t| engine.audit(&atlas, &g, t, *ojoin_check)).collect::<gaplab::Result<_>>()?;
            write_jsonl(&out_path(cli, out)?, &audits)?;
            let mut tree_check = Check::new("tree-audit-guarantees");
            for a in &audits {
                tree_check.record(a.asserted_ok(), || format!("draw {}", a.draw));
            }
            checks.push(tree_check);
            print_checks(&checks);
            Ok(check::all_pass(&checks))
        }
        Cmd::Fixture { kind, size, out } => {
            let kind: FixtureKind = kind.parse()?;
            let f = harness::generate_fixture(kind, &FixtureParams { size: *size, eta: None })?;
            f.graph.write_json(&out_path(cli, out)?)?;
            let atlas = atlas::build_atlas(&f.graph, &f.eta, false)?;
            let sig = Signature::of(&atlas);
            println!("{}: {} vertices, eta = {}, signature {:?}", kind.name(), f.graph.n, num::format(&f.eta), sig);
            match &f.golden {
                Some(g) if *g != sig => {
                    println!("golden signature {g:?} does not match");
                    Ok(false)
                }
                _ => Ok(true),
            }
        }
        Cmd::Experiment(a) => run_experiment(cli, a),
        Cmd::Verify { src, eta, atlas: stored, audit, trees, alpha } => {
            let (g, _) = load_support(src)?;
            let atlas = atlas::build_atlas(&g, &parse_q(eta)?, false)?;
            let mut checks = atlas_checks(&atlas, &g)?;
            if let Some(p) = stored {
                checks.push(atlas_matches(p, &atlas)?);
            }
            let engine = build_engine(&atlas, &g, *alpha, &mut checks)?;
            if let Some(ap) = audit {
                let tp = trees.as_ref().context("--audit needs --trees")?;
                let trees = read_trees(tp)?;
                let stored: Vec<serde_json::Value> = BufReader::new(File::open(ap)?)
                    .lines()
                    .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                    .map(|l| Ok(serde_json::from_str(&l?)?))
                    .collect::<Result<_>>()?;
                let mut same = Check::new("stored-audit-matches-recomputation");
                let mut guarantees = Check::new("tree-audit-guarantees");
                same.record(stored.len() == trees.len(), || format!("{} audits for {} trees", stored.len(), trees.len()));
                for (t, s) in trees.iter().zip(&stored) {
                    let with_ojoin = s.get("ojoin_ok").is_some_and(|v| !v.is_null());
                    let a = engine.audit(&atlas, &g, t, with_ojoin)?;
                    guarantees.record(a.asserted_ok(), || format!("draw {}", a.draw));
                    same.record(serde_json::to_value(&a)? == *s, || format!("draw {}", t.draw));
                }
                checks.push(same);
                checks.push(guarantees);
            }
            print_checks(&checks);
            Ok(check::all_pass(&checks))
        }
    }
}

fn run_experiment(cli: &Cli, a: &ExperimentArgs) -> Result<bool> {
    let mut sources = Vec::new();
    for p in &a.instances {
        sources.push(InstanceSource::File(p.clone(), infer_format(p, None)?));
    }
    if let Some(n) = a.random_n {
        sources.push(InstanceSource::Random { n, box_size: a.random_box, count: a.random_count, seed: cli.seed });
    }
    for f in &a.fixtures {
        if f == "all" {
            sources.extend(FixtureKind::ALL.iter().map(|k| InstanceSource::Fixture(*k, FixtureParams::default())));
        } else {
            sources.push(InstanceSource::Fixture(f.parse()?, FixtureParams::default()));
        }
    }
    if sources.is_empty() {
        bail!("no instances: pass --instances, --random-n or --fixtures");
    }
    let cfg = ExperimentConfig {
        sources,
        eta: parse_q(&a.eta)?,
        beta: a.beta.as_deref().map(parse_q).transpose()?,
        alpha_mode: a.alpha.into(),
        samples: a.samples,
        seed: cli.seed,
        eps_fit: a.fit_eps,
        out_dir: Some(cli.out_dir.clone()),
        allow_large_eta: a.allow_large_eta,
        ojoin_trees: a.ojoin_trees,
        ..ExperimentConfig::default()
    };
    let report = harness::run_experiment(&cfg)?;
    println!("eta = {}, beta = {}, alpha = {}, {} samples per instance", report.eta, report.beta, report.alpha, report.samples);
    println!("{:<28} {:>10} {:>10} {:>12} {:>7}", "instance", "c(x)", "ratio", "1.5 - ratio", "status");
    for r in &report.instances {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{:<28} {:>10.4} {:>10} {:>12} {:>7}",
            r.name,
            r.lp_cost,
            fmt(r.ratio_mean),
            fmt(r.ratio_margin),
            if r.passed() { "ok" } else { "FAIL" }
        );
        if let Some(e) = &r.error {
            println!("    error: {e}");
        }
        for b in r.bounds.iter().filter(|b| b.verdict == Verdict::Fail) {
            println!("    bound {} failed: measured {:.6} against {:.6} ({})", b.invariant, b.measured, b.bound, b.scope);
        }
        for c in r.checks.iter().filter(|c| c.asserted && !c.passed()) {
            println!("    check {} failed {}/{}", c.name, c.failed, c.checked);
        }
    }
    println!("{}", report.note);
    println!("results in {}", cli.out_dir.display());
    Ok(report.passed())
}
