use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use hetpeer::instance::{apply_rules, parse_instance, read_instance, validate, XmlInstance};
use hetpeer::mapping::{infer_rules, parse_rules, serialize_rules, MappingRule};
use hetpeer::query::{evaluate, parse_query, print_query, render_answers, TpQuery};
use hetpeer::schema::{parse_correspondences, parse_dtd, DtdGraph};
use hetpeer::sim::{broadcast, build_network, scaling_point, scaling_table, SchemaCatalog, SimConfig};
use hetpeer::translate::{translate as translate_query, Direction, MappingContext, TranslateError, Translation};
use hetpeer::verify::{params_for, sample, verify_on, Counterexample, VerifyConfig, VerifyReport};
use log::{info, warn};
use rayon::prelude::*;

pub struct Opts {
    pub trace: bool,
    pub jobs: usize,
}

#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Untranslatable(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Untranslatable(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "{e:#}"),
            Failure::Untranslatable(s) | Failure::Verification(s) => f.write_str(s),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| path.display().to_string())
}

fn load_dtd(path: &Path) -> anyhow::Result<DtdGraph> {
    parse_dtd(&read(path)?).with_context(|| path.display().to_string())
}

fn load_rules(path: &Path) -> anyhow::Result<Vec<MappingRule>> {
    parse_rules(&read(path)?).with_context(|| path.display().to_string())
}

fn load_context(source: &Path, target: &Path, rules: &Path) -> anyhow::Result<MappingContext> {
    Ok(MappingContext::new(load_dtd(source)?, load_dtd(target)?, load_rules(rules)?))
}

fn parse_query_file(path: &Path) -> anyhow::Result<Vec<TpQuery>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_query(line).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn load_queries(query: Option<&str>, file: Option<&Path>) -> anyhow::Result<Vec<TpQuery>> {
    match (query, file) {
        (Some(q), _) => Ok(vec![parse_query(q).context("query")?]),
        (None, Some(f)) => parse_query_file(f),
        (None, None) => bail!("no query given"),
    }
}

fn write_out(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| p.display().to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("thread pool")
}

pub fn infer(source: &Path, target: &Path, corr: &Path, output: Option<&Path>) -> Outcome {
    let (s, t) = (load_dtd(source)?, load_dtd(target)?);
    let c = parse_correspondences(&read(corr)?, &s, &t).with_context(|| corr.display().to_string())?;
    let inf = infer_rules(&s, &t, &c);
    if inf.rules.is_empty() {
        let all: Vec<String> = inf.warnings.iter().map(ToString::to_string).collect();
        return Err(anyhow!("{}: no rules inferred: {}", corr.display(), all.join("; ")).into());
    }
    info!("{} rules from {} group pairs", inf.rules.len(), inf.pairs.len());
    write_out(output, &(serialize_rules(&inf.mapping_rules()) + "\n"))?;
    Ok(())
}

fn translate_one(opts: &Opts, q: &TpQuery, ctx: &MappingContext, dir: Direction) -> Result<Translation, Failure> {
    match translate_query(q, ctx, dir) {
        Ok(t) => {
            if opts.trace {
                eprintln!("{}", t.render_trace());
            }
            Ok(t)
        }
        Err(TranslateError::Untranslatable(m)) => Err(Failure::Untranslatable(format!("{}: {m}", print_query(q)))),
        Err(e @ TranslateError::Invalid(_)) => Err(Failure::Input(anyhow!("{}: {e}", print_query(q)))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn translate(
    opts: &Opts,
    source: &Path,
    target: &Path,
    rules: &Path,
    dir: Direction,
    query: Option<&str>,
    query_file: Option<&Path>,
    output: Option<&Path>,
) -> Outcome {
    let ctx = load_context(source, target, rules)?;
    let queries = load_queries(query, query_file)?;
    let mut text = String::new();
    let mut first_failure = None;
    for q in &queries {
        match translate_one(opts, q, &ctx, dir) {
            Ok(t) => text.push_str(&format!("{}\n", t.text())),
            Err(f @ Failure::Untranslatable(_)) => {
                eprintln!("{f}");
                first_failure.get_or_insert(f);
            }
            Err(f) => return Err(f),
        }
    }
    write_out(output, &text)?;
    first_failure.map_or(Ok(()), Err)
}

pub fn exchange(source: &Path, target: Option<&Path>, rules: &Path, instance: &Path, output: Option<&Path>) -> Outcome {
    let s = load_dtd(source)?;
    let rules = load_rules(rules)?;
    let d = parse_instance(&read(instance)?, &s).with_context(|| instance.display().to_string())?;
    let m = apply_rules(&rules, &d, &s).context("exchange")?;
    if let Some(t) = target {
        // unmapped required target nodes are legitimately absent
        if let Err(e) = validate(&m, &load_dtd(t)?) {
            warn!("exchanged instance is not valid against {}: {e}", t.display());
        }
    }
    write_out(output, &m.to_xml())?;
    Ok(())
}

pub fn eval(schema: Option<&Path>, instance: &Path, query: Option<&str>, query_file: Option<&Path>, output: Option<&Path>) -> Outcome {
    let text = read(instance)?;
    let d: XmlInstance = match schema {
        Some(s) => parse_instance(&text, &load_dtd(s)?),
        None => read_instance(&text),
    }
    .with_context(|| instance.display().to_string())?;
    let queries = load_queries(query, query_file)?;
    let mut out = String::new();
    for q in &queries {
        if queries.len() > 1 {
            out.push_str(&format!("# {}\n", print_query(q)));
        }
        out.push_str(&render_answers(&evaluate(q, &d)));
    }
    write_out(output, &out)?;
    Ok(())
}

fn query_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| path.display().to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

fn file_direction(path: &Path, default: Option<Direction>) -> anyhow::Result<Direction> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_lowercase()).unwrap_or_default();
    if stem.starts_with("forward") {
        Ok(Direction::Forward)
    } else if stem.starts_with("backward") {
        Ok(Direction::Backward)
    } else {
        default.ok_or_else(|| anyhow!("{}: name sets no direction and --direction is missing", path.display()))
    }
}

fn merge(parts: Vec<VerifyReport>) -> VerifyReport {
    let mut it = parts.into_iter();
    let mut r = it.next().expect("at least one part");
    for p in it {
        r.instances += p.instances;
        r.nonempty += p.nonempty;
        r.failures.extend(p.failures);
        r.contraction_checks += p.contraction_checks;
        r.contraction_failures.extend(p.contraction_failures);
    }
    r
}

fn diff(r: &VerifyReport, c: &Counterexample) -> String {
    let want: BTreeSet<&String> = c.expected.iter().collect();
    let got: BTreeSet<&String> = c.got.iter().collect();
    let mut s = format!("{} ({})\nquery: {}\ntranslation: {}\n--- expected\n+++ got\n", c.what, r.direction, r.query, r.translation);
    for l in want.union(&got) {
        let mark = match (want.contains(l), got.contains(l)) {
            (true, false) => '-',
            (false, true) => '+',
            _ => ' ',
        };
        s.push_str(&format!("{mark}{l}\n"));
    }
    s.push_str("instance:\n");
    s.push_str(&c.instance);
    s
}

#[allow(clippy::too_many_arguments)]
pub fn verify(
    opts: &Opts,
    source: &Path,
    target: &Path,
    rules: &Path,
    reference: Option<&Path>,
    queries: &Path,
    direction: Option<Direction>,
    instances: usize,
    seed: u64,
) -> Outcome {
    let ctx = load_context(source, target, rules)?;
    let semantics = match reference {
        Some(r) => MappingContext::new(ctx.source.clone(), ctx.target.clone(), load_rules(r)?),
        None => ctx.clone(),
    };
    let mut work = Vec::new();
    for f in query_files(queries)? {
        let dir = file_direction(&f, direction)?;
        work.extend(parse_query_file(&f)?.into_iter().map(|q| (q, dir)));
    }
    let pool = pool(opts.jobs)?;
    let cfg = VerifyConfig { instances, seed, ..VerifyConfig::default() };
    let (mut passed, mut failed, mut untranslatable) = (0, 0, 0);
    let mut first_failure = None;
    let mut first_untranslatable = None;
    let mut out = String::new();
    for (q, dir) in &work {
        let t = match translate_one(opts, q, &ctx, *dir) {
            Ok(t) => t,
            Err(f @ Failure::Untranslatable(_)) => {
                untranslatable += 1;
                out.push_str(&format!("UNTRANSLATABLE\t{dir}\t{}\n", print_query(q)));
                first_untranslatable.get_or_insert(f);
                continue;
            }
            Err(f) => return Err(f),
        };
        let translated = t.queries();
        let mut qs = vec![q];
        qs.extend(translated.iter());
        let samples = sample(&semantics, &cfg, &params_for(&semantics, &cfg.params, &qs));
        let r = if opts.jobs <= 1 || samples.len() < 2 {
            verify_on(q, &t, &samples)
        } else {
            let chunk = samples.len().div_ceil(opts.jobs);
            merge(pool.install(|| samples.par_chunks(chunk).map(|c| verify_on(q, &t, c)).collect()))
        };
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{verdict}\t{dir}\t{}\t=>\t{}\tinstances={} nonempty={} contraction_checks={} failures={}\n",
            r.query,
            r.translation,
            r.instances,
            r.nonempty,
            r.contraction_checks,
            r.failures.len() + r.contraction_failures.len()
        ));
        if r.passed() {
            passed += 1;
        } else {
            failed += 1;
            if first_failure.is_none() {
                let c = r.failures.first().or(r.contraction_failures.first()).expect("a failure");
                first_failure = Some(diff(&r, c));
            }
        }
    }
    out.push_str(&format!("queries={} passed={passed} failed={failed} untranslatable={untranslatable}\n", work.len()));
    print!("{out}");
    if let Some(d) = first_failure {
        return Err(Failure::Verification(format!("verification failed\n{d}")));
    }
    first_untranslatable.map_or(Ok(()), Err)
}

pub struct SimOverrides {
    pub peers: Option<usize>,
    pub degree: Option<usize>,
    pub schemas: Option<usize>,
    pub seed: Option<u64>,
    pub origin: Option<usize>,
}

fn parse_counts(s: &str) -> anyhow::Result<Vec<usize>> {
    let bad = || anyhow!("bad schema counts `{s}`; use `a..b` or `a,b,c`");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a == 0 || a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().ok().filter(|&k| k > 0).ok_or_else(bad)).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    opts: &Opts,
    source: &Path,
    target: &Path,
    corr: &Path,
    config: Option<&Path>,
    over: SimOverrides,
    queries: &[String],
    query_file: Option<&Path>,
    scaling: Option<&str>,
) -> Outcome {
    let mut cfg: SimConfig = match config {
        Some(p) => toml::from_str(&read(p)?).with_context(|| p.display().to_string())?,
        None => SimConfig::default(),
    };
    cfg.peers = over.peers.unwrap_or(cfg.peers);
    cfg.degree = over.degree.unwrap_or(cfg.degree);
    cfg.schemas = over.schemas.unwrap_or(cfg.schemas);
    cfg.seed = over.seed.unwrap_or(cfg.seed);
    cfg.origin = over.origin.or(cfg.origin);
    let mut qs = Vec::new();
    for q in queries {
        qs.push(parse_query(q).with_context(|| format!("query `{q}`"))?);
    }
    if let Some(f) = query_file {
        qs.extend(parse_query_file(f)?);
    }
    if qs.is_empty() {
        return Err(anyhow!("no query given").into());
    }
    let counts = scaling.map(parse_counts).transpose()?;
    let size = counts.iter().flatten().copied().chain([cfg.schemas]).max().unwrap_or(1);
    let (s, t) = (load_dtd(source)?, load_dtd(target)?);
    let c = parse_correspondences(&read(corr)?, &s, &t).with_context(|| corr.display().to_string())?;
    let catalog = SchemaCatalog::alternating(&s, &t, &c, size);
    let mut net = build_network(&cfg, &catalog).context("network")?;
    if let Some(dir) = &cfg.instance_dir {
        for p in &mut net.peers {
            let path = Path::new(dir).join(format!("peer-{}.xml", p.id));
            if path.exists() {
                let d = parse_instance(&read(&path)?, &catalog.schemas[p.schema]).with_context(|| path.display().to_string())?;
                p.instance = Some(d);
            }
        }
    }
    info!("{} peers, {} acquaintance pairs, origin {}", net.peers.len(), net.edge_count(), net.origin);
    let mut out = String::new();
    for q in &qs {
        let r = broadcast(&net, &catalog, net.origin, q).context("broadcast")?;
        out.push_str(&format!("# query\t{}\n", print_query(q)));
        out.push_str(&r.to_table());
    }
    if let Some(counts) = counts {
        let cells: Vec<(&TpQuery, usize)> = qs.iter().flat_map(|q| counts.iter().map(move |&k| (q, k))).collect();
        let rows = pool(opts.jobs)?
            .install(|| cells.par_iter().map(|&(q, k)| scaling_point(&cfg, &catalog, k, q)).collect::<Result<Vec<_>, _>>())
            .context("scaling run")?;
        out.push_str(&scaling_table(&rows));
    }
    print!("{out}");
    Ok(())
}
