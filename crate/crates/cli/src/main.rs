//! `wazcode` command line: integrate, poincare, code, certify, shoot,
//! entropy, dcstats.
//!
//! Exit codes: 0 success, 1 computation error (or a failed certificate),
//! 2 usage error.

mod config;
mod svg;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use num_complex::Complex;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wazcode::certify::{certify_all, ParamBox, Verdict};
use wazcode::coding::{check_semiconjugacy_mp, code_orbit, code_orbit_mp, Itinerary};
use wazcode::connect::{shoot, shot_orbit, ShotReport};
use wazcode::dcstats::{
    dc1_from_estimate, double_exponential_pair, estimate_F, four_power_pair, planar_thresholds, symbolic_thresholds,
    OrbitPair, PlanarPair, SymbolPair, MARGIN,
};
use wazcode::flow::{find_periodic, growth_estimate, integrate, poincare};
use wazcode::geometry::{region_outline, RegionTag};
use wazcode::model::{Frame, ModelParams};
use wazcode::mp::Qd;
use wazcode::shifts::{graph_entropy, parse_word, SymbolSequence, VertexGraph};
use wazcode::Complex64;

/// Largest linear growth factor accepted for a forward integration.
const GROWTH_LIMIT: f64 = 1e12;

#[derive(Parser)]
#[command(name = "wazcode", version, about = "Coding, shooting and certification for z' = R e^{it}(conj(z)^2 - 1) + f")]
struct Cli {
    /// Flat JSON config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write an SVG plot where the command has one.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Serialize, Default)]
struct ParamArgs {
    #[arg(long = "R")]
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    corridor_scale: Option<f64>,
    /// exploration or certification.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    /// zero, rotating or sin_linear.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbation: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rtol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    atol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one Cauchy problem and write the orbit CSV.
    Integrate(IntegrateArgs),
    /// Iterate the period map.
    Poincare(PoincareArgs),
    /// Code an orbit into its window itinerary.
    Code(CodeArgs),
    /// Check the boundary inequalities with interval arithmetic.
    Certify(CertifyArgs),
    /// Shoot the orbit of a finite word with zero tails.
    Shoot(ShootArgs),
    /// Topological entropy of a vertex graph.
    Entropy(EntropyArgs),
    /// Distance-distribution statistics of a pair.
    Dcstats(DcstatsArgs),
}

#[derive(Args, Serialize)]
struct IntegrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// z, w, p or what.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    frame: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0_im: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

#[derive(Args, Serialize)]
struct PoincareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0_im: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    /// Newton-solve for a fixed point of the period map near x0.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    periodic: bool,
}

#[derive(Args, Serialize)]
struct CodeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// Shot JSON written by `shoot`; its full-precision point is coded.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    shot: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q_re: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q_im: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_lo: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_hi: Option<i64>,
    /// Poincare steps for the semiconjugacy check (0 skips it).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
}

#[derive(Args, Serialize)]
struct CertifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// Certify the box R in [R, r_max], N in [0, R/100] instead of a point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
}

#[derive(Args, Serialize)]
struct ShootArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    word: Option<String>,
    /// Built-in graph name or path to a graph JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    margin: Option<i64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    right_min: Option<i64>,
}

#[derive(Args, Serialize)]
struct EntropyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    power: Option<u32>,
}

#[derive(Args, Serialize)]
struct DcstatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// four-power, double-exponential, identical or fixed-points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_fraction: Option<f64>,
    /// Keep every stride-th n in the CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
}

enum Failure {
    Usage(String),
    Compute(String),
}

type Outcome = Result<ExitCode, Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn compute(e: impl ToString) -> Failure {
    Failure::Compute(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("computation failed: {m}");
            ExitCode::from(1)
        }
    }
}

fn flags<T: Serialize>(args: &T) -> Map<String, Value> {
    match serde_json::to_value(args).expect("flags serialize") {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn run(cli: Cli) -> Outcome {
    let (name, mut f) = match &cli.cmd {
        Cmd::Integrate(a) => ("integrate", flags(a)),
        Cmd::Poincare(a) => ("poincare", flags(a)),
        Cmd::Code(a) => ("code", flags(a)),
        Cmd::Certify(a) => ("certify", flags(a)),
        Cmd::Shoot(a) => ("shoot", flags(a)),
        Cmd::Entropy(a) => ("entropy", flags(a)),
        Cmd::Dcstats(a) => ("dcstats", flags(a)),
    };
    if let Some(o) = &cli.out {
        f.insert("out".into(), Value::from(o.clone()));
    }
    if let Some(t) = cli.threads {
        f.insert("threads".into(), Value::from(t));
    }
    if cli.svg {
        f.insert("svg".into(), Value::from(true));
    }
    let file = match &cli.config {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?),
        None => None,
    };
    let cfg = RunConfig::resolve(name, file.as_deref(), f).map_err(usage)?;
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        // Only fails if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    fs::create_dir_all(&cfg.out).map_err(|e| compute(format!("{}: {e}", cfg.out)))?;
    match name {
        "integrate" => cmd_integrate(&cfg),
        "poincare" => cmd_poincare(&cfg),
        "code" => cmd_code(&cfg),
        "certify" => cmd_certify(&cfg),
        "shoot" => cmd_shoot(&cfg),
        "entropy" => cmd_entropy(&cfg),
        _ => cmd_dcstats(&cfg),
    }
}

fn write(cfg: &RunConfig, file: &str, text: &str) -> Result<PathBuf, Failure> {
    let path = Path::new(&cfg.out).join(file);
    fs::write(&path, text).map_err(|e| compute(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// JSON artifact: the full config plus the command's payload.
fn artifact(cfg: &RunConfig, p: Option<&ModelParams>, key: &str, payload: Value) -> String {
    let mut m = Map::new();
    m.insert("config".into(), cfg.to_value());
    if let Some(p) = p {
        m.insert("params".into(), serde_json::to_value(p).expect("params serialize"));
        m.insert("regime".into(), Value::from(p.regime_label()));
    }
    m.insert(key.into(), payload);
    serde_json::to_string_pretty(&Value::Object(m)).expect("artifact serializes") + "\n"
}

/// CSV artifact: the config as a leading comment line.
fn csv_artifact(cfg: &RunConfig, body: &str) -> String {
    format!("# config: {}\n{}", serde_json::to_string(&cfg.to_value()).expect("config serializes"), body)
}

fn refuse_stiff(p: &ModelParams, dt: f64) -> Result<(), Failure> {
    let g = growth_estimate(p, dt);
    if g > GROWTH_LIMIT {
        return Err(usage(format!(
            "linear growth e^(2 R dt) = {g:.3e} exceeds {GROWTH_LIMIT:e} over dt = {dt}; \
             forward integration is meaningless here, use `shoot` (exit-side bisection) instead"
        )));
    }
    Ok(())
}

fn graph(name: &str) -> Result<VertexGraph, Failure> {
    if let Ok(g) = VertexGraph::builtin(name) {
        return Ok(g);
    }
    let text = fs::read_to_string(name).map_err(|_| usage(format!("unknown graph {name}")))?;
    VertexGraph::from_json(&text).map_err(usage)
}

fn cmd_integrate(cfg: &RunConfig) -> Outcome {
    let p = cfg.params().map_err(usage)?;
    let f = cfg.perturbation().map_err(usage)?;
    let frame = Frame::parse(&cfg.frame).ok_or_else(|| usage(format!("unknown frame {}", cfg.frame)))?;
    let t1 = cfg.t1.unwrap_or(cfg.t0 + 2.0 * PI);
    refuse_stiff(&p, t1 - cfg.t0)?;
    let x0 = Complex64::new(cfg.x0_re, cfg.x0_im);
    let orb = integrate(frame, cfg.t0, x0, t1, &p, &f, cfg.tolerance()).map_err(compute)?;
    let end = orb.end();
    write(cfg, "orbit.csv", &csv_artifact(cfg, &orb.to_csv(cfg.samples.max(1))))?;
    let payload = json!({ "t0": cfg.t0, "t1": t1, "x0": [x0.re, x0.im], "end": [end.re, end.im],
        "accuracy": orb.accuracy, "frame": frame.tag() });
    write(cfg, "integrate.json", &artifact(cfg, Some(&p), "orbit", payload))?;
    if cfg.svg {
        let mut plot = svg::Plot::new(format!("orbit in the {} frame", frame.tag()));
        for region in RegionTag::ALL.iter().filter(|r| r.frame() == frame) {
            if let Ok(o) = region_outline(*region, cfg.t0, 64, &p) {
                for face in o.faces {
                    plot.line(face.points, "#888888", 1.0);
                }
            }
        }
        plot.line(orb.sample(cfg.samples.max(1)).iter().map(|(_, x)| [x.re, x.im]).collect(), "#1f5fbf", 1.5);
        write(cfg, "orbit.svg", &plot.render(600.0))?;
    }
    println!("end {:.16e} {:.16e}", end.re, end.im);
    Ok(ExitCode::SUCCESS)
}

fn cmd_poincare(cfg: &RunConfig) -> Outcome {
    let p = cfg.params().map_err(usage)?;
    let f = cfg.perturbation().map_err(usage)?;
    refuse_stiff(&p, 2.0 * PI)?;
    let tol = cfg.tolerance();
    let mut q = Complex64::new(cfg.x0_re, cfg.x0_im);
    if cfg.periodic {
        q = find_periodic(q, &p, &f, tol).map_err(compute)?;
    }
    let mut body = String::from("k,re,im\n");
    let mut pts = vec![q];
    body += &format!("0,{:.16e},{:.16e}\n", q.re, q.im);
    for k in 1..=cfg.iterations {
        q = poincare(q, &p, &f, tol).map_err(compute)?;
        pts.push(q);
        body += &format!("{k},{:.16e},{:.16e}\n", q.re, q.im);
    }
    write(cfg, "poincare.csv", &csv_artifact(cfg, &body))?;
    let payload = json!({ "points": pts.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(), "periodic": cfg.periodic });
    write(cfg, "poincare.json", &artifact(cfg, Some(&p), "poincare", payload))?;
    println!("{} {:.16e} {:.16e}", cfg.iterations, q.re, q.im);
    Ok(ExitCode::SUCCESS)
}

/// Reads the `shot` object of a shot artifact.
fn read_shot(path: &str) -> Result<ShotReport, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{path}: {e}")))?;
    let shot = v.get("shot").cloned().unwrap_or(v);
    serde_json::from_value(shot).map_err(|e| usage(format!("{path}: not a shot report: {e}")))
}

fn cmd_code(cfg: &RunConfig) -> Outcome {
    let mut p = cfg.params().map_err(usage)?;
    let f = cfg.perturbation().map_err(usage)?;
    let parse = |s: &str| Qd::parse(s).ok_or_else(|| usage(format!("bad number {s}")));
    let (q, lo, hi) = match (&cfg.shot, &cfg.q_re) {
        (Some(path), _) => {
            let r = read_shot(path)?;
            // The shot's own parameters define its windows.
            p = r.params;
            (Complex::new(parse(&r.q_re_full)?, parse(&r.q_im_full)?), r.k_lo, r.k_hi)
        }
        (None, Some(re)) => {
            let im = cfg.q_im.as_deref().unwrap_or("0");
            (Complex::new(parse(re)?, parse(im)?), -4, 4)
        }
        (None, None) => return Err(usage("code needs --shot or --q-re/--q-im")),
    };
    let (lo, hi) = (cfg.k_lo.unwrap_or(lo), cfg.k_hi.unwrap_or(hi));
    let it: Itinerary = if f.is_zero() {
        code_orbit_mp(q, lo, hi, &p).map_err(compute)?
    } else {
        use wazcode::mp::Real;
        let q64 = Complex64::new(q.re.to_f64(), q.im.to_f64());
        code_orbit(q64, lo, hi, &p, &f, cfg.tolerance()).map_err(compute)?
    };
    let mut payload = json!({ "itinerary": serde_json::to_value(&it).expect("itinerary serializes") });
    let mut code = ExitCode::SUCCESS;
    if cfg.steps > 0 {
        if !f.is_zero() {
            return Err(usage("the semiconjugacy check runs for f = 0 only"));
        }
        let rep = check_semiconjugacy_mp(q, cfg.steps, lo, hi, &p).map_err(compute)?;
        if !rep.pass {
            code = ExitCode::from(1);
        }
        println!("semiconjugacy {} over {} steps", if rep.pass { "PASS" } else { "FAIL" }, cfg.steps);
        payload["semiconjugacy"] = serde_json::to_value(&rep).expect("report serializes");
    }
    write(cfg, "itinerary.json", &artifact(cfg, Some(&p), "code", payload))?;
    println!("k_min {} symbols {}", it.k_min, it.symbols);
    Ok(code)
}

fn cmd_certify(cfg: &RunConfig) -> Outcome {
    let p = cfg.params().map_err(usage)?;
    let b = match cfg.r_max {
        Some(r_max) if r_max >= p.r => ParamBox::theorem_range(p.r, r_max, p.beta),
        Some(r_max) => return Err(usage(format!("r_max {r_max} is below R {}", p.r))),
        None => ParamBox::point(&p),
    };
    let certs = certify_all(&b);
    let all = certs.iter().all(|c| c.verdict == Verdict::Pass);
    for c in &certs {
        let v = serde_json::to_value(c.verdict).expect("verdict serializes");
        println!("{} {} margin [{:.6e}, {:.6e}]", c.id, v.as_str().unwrap_or("?"), c.margin.lo, c.margin.hi);
    }
    let payload = json!({ "all_pass": all, "certificates": serde_json::to_value(&certs).expect("certificates serialize") });
    write(cfg, "certificates.json", &artifact(cfg, Some(&p), "certify", payload))?;
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_shoot(cfg: &RunConfig) -> Outcome {
    let p = cfg.params().map_err(usage)?;
    let f = cfg.perturbation().map_err(usage)?;
    let word = cfg.word.as_deref().ok_or_else(|| usage("shoot needs --word"))?;
    let w = parse_word(word).map_err(usage)?;
    let g = graph(&cfg.graph)?;
    let shot = shoot(&w, &g, cfg.margin, cfg.right_min, &p, &f).map_err(|e| match e {
        wazcode::connect::ConnectError::NotAdmissible(_) | wazcode::connect::ConnectError::Unsupported(_) => usage(e),
        _ => compute(e),
    })?;
    let r = &shot.report;
    write(cfg, "shot.json", &artifact(cfg, Some(&p), "shot", serde_json::to_value(r).expect("shot serializes")))?;
    if cfg.svg {
        let orb = shot_orbit(&shot, r.k_lo, r.k_hi, &p);
        use wazcode::coding::ZOrbit;
        let (a, b) = orb.span();
        let n = 2000;
        let trace: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let z = orb.z(a + (b - a) * i as f64 / n as f64);
                [z.re, z.im]
            })
            .collect();
        let mut plot = svg::Plot::new(format!("shot of {word}"));
        for region in [RegionTag::U, RegionTag::W] {
            if let Ok(o) = region_outline(region, -p.beta, 64, &p) {
                for face in o.faces {
                    plot.line(face.points, "#888888", 1.0);
                }
            }
        }
        plot.line(trace, "#bf3f1f", 1.0);
        write(cfg, "shot.svg", &plot.render(600.0))?;
    }
    println!("q_x {} {}", r.q_re, r.q_im);
    println!("itinerary {} from k = {} (expected {}), reproduces {}", r.itinerary.symbols, r.itinerary.k_min, r.expected, r.reproduces);
    Ok(if r.reproduces { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_entropy(cfg: &RunConfig) -> Outcome {
    let g = graph(&cfg.graph)?;
    if cfg.power == 0 {
        return Err(usage("--power must be positive"));
    }
    let h = graph_entropy(&g, cfg.power).map_err(compute)?;
    let payload = json!({ "graph": cfg.graph, "power": cfg.power, "entropy": h });
    write(cfg, "entropy.json", &artifact(cfg, None, "entropy", payload))?;
    println!("{h:.6}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_dcstats(cfg: &RunConfig) -> Outcome {
    let n = cfg.n_max;
    if n < 1000 {
        return Err(usage("n_max must be at least 1000"));
    }
    let (pair, grid): (Box<dyn OrbitPair>, Vec<f64>) = match cfg.pair.as_str() {
        "four-power" => (Box::new(four_power_pair(n)), symbolic_thresholds()),
        "double-exponential" => (Box::new(double_exponential_pair(n)), symbolic_thresholds()),
        "identical" => {
            let x = SymbolSequence::constant(0);
            (Box::new(SymbolPair::new(x.clone(), x, n)), symbolic_thresholds())
        }
        "fixed-points" => {
            let p = cfg.params().map_err(usage)?;
            let f = cfg.perturbation().map_err(usage)?;
            let tol = cfg.tolerance();
            let x = find_periodic(Complex64::new(1.0, 0.0), &p, &f, tol).map_err(compute)?;
            let y = find_periodic(Complex64::new(-1.0, 0.0), &p, &f, tol).map_err(compute)?;
            (Box::new(PlanarPair::from_poincare(x, y, n, &p, &f, tol).map_err(compute)?), planar_thresholds())
        }
        other => return Err(usage(format!("unknown pair {other}"))),
    };
    let est = estimate_F(pair.as_ref(), &grid, n, cfg.tail_fraction);
    let rep = dc1_from_estimate(&est, MARGIN);
    write(cfg, "dcstats.csv", &csv_artifact(cfg, &est.to_csv(cfg.stride)))?;
    write(cfg, "verdict.json", &artifact(cfg, None, "verdict", serde_json::to_value(&rep).expect("report serializes")))?;
    let v = serde_json::to_value(rep.verdict).expect("verdict serializes");
    println!("{}", v.as_str().unwrap_or("?"));
    Ok(ExitCode::SUCCESS)
}
