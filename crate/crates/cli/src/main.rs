use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cpcompress::compress::{check_abstraction, compress_classes, emit, CompressError, CompressOptions, Mapping};
use cpcompress::config::{ConfigError, NetworkSpec, Prefix};
use cpcompress::ecs::{compute_ecs, specialize, SpecializedNetwork};
use cpcompress::properties;
use cpcompress::srp::{Attr, NodeId, Solution, TieBreak};
use cpcompress::topo_gen::{self, Kind};

#[derive(Parser)]
#[command(name = "cpcompress", version, about = "Control-plane compression and equivalence checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Query {
    Reach,
    Pathlen,
    Blackhole,
    Multipath,
    Waypoint,
    Loop,
}

#[derive(Subcommand)]
enum Command {
    /// Compress every destination class and write abstract networks.
    Compress {
        spec: PathBuf,
        /// Only compress classes overlapping this prefix.
        #[arg(long)]
        ec: Option<Prefix>,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Keep communities that no policy tests.
        #[arg(long)]
        keep_unused_tags: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check an abstract network and its mapping against a concrete one.
    Check {
        spec: PathBuf,
        #[arg(value_name = "ABSTRACT")]
        abs: PathBuf,
        mapping: PathBuf,
        /// Run the exhaustive oracle when the concrete network has at most
        /// this many nodes.
        #[arg(long, default_value_t = cpcompress::oracle::DEFAULT_BOUND)]
        oracle_bound: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the stable solution(s) for one destination class.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        ec: Prefix,
        /// List every stable solution instead of simulating one.
        #[arg(long)]
        enumerate: bool,
        /// Largest network enumerated.
        #[arg(long, default_value_t = 12)]
        bound: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate a forwarding property on one destination class.
    Properties {
        spec: PathBuf,
        #[arg(long)]
        ec: Prefix,
        #[arg(long, value_enum)]
        query: Query,
        /// Source node (all nodes when omitted).
        #[arg(long)]
        source: Vec<String>,
        /// Target nodes (the destination when omitted).
        #[arg(long)]
        target: Vec<String>,
        #[arg(long)]
        waypoint: Vec<String>,
        #[arg(long)]
        enumerate: bool,
        #[arg(long, default_value_t = 12)]
        bound: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate a network.
    Gen {
        /// One of fattree, ring, mesh, rip-diamond, lp-gadget, tag-pref, chain, bad-gadget,
        /// static-loop, random.
        kind: String,
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure reported as `{"error": kind, "message": ...}` with exit 2.
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Failure { kind, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new("parse", e)
    }
}

impl From<CompressError> for Failure {
    fn from(e: CompressError) -> Self {
        match e {
            CompressError::Config(c) => c.into(),
            CompressError::Mapping(m) => Failure::new("mapping", m),
            other => Failure::new("compress", other),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<NetworkSpec, Failure> {
    NetworkSpec::parse(&read(path)?).map_err(|e| Failure::new("parse", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode, Failure> {
    match cmd {
        Command::Compress { spec, ec, jobs, out, keep_unused_tags, format } => {
            let net = load(&spec)?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let opts = CompressOptions { drop_unused_tags: !keep_unused_tags };
            let results = compress_classes(&net, &opts, jobs, ec)?;
            let emission = emit(&net, &results);
            fs::create_dir_all(&out).map_err(|e| Failure::new("io", format!("{}: {e}", out.display())))?;
            for (name, text) in &emission.files {
                write(&out.join(name), text)?;
            }
            match format {
                Format::Text => print!("{}", emission.report),
                Format::Json => print!("{}", emission.report_json),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { spec, abs, mapping, oracle_bound, format } => {
            let concrete = load(&spec)?;
            let abstract_net = load(&abs)?;
            let m = Mapping::parse(&read(&mapping)?, &concrete, &abstract_net)?;
            let report = check_abstraction(&concrete, &abstract_net, &m, oracle_bound)?;
            let cert = &report.certificate;
            let oracle = report.oracle.as_ref().map(|v| {
                let cx = v.counterexample.as_ref().map(|c| {
                    let names = if c.direction == cpcompress::oracle::Direction::ConcreteUnmatched {
                        &concrete
                    } else {
                        &abstract_net
                    };
                    json!({
                        "direction": format!("{:?}", c.direction),
                        "projected_loop": c.projected_loop,
                        "solution": solution_json(names, &c.solution),
                    })
                });
                json!({
                    "equivalent": v.equivalent,
                    "concrete_solutions": v.concrete_solutions.len(),
                    "abstract_solutions": v.abstract_solutions.len(),
                    "counterexample": cx,
                })
            });
            match format {
                Format::Json => print_json(&json!({
                    "passed": report.passed(),
                    "certificate": {
                        "mode": format!("{:?}", cert.mode),
                        "violations": cert.violations.iter().map(|v| json!({
                            "condition": format!("{:?}", v.condition),
                            "detail": v.detail,
                        })).collect::<Vec<_>>(),
                    },
                    "oracle": oracle,
                })),
                Format::Text => {
                    if cert.is_valid() {
                        println!("certificate: ok ({:?})", cert.mode);
                    } else {
                        println!("certificate: {} violation(s)", cert.violations.len());
                        for v in &cert.violations {
                            println!("  {v}");
                        }
                    }
                    match &report.oracle {
                        None => println!("oracle: skipped ({} nodes > bound {oracle_bound})", concrete.num_nodes()),
                        Some(v) if v.equivalent => println!(
                            "oracle: equivalent ({} concrete / {} abstract solutions)",
                            v.concrete_solutions.len(),
                            v.abstract_solutions.len()
                        ),
                        Some(v) => {
                            let c = v.counterexample.as_ref().expect("counterexample");
                            println!(
                                "oracle: counterexample {:?}{}",
                                c.direction,
                                if c.projected_loop { " (projected forwarding loop)" } else { "" }
                            );
                        }
                    }
                }
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Simulate { spec, ec, enumerate, bound, format } => {
            let net = load(&spec)?;
            let mut records = Vec::new();
            for (idx, sn) in class_networks(&net, ec)? {
                let sols = solve(&sn, enumerate, bound)?;
                if format == Format::Text {
                    println!("ec {idx} {} dest {}: {} solution(s)", ranges(&sn), net.name(sn.dest), sols.len());
                    for (i, s) in sols.iter().enumerate() {
                        println!("solution {i}");
                        for u in sn.topology.nodes() {
                            let hops: Vec<&str> = s.fwd[u.index()].iter().map(|&v| net.name(v)).collect();
                            println!(
                                "  {} {} -> {}",
                                net.name(u),
                                label(&net, s.label(u)),
                                if hops.is_empty() { "-".to_string() } else { hops.join(",") }
                            );
                        }
                    }
                }
                records.push(json!({
                    "ec": idx,
                    "prefixes": sn.ec.ranges.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "dest": net.name(sn.dest),
                    "solutions": sols.iter().map(|s| solution_json(&net, s)).collect::<Vec<_>>(),
                }));
            }
            if format == Format::Json {
                print_json(&Value::Array(records));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Properties { spec, ec, query, source, target, waypoint, enumerate, bound, format } => {
            let net = load(&spec)?;
            let names = |list: &[String]| -> Result<Vec<NodeId>, Failure> {
                list.iter()
                    .map(|n| net.node_id(n).ok_or_else(|| Failure::new("usage", format!("unknown node `{n}`"))))
                    .collect()
            };
            let sources = names(&source)?;
            let targets = names(&target)?;
            let waypoints = names(&waypoint)?;
            if query == Query::Waypoint && waypoints.is_empty() {
                return Err(Failure::new("usage", "waypoint query needs --waypoint"));
            }
            let mut records = Vec::new();
            for (idx, sn) in class_networks(&net, ec)? {
                let targets = if targets.is_empty() { vec![sn.dest] } else { targets.clone() };
                let sources: Vec<NodeId> =
                    if sources.is_empty() { sn.topology.nodes().collect() } else { sources.clone() };
                for (i, s) in solve(&sn, enumerate, bound)?.iter().enumerate() {
                    let mut verdicts: Vec<(String, Value)> = Vec::new();
                    if query == Query::Loop {
                        verdicts.push(("*".into(), json!(properties::has_routing_loop(s))));
                    } else {
                        for &u in &sources {
                            let v = match query {
                                Query::Reach => json!(properties::reachability(s, u, &targets)),
                                Query::Pathlen => json!(properties::path_lengths(s, u, &targets)),
                                Query::Blackhole => json!(properties::has_black_hole(s, u, &targets)),
                                Query::Multipath => json!(properties::multipath_consistent(s, u, &targets)),
                                Query::Waypoint => json!(properties::waypointed(s, u, &targets, &waypoints)),
                                Query::Loop => unreachable!(),
                            };
                            verdicts.push((net.name(u).to_string(), v));
                        }
                    }
                    if format == Format::Text {
                        for (u, v) in &verdicts {
                            println!("ec {idx} dest {} solution {i} {u}: {v}", net.name(sn.dest));
                        }
                    }
                    records.push(json!({
                        "ec": idx,
                        "dest": net.name(sn.dest),
                        "solution": i,
                        "verdicts": verdicts.into_iter().collect::<serde_json::Map<_, _>>(),
                    }));
                }
            }
            if format == Format::Json {
                print_json(&Value::Array(records));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { kind, size, seed, out } => {
            let kind: Kind = kind.parse().map_err(|e| Failure::new("usage", e))?;
            let spec = topo_gen::gen(kind, size, seed).map_err(|e| Failure::new("usage", e))?;
            match out {
                Some(path) => write(&path, &spec.to_json())?,
                None => print!("{}", spec.to_json()),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Specialized networks of every class overlapping `p`, with class index.
fn class_networks(net: &NetworkSpec, p: Prefix) -> Result<Vec<(usize, SpecializedNetwork)>, Failure> {
    let mut out = Vec::new();
    for (i, ec) in compute_ecs(net).iter().enumerate() {
        if ec.overlaps(p) {
            out.extend(specialize(net, ec)?.into_iter().map(|sn| (i, sn)));
        }
    }
    if out.is_empty() {
        return Err(Failure::new("usage", format!("no destination class overlaps {p}")));
    }
    Ok(out)
}

fn solve(sn: &SpecializedNetwork, enumerate: bool, bound: usize) -> Result<Vec<Solution>, Failure> {
    let srp = sn.srp();
    let r = if enumerate {
        srp.enumerate_solutions(bound)
    } else {
        srp.simulate(&TieBreak::lowest_id(sn.topology.num_nodes())).map(|s| vec![s])
    };
    r.map_err(|e| Failure::new("solve", e))
}

fn ranges(sn: &SpecializedNetwork) -> String {
    sn.ec.ranges.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

/// Renders a label with node names in AS paths.
fn label(net: &NetworkSpec, a: Option<&Attr>) -> String {
    match a {
        None => "unreachable".into(),
        Some(Attr::Bgp(b)) => {
            let mut s = format!("lp={}", b.local_pref);
            if !b.communities.is_empty() {
                let cs: Vec<String> = b.communities.iter().map(|c| c.to_string()).collect();
                s.push_str(&format!(" comms={}", cs.join(",")));
            }
            let path: Vec<&str> = b.as_path.iter().map(|&n| net.name(n)).collect();
            s.push_str(&format!(" path=[{}]", path.join(" ")));
            s
        }
        Some(other) => other.to_string(),
    }
}

fn solution_json(net: &NetworkSpec, s: &Solution) -> Value {
    let nodes: Vec<Value> = (0..s.labels.len() as u32)
        .map(NodeId)
        .map(|u| {
            json!({
                "node": net.name(u),
                "label": s.label(u).map(|a| label(net, Some(a))),
                "fwd": s.fwd[u.index()].iter().map(|&v| net.name(v)).collect::<Vec<_>>(),
            })
        })
        .collect();
    Value::Array(nodes)
}
