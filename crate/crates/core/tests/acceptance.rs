//! Acceptance suite: one pass/fail line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cpcompress::bdd::BddManager;
use cpcompress::compress::{
    behaviors, check_abstraction, compress_network, emit, CompressOptions, Mapping, Mode,
};
use cpcompress::config::{Clause, Community, NetworkSpec, Protocol, RouteFields, RoutePolicy};
use cpcompress::ecs::{compute_ecs, specialize};
use cpcompress::policy_bdd::{bdd_equal, PolicyCompiler, VarLayout};
use cpcompress::topo_gen::{self, Kind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{comm, compress_and_check, prefix, property_discrepancies, random_policy, subsets, ORACLE_BOUND};

type Outcome = Result<String, String>;

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

fn table_8a() -> Outcome {
    let rows = [
        (Kind::Fattree, 180, 6, 5),
        (Kind::Ring, 100, 51, 50),
        (Kind::Ring, 500, 251, 250),
        (Kind::Mesh, 50, 2, 1),
        (Kind::Mesh, 150, 2, 1),
    ];
    let mut notes = Vec::new();
    for (kind, size, want_n, want_e) in rows {
        let spec = topo_gen::gen(kind, size, 0).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let results = compress_network(&spec, &CompressOptions::default(), jobs()).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        if results.is_empty() {
            return Err(format!("{kind}-{size}: no classes"));
        }
        for r in &results {
            if (r.abstract_nodes(), r.abstract_links()) != (want_n, want_e) {
                return Err(format!(
                    "{kind}-{size} class {}: {} nodes / {} edges, want {want_n}/{want_e}",
                    r.ec_index,
                    r.abstract_nodes(),
                    r.abstract_links()
                ));
            }
        }
        if secs > 60.0 {
            return Err(format!("{kind}-{size} took {secs:.1}s"));
        }
        notes.push(format!("{kind}-{size} {}/{} -> {want_n}/{want_e} in {secs:.1}s", spec.num_nodes(), spec.num_links()));
    }
    Ok(notes.join("; "))
}

fn fattree_classes() -> Outcome {
    let spec = topo_gen::gen(Kind::Fattree, 180, 0).map_err(|e| e.to_string())?;
    let n = compute_ecs(&spec).len();
    if n == 72 {
        Ok("72 classes".into())
    } else {
        Err(format!("{n} classes"))
    }
}

fn lp_gadget() -> Outcome {
    let spec = topo_gen::lp_gadget();
    let results = compress_network(&spec, &CompressOptions::default(), 1).map_err(|e| e.to_string())?;
    let [r] = results.as_slice() else {
        return Err(format!("{} results", results.len()));
    };
    let a = &r.abstraction;
    let shape = (r.abstract_nodes(), r.abstract_links());
    if shape != (4, 4) {
        return Err(format!("{} nodes / {} edges", shape.0, shape.1));
    }
    // {d}, {rest} refined once into {a}, {b1..b3}; then b split in two cases
    let sizes: Vec<usize> = a.blocks.iter().map(Vec::len).collect();
    if a.mode != Mode::ForallForall || sizes != [1, 1, 3] || a.copies != [1, 1, 2] {
        return Err(format!("blocks {sizes:?} copies {:?} mode {:?}", a.copies, a.mode));
    }
    Ok("5/6 -> 4/4 with blocks [1, 1, 3] and copies [1, 1, 2]".into())
}

fn oracle_suite() -> Outcome {
    let t = Instant::now();
    let mut checked = 0;
    let mut by_protocol = std::collections::BTreeMap::new();
    let mut compressed = 0;
    for seed in 0..600u64 {
        let spec = topo_gen::random_network(seed, 8);
        let protocol = spec.protocol().map_err(|e| e.to_string())?;
        let results = compress_and_check(&spec).map_err(|e| format!("seed {seed}: {e}"))?;
        for (r, report) in results {
            let Some(v) = &report.oracle else {
                return Err(format!("seed {seed}: oracle skipped"));
            };
            if !report.passed() {
                let why = match (&report.certificate.violations.first(), &v.counterexample) {
                    (Some(c), _) => c.to_string(),
                    (None, Some(cx)) => format!("{:?} unmatched", cx.direction),
                    _ => "?".into(),
                };
                return Err(format!("seed {seed} ({protocol:?}) class {}: {why}", r.ec_index));
            }
            checked += 1;
            if r.abstract_nodes() < r.concrete_nodes {
                compressed += 1;
            }
            *by_protocol.entry(format!("{protocol:?}")).or_insert(0) += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    if secs > 600.0 {
        return Err(format!("took {secs:.0}s"));
    }
    Ok(format!("{checked} abstractions ({compressed} smaller than concrete) {by_protocol:?} in {secs:.1}s"))
}

fn naive_gadget_loops() -> Outcome {
    let concrete = topo_gen::lp_gadget();
    let (abs, sidecar) = topo_gen::lp_gadget_naive();
    let mapping = Mapping::parse(&sidecar, &concrete, &abs).map_err(|e| e.to_string())?;
    let report = check_abstraction(&concrete, &abs, &mapping, ORACLE_BOUND).map_err(|e| e.to_string())?;
    let v = report.oracle.ok_or("oracle skipped")?;
    match v.counterexample {
        Some(cx) if !v.equivalent && cx.projected_loop => {
            Ok(format!("rejected, {:?} solution projects to a loop", cx.direction))
        }
        Some(_) => Err("counterexample has no loop".into()),
        None => Err("naive abstraction accepted".into()),
    }
}

fn bounded_behaviors() -> Outcome {
    let mut notes = Vec::new();
    for k in [2usize, 3] {
        let spec = topo_gen::chain(k);
        let results = compress_network(&spec, &CompressOptions::default(), 1).map_err(|e| e.to_string())?;
        let r = &results[0];
        let ec = &compute_ecs(&spec)[0];
        let net = specialize(&spec, ec).map_err(|e| e.to_string())?.remove(0);
        let sols = net.srp().enumerate_solutions(ORACLE_BOUND).map_err(|e| e.to_string())?;
        let u_block = r.abstraction.block(spec.node_id("u1").unwrap());
        let mut peak = 0;
        for s in &sols {
            for (b, set) in behaviors(&r.abstraction.block_of, s).iter().enumerate() {
                if set.len() > k {
                    return Err(format!("k={k}: block {b} shows {} behaviors", set.len()));
                }
                if b == u_block {
                    peak = peak.max(set.len());
                }
            }
        }
        if peak != k {
            return Err(format!("k={k}: at most {peak} behaviors attained"));
        }
        notes.push(format!("k={k}: {} solutions, max {peak}", sols.len()));
    }
    Ok(notes.join("; "))
}

fn fixtures() -> Vec<(String, NetworkSpec)> {
    let mut out = vec![
        ("rip-diamond".to_string(), topo_gen::rip_diamond()),
        ("lp-gadget".to_string(), topo_gen::lp_gadget()),
        ("tag-pref".to_string(), topo_gen::tag_pref()),
        ("chain2".to_string(), topo_gen::chain(2)),
        ("chain3".to_string(), topo_gen::chain(3)),
        ("bad-gadget".to_string(), topo_gen::bad_gadget()),
        ("static-loop".to_string(), topo_gen::static_loop()),
        ("ring8".to_string(), topo_gen::ring(8)),
        ("mesh6".to_string(), topo_gen::mesh(6)),
    ];
    for seed in 0..100 {
        out.push((format!("random-{seed}"), topo_gen::random_network(seed, 8)));
    }
    out
}

fn property_preservation() -> Outcome {
    let mut pairs = 0;
    for (name, spec) in fixtures() {
        for (r, report) in compress_and_check(&spec).map_err(|e| format!("{name}: {e}"))? {
            let v = report.oracle.as_ref().ok_or_else(|| format!("{name}: oracle skipped"))?;
            if !report.passed() {
                return Err(format!("{name}: not certified"));
            }
            let bad = property_discrepancies(v, r.abstract_nodes());
            if let Some(first) = bad.first() {
                return Err(format!("{name}: {} discrepancies, first {first}", bad.len()));
            }
            pairs += v.matches.len();
        }
    }
    Ok(format!("{pairs} matched solution pairs agree"))
}

fn bdd_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut valuations = 0u64;
    for i in 0..200 {
        let nc = rng.random_range(0..=8u16);
        let nl = rng.random_range(0..=4usize);
        let comms: Vec<Community> = (1..=nc).map(comm).collect();
        let lps: Vec<u32> = (0..nl).map(|j| 150 + 50 * j as u32).collect();
        let policy = random_policy(&mut rng, &comms, &lps);
        let sp = policy.specialize(prefix(), Protocol::Bgp);
        let mut pc = PolicyCompiler::new(VarLayout::new(comms.iter().copied(), lps.iter().copied()));
        let rel = pc.compile_policy(Some(&sp)).map_err(|e| e.to_string())?;
        let mut all_lps = lps.clone();
        all_lps.push(100);
        for cs in subsets(&comms) {
            for &lp in &all_lps {
                let route = RouteFields { communities: cs.clone(), local_pref: lp };
                let got = pc.image(&rel, &route).map_err(|e| e.to_string())?;
                if got != sp.apply(&route) {
                    return Err(format!("policy {i}: {policy:?} differs at {route:?}"));
                }
                valuations += 1;
            }
        }
    }
    // equality on layouts small enough for full truth tables
    let (mut equal, mut unequal) = (0, 0);
    for i in 0..200 {
        let nc = rng.random_range(0..=5u16);
        let nl = rng.random_range(0..=1usize);
        let comms: Vec<Community> = (1..=nc).map(comm).collect();
        let lps: Vec<u32> = (0..nl).map(|j| 200 + j as u32).collect();
        let layout = VarLayout::new(comms.iter().copied(), lps.iter().copied());
        let nv = layout.num_vars();
        assert!(nv <= 16);
        let mut pc = PolicyCompiler::new(layout);
        let a = random_policy(&mut rng, &comms, &lps);
        let b = if rng.random_bool(0.5) { random_policy(&mut rng, &comms, &lps) } else { equivalent_variant(&a) };
        let ra = pc.compile_policy(Some(&a.specialize(prefix(), Protocol::Bgp))).map_err(|e| e.to_string())?;
        let rb = pc.compile_policy(Some(&b.specialize(prefix(), Protocol::Bgp))).map_err(|e| e.to_string())?;
        let same_table = truth_table(&pc.mgr, ra.bdd, nv) == truth_table(&pc.mgr, rb.bdd, nv);
        if bdd_equal(&ra, &rb).map_err(|e| e.to_string())? != same_table {
            return Err(format!("pair {i}: bdd_equal disagrees with truth tables"));
        }
        if same_table {
            equal += 1;
        } else {
            unequal += 1;
        }
    }
    if equal == 0 || unequal == 0 {
        return Err(format!("pairs not discriminating: {equal} equal, {unequal} unequal"));
    }
    Ok(format!("200 policies, {valuations} valuations; pairs {equal} equal / {unequal} unequal"))
}

/// Rewrites a policy into a semantically equal one: any-of community
/// matches become consecutive clauses and an explicit final deny is added.
fn equivalent_variant(p: &RoutePolicy) -> RoutePolicy {
    let mut clauses = Vec::new();
    for c in &p.clauses {
        match &c.matches.communities {
            Some(list) if list.len() > 1 => {
                for x in list {
                    let mut one = c.clone();
                    one.matches.communities = Some(vec![*x]);
                    clauses.push(one);
                }
            }
            _ => clauses.push(c.clone()),
        }
    }
    clauses.push(Clause::deny());
    RoutePolicy { clauses }
}

fn truth_table(mgr: &BddManager, f: u32, nv: u32) -> Vec<bool> {
    (0..1u32 << nv).map(|m| mgr.eval(f, |v| m >> v & 1 == 1)).collect()
}

fn determinism() -> Outcome {
    let mut all = fixtures();
    for (kind, size) in [(Kind::Fattree, 180), (Kind::Ring, 100), (Kind::Mesh, 50)] {
        all.push((format!("{kind}-{size}"), topo_gen::gen(kind, size, 0).unwrap()));
    }
    let mut files = 0;
    for (name, spec) in &all {
        let run = |jobs| {
            compress_network(spec, &CompressOptions::default(), jobs).map(|r| emit(spec, &r))
        };
        let (a, b) = (run(1).map_err(|e| e.to_string())?, run(8).map_err(|e| e.to_string())?);
        if a != b {
            return Err(format!("{name}: outputs differ between 1 and 8 jobs"));
        }
        files += a.files.len();
    }
    Ok(format!("{} fixtures, {files} files identical", all.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("synthetic compression table", table_8a),
        ("fattree class count", fattree_classes),
        ("local-preference gadget", lp_gadget),
        ("oracle on random networks", oracle_suite),
        ("naive abstraction rejected", naive_gadget_loops),
        ("bounded behaviors", bounded_behaviors),
        ("property preservation", property_preservation),
        ("bdd engine", bdd_engine),
        ("determinism across job counts", determinism),
    ];
    let filter: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if filter.is_some_and(|k| k != i + 1) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = fmt_duration(t.elapsed());
        match outcome {
            Ok(note) => println!("criterion {}: PASS {name} ({note}) [{took}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why}) [{took}]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn fmt_duration(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}
