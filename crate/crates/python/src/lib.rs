//! Python bindings. Networks cross the boundary as JSON documents in the
//! same format the command-line tool reads and writes.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cpcompress::compress::{check_abstraction, compress_classes, emit, CompressOptions, Mapping};
use cpcompress::config::{NetworkSpec, Prefix};
use cpcompress::ecs::{compute_ecs, specialize};
use cpcompress::srp::{NodeId, TieBreak};
use cpcompress::topo_gen;

fn err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse(text: &str) -> PyResult<NetworkSpec> {
    NetworkSpec::parse(text).map_err(err)
}

/// Generates a network spec document.
#[pyfunction]
#[pyo3(signature = (kind, size, seed = 0))]
fn gen(kind: &str, size: usize, seed: u64) -> PyResult<String> {
    let kind: topo_gen::Kind = kind.parse().map_err(err)?;
    Ok(topo_gen::gen(kind, size, seed).map_err(err)?.to_json())
}

/// Node and link counts of a spec.
#[pyfunction]
fn size(spec: &str) -> PyResult<(usize, usize)> {
    let s = parse(spec)?;
    Ok((s.num_nodes(), s.num_links()))
}

/// The destination classes, each as its list of prefixes.
#[pyfunction]
fn classes(spec: &str) -> PyResult<Vec<Vec<String>>> {
    let s = parse(spec)?;
    Ok(compute_ecs(&s)
        .iter()
        .map(|ec| ec.ranges.iter().map(|p| p.to_string()).collect())
        .collect())
}

/// Compresses a spec. Returns the per-class report and the emitted
/// documents keyed by file name.
#[pyfunction]
#[pyo3(signature = (spec, jobs = 1, ec = None, drop_unused_tags = true))]
fn compress(
    py: Python<'_>,
    spec: &str,
    jobs: usize,
    ec: Option<&str>,
    drop_unused_tags: bool,
) -> PyResult<(String, BTreeMap<String, String>)> {
    let s = parse(spec)?;
    let only: Option<Prefix> = ec.map(str::parse).transpose().map_err(err)?;
    let opts = CompressOptions { drop_unused_tags };
    let emission = py.detach(|| {
        compress_classes(&s, &opts, jobs, only).map(|r| emit(&s, &r))
    });
    let emission = emission.map_err(err)?;
    Ok((emission.report, emission.files.into_iter().collect()))
}

/// Outcome of `check`.
#[pyclass(frozen, get_all)]
struct CheckResult {
    passed: bool,
    mode: String,
    violations: Vec<String>,
    /// None when the oracle was skipped.
    equivalent: Option<bool>,
    projected_loop: Option<bool>,
}

#[pymethods]
impl CheckResult {
    fn __repr__(&self) -> String {
        format!(
            "CheckResult(passed={}, mode={}, violations={}, equivalent={:?})",
            self.passed,
            self.mode,
            self.violations.len(),
            self.equivalent
        )
    }
}

/// Checks an abstract network and mapping against a concrete spec.
#[pyfunction]
#[pyo3(signature = (spec, abstract_spec, mapping, oracle_bound = cpcompress::oracle::DEFAULT_BOUND))]
fn check(py: Python<'_>, spec: &str, abstract_spec: &str, mapping: &str, oracle_bound: usize) -> PyResult<CheckResult> {
    let concrete = parse(spec)?;
    let abs = parse(abstract_spec)?;
    let m = Mapping::parse(mapping, &concrete, &abs).map_err(err)?;
    let report = py
        .detach(|| check_abstraction(&concrete, &abs, &m, oracle_bound))
        .map_err(err)?;
    let cx = report.oracle.as_ref().and_then(|v| v.counterexample.as_ref());
    Ok(CheckResult {
        passed: report.passed(),
        mode: format!("{:?}", report.certificate.mode),
        violations: report.certificate.violations.iter().map(|v| v.to_string()).collect(),
        equivalent: report.oracle.as_ref().map(|v| v.equivalent),
        projected_loop: report.oracle.as_ref().map(|_| cx.is_some_and(|c| c.projected_loop)),
    })
}

/// One node of a solution: name, label (None for no route), next hops.
type NodeRow = (String, Option<String>, Vec<String>);

/// Stable solutions for the classes overlapping `prefix`: one simulated
/// solution per destination, or all of them with `enumerate`.
#[pyfunction]
#[pyo3(signature = (spec, prefix, enumerate = false, bound = 12))]
fn simulate(spec: &str, prefix: &str, enumerate: bool, bound: usize) -> PyResult<Vec<Vec<NodeRow>>> {
    let s = parse(spec)?;
    let p: Prefix = prefix.parse().map_err(err)?;
    let mut out = Vec::new();
    for ec in compute_ecs(&s).iter().filter(|ec| ec.overlaps(p)) {
        for net in specialize(&s, ec).map_err(err)? {
            let srp = net.srp();
            let sols = if enumerate {
                srp.enumerate_solutions(bound)
            } else {
                srp.simulate(&TieBreak::lowest_id(s.num_nodes())).map(|x| vec![x])
            }
            .map_err(err)?;
            for sol in sols {
                out.push(
                    (0..s.num_nodes() as u32)
                        .map(NodeId)
                        .map(|u| {
                            (
                                s.name(u).to_string(),
                                sol.label(u).map(|a| a.to_string()),
                                sol.fwd[u.index()].iter().map(|&v| s.name(v).to_string()).collect(),
                            )
                        })
                        .collect(),
                );
            }
        }
    }
    Ok(out)
}

#[pymodule]
#[pyo3(name = "cpcompress")]
fn cpcompress_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<CheckResult>()?;
    m.add_function(wrap_pyfunction!(gen, m)?)?;
    m.add_function(wrap_pyfunction!(size, m)?)?;
    m.add_function(wrap_pyfunction!(classes, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
