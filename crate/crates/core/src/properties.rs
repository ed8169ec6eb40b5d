//! Forwarding properties evaluated on a stable solution. Targets are node
//! sets so the same query can be asked of a concrete network (with the
//! block members of an abstract node) and of its abstraction.

use std::collections::BTreeSet;

use crate::srp::{NodeId, Solution};

fn successors(sol: &Solution, u: NodeId) -> &[NodeId] {
    &sol.fwd[u.index()]
}

/// Nodes reachable from `u` along fwd edges, not expanding past `stop`.
fn reach_set(sol: &Solution, u: NodeId, stop: &dyn Fn(NodeId) -> bool) -> Vec<bool> {
    let mut seen = vec![false; sol.fwd.len()];
    let mut stack = vec![u];
    seen[u.index()] = true;
    while let Some(x) = stack.pop() {
        if stop(x) {
            continue;
        }
        for &y in successors(sol, x) {
            if !seen[y.index()] {
                seen[y.index()] = true;
                stack.push(y);
            }
        }
    }
    seen
}

/// Some fwd path leads from `u` into `targets`.
pub fn reachability(sol: &Solution, u: NodeId, targets: &[NodeId]) -> bool {
    let seen = reach_set(sol, u, &|x| targets.contains(&x));
    targets.iter().any(|t| seen[t.index()])
}

/// Lengths of all loop-free fwd paths from `u` that end at their first
/// node in `targets`.
pub fn path_lengths(sol: &Solution, u: NodeId, targets: &[NodeId]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut on_path = vec![false; sol.fwd.len()];
    let mut memo: Vec<Option<BTreeSet<usize>>> = vec![None; sol.fwd.len()];
    if has_loop_from(sol, u, targets) {
        simple_paths(sol, u, targets, 0, &mut on_path, &mut out);
    } else {
        out = dag_lengths(sol, u, targets, &mut memo);
    }
    out
}

fn dag_lengths(
    sol: &Solution,
    u: NodeId,
    targets: &[NodeId],
    memo: &mut Vec<Option<BTreeSet<usize>>>,
) -> BTreeSet<usize> {
    if targets.contains(&u) {
        return BTreeSet::from([0]);
    }
    if let Some(s) = &memo[u.index()] {
        return s.clone();
    }
    let mut out = BTreeSet::new();
    for &v in successors(sol, u) {
        out.extend(dag_lengths(sol, v, targets, memo).into_iter().map(|l| l + 1));
    }
    memo[u.index()] = Some(out.clone());
    out
}

fn simple_paths(
    sol: &Solution,
    u: NodeId,
    targets: &[NodeId],
    depth: usize,
    on_path: &mut Vec<bool>,
    out: &mut BTreeSet<usize>,
) {
    if targets.contains(&u) {
        out.insert(depth);
        return;
    }
    on_path[u.index()] = true;
    for &v in successors(sol, u) {
        if !on_path[v.index()] {
            simple_paths(sol, v, targets, depth + 1, on_path, out);
        }
    }
    on_path[u.index()] = false;
}

fn has_loop_from(sol: &Solution, u: NodeId, stop: &[NodeId]) -> bool {
    let seen = reach_set(sol, u, &|x| stop.contains(&x));
    cycle_among(sol, &|x| seen[x.index()] && !stop.contains(&x))
}

/// Some fwd path from `u` ends at a node without a route before reaching
/// `targets`.
pub fn has_black_hole(sol: &Solution, u: NodeId, targets: &[NodeId]) -> bool {
    let seen = reach_set(sol, u, &|x| targets.contains(&x));
    (0..seen.len()).any(|x| seen[x] && !targets.contains(&NodeId(x as u32)) && sol.labels[x].is_none())
}

/// Not the case that `u` reaches `targets` along one path and is dropped
/// along another.
pub fn multipath_consistent(sol: &Solution, u: NodeId, targets: &[NodeId]) -> bool {
    !(reachability(sol, u, targets) && has_black_hole(sol, u, targets))
}

/// Every fwd path from `u` into `targets` passes through `waypoints`.
pub fn waypointed(sol: &Solution, u: NodeId, targets: &[NodeId], waypoints: &[NodeId]) -> bool {
    if waypoints.contains(&u) {
        return true;
    }
    let seen = reach_set(sol, u, &|x| targets.contains(&x) || waypoints.contains(&x));
    !targets.iter().any(|t| seen[t.index()] && !waypoints.contains(t))
}

/// The fwd graph has a cycle.
pub fn has_routing_loop(sol: &Solution) -> bool {
    cycle_among(sol, &|_| true)
}

fn cycle_among(sol: &Solution, keep: &dyn Fn(NodeId) -> bool) -> bool {
    let n = sol.fwd.len();
    let mut state = vec![0u8; n];
    for s in 0..n {
        if state[s] != 0 || !keep(NodeId(s as u32)) {
            continue;
        }
        // iterative DFS: (node, next successor index)
        let mut stack = vec![(s, 0usize)];
        state[s] = 1;
        while let Some(&(x, i)) = stack.last() {
            let succ = &sol.fwd[x];
            if i < succ.len() {
                stack.last_mut().unwrap().1 += 1;
                let y = succ[i].index();
                if !keep(NodeId(y as u32)) {
                    continue;
                }
                match state[y] {
                    1 => return true,
                    0 => {
                        state[y] = 1;
                        stack.push((y, 0));
                    }
                    _ => {}
                }
            } else {
                state[x] = 2;
                stack.pop();
            }
        }
    }
    false
}

/// The six property verdicts for one source, target set and waypoint set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdicts {
    pub reachable: bool,
    pub path_lengths: BTreeSet<usize>,
    pub black_hole: bool,
    pub multipath_consistent: bool,
    pub waypointed: bool,
    pub routing_loop: bool,
}

pub fn evaluate(sol: &Solution, u: NodeId, targets: &[NodeId], waypoints: &[NodeId]) -> Verdicts {
    Verdicts {
        reachable: reachability(sol, u, targets),
        path_lengths: path_lengths(sol, u, targets),
        black_hole: has_black_hole(sol, u, targets),
        multipath_consistent: multipath_consistent(sol, u, targets),
        waypointed: waypointed(sol, u, targets, waypoints),
        routing_loop: has_routing_loop(sol),
    }
}
