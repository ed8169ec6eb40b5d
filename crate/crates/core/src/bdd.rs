//! Reduced ordered binary decision diagrams with hash-consing, so two
//! functions are equal exactly when their ids are equal.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

pub type BddId = u32;

pub const FALSE: BddId = 0;
pub const TRUE: BddId = 1;

const TERMINAL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    lo: BddId,
    hi: BddId,
}

#[derive(Debug, Clone)]
pub struct BddManager {
    nodes: Vec<Node>,
    unique: HashMap<Node, BddId>,
    ite_cache: HashMap<(BddId, BddId, BddId), BddId>,
}

impl Default for BddManager {
    fn default() -> Self {
        Self::new()
    }
}

impl BddManager {
    pub fn new() -> Self {
        let t = Node { var: TERMINAL, lo: 0, hi: 0 };
        BddManager {
            nodes: vec![t, Node { hi: 1, lo: 1, ..t }],
            unique: HashMap::new(),
            ite_cache: HashMap::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn mk(&mut self, var: u32, lo: BddId, hi: BddId) -> BddId {
        if lo == hi {
            return lo;
        }
        let node = Node { var, lo, hi };
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = self.nodes.len() as BddId;
        self.nodes.push(node);
        self.unique.insert(node, id);
        id
    }

    fn var_of(&self, f: BddId) -> u32 {
        self.nodes[f as usize].var
    }

    pub fn var(&mut self, v: u32) -> BddId {
        self.mk(v, FALSE, TRUE)
    }

    pub fn constant(&self, b: bool) -> BddId {
        if b {
            TRUE
        } else {
            FALSE
        }
    }

    fn cofactors(&self, f: BddId, var: u32) -> (BddId, BddId) {
        let n = self.nodes[f as usize];
        if n.var == var {
            (n.lo, n.hi)
        } else {
            (f, f)
        }
    }

    pub fn ite(&mut self, f: BddId, g: BddId, h: BddId) -> BddId {
        if f == TRUE {
            return g;
        }
        if f == FALSE {
            return h;
        }
        if g == h {
            return g;
        }
        if g == TRUE && h == FALSE {
            return f;
        }
        if let Some(&r) = self.ite_cache.get(&(f, g, h)) {
            return r;
        }
        let top = self.var_of(f).min(self.var_of(g)).min(self.var_of(h));
        let (f0, f1) = self.cofactors(f, top);
        let (g0, g1) = self.cofactors(g, top);
        let (h0, h1) = self.cofactors(h, top);
        let lo = self.ite(f0, g0, h0);
        let hi = self.ite(f1, g1, h1);
        let r = self.mk(top, lo, hi);
        self.ite_cache.insert((f, g, h), r);
        r
    }

    pub fn not(&mut self, f: BddId) -> BddId {
        self.ite(f, FALSE, TRUE)
    }

    pub fn and(&mut self, f: BddId, g: BddId) -> BddId {
        self.ite(f, g, FALSE)
    }

    pub fn or(&mut self, f: BddId, g: BddId) -> BddId {
        self.ite(f, TRUE, g)
    }

    pub fn iff(&mut self, f: BddId, g: BddId) -> BddId {
        let ng = self.not(g);
        self.ite(f, g, ng)
    }

    /// Cofactor of `f` under a partial assignment.
    pub fn restrict(&mut self, f: BddId, assignment: &[(u32, bool)]) -> BddId {
        let map: HashMap<u32, bool> = assignment.iter().copied().collect();
        let mut memo = HashMap::new();
        self.restrict_rec(f, &map, &mut memo)
    }

    fn restrict_rec(&mut self, f: BddId, map: &HashMap<u32, bool>, memo: &mut HashMap<BddId, BddId>) -> BddId {
        if f <= TRUE {
            return f;
        }
        if let Some(&r) = memo.get(&f) {
            return r;
        }
        let n = self.nodes[f as usize];
        let r = match map.get(&n.var) {
            Some(true) => self.restrict_rec(n.hi, map, memo),
            Some(false) => self.restrict_rec(n.lo, map, memo),
            None => {
                let lo = self.restrict_rec(n.lo, map, memo);
                let hi = self.restrict_rec(n.hi, map, memo);
                self.mk(n.var, lo, hi)
            }
        };
        memo.insert(f, r);
        r
    }

    /// Existential quantification over `vars`.
    pub fn exists(&mut self, f: BddId, vars: &BTreeSet<u32>) -> BddId {
        let mut memo = HashMap::new();
        self.exists_rec(f, vars, &mut memo)
    }

    fn exists_rec(&mut self, f: BddId, vars: &BTreeSet<u32>, memo: &mut HashMap<BddId, BddId>) -> BddId {
        if f <= TRUE {
            return f;
        }
        if let Some(&r) = memo.get(&f) {
            return r;
        }
        let n = self.nodes[f as usize];
        let lo = self.exists_rec(n.lo, vars, memo);
        let hi = self.exists_rec(n.hi, vars, memo);
        let r = if vars.contains(&n.var) {
            self.or(lo, hi)
        } else {
            self.mk(n.var, lo, hi)
        };
        memo.insert(f, r);
        r
    }

    /// Evaluates `f`; `value(v)` gives the value of variable `v`.
    pub fn eval(&self, f: BddId, value: impl Fn(u32) -> bool) -> bool {
        let mut cur = f;
        while cur > TRUE {
            let n = self.nodes[cur as usize];
            cur = if value(n.var) { n.hi } else { n.lo };
        }
        cur == TRUE
    }

    /// Variables `f` depends on.
    pub fn support(&self, f: BddId) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![f];
        while let Some(g) = stack.pop() {
            if g <= TRUE || !seen.insert(g) {
                continue;
            }
            let n = self.nodes[g as usize];
            out.insert(n.var);
            stack.push(n.lo);
            stack.push(n.hi);
        }
        out
    }

    /// Graphviz rendering; `name` labels variables.
    pub fn to_dot(&self, f: BddId, name: impl Fn(u32) -> String) -> String {
        let mut out = String::from("digraph bdd {\n  t0 [shape=box,label=\"0\"];\n  t1 [shape=box,label=\"1\"];\n");
        let id = |g: BddId| if g <= TRUE { format!("t{g}") } else { format!("n{g}") };
        let mut seen = BTreeSet::new();
        let mut stack = vec![f];
        while let Some(g) = stack.pop() {
            if g <= TRUE || !seen.insert(g) {
                continue;
            }
            let n = self.nodes[g as usize];
            let _ = writeln!(out, "  n{g} [label=\"{}\"];", name(n.var));
            let _ = writeln!(out, "  n{g} -> {} [style=dashed];", id(n.lo));
            let _ = writeln!(out, "  n{g} -> {};", id(n.hi));
            stack.push(n.lo);
            stack.push(n.hi);
        }
        out.push_str("}\n");
        out
    }
}
