use std::collections::{BTreeSet, HashMap};

use crate::srp::NodeId;

/// Mutable node partition. Block ids are stable: when a block splits, its
/// largest fragment keeps the id and the others are appended.
#[derive(Clone, Debug)]
pub struct Partition {
    block_of: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl Partition {
    /// `{dest}` and everything else.
    pub fn initial(num_nodes: usize, dest: NodeId) -> Self {
        let mut p = Partition { block_of: vec![0; num_nodes], members: vec![vec![dest.0]] };
        let rest: Vec<u32> = (0..num_nodes as u32).filter(|&u| u != dest.0).collect();
        if !rest.is_empty() {
            for &u in &rest {
                p.block_of[u as usize] = 1;
            }
            p.members.push(rest);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn block(&self, u: u32) -> u32 {
        self.block_of[u as usize]
    }

    pub fn members(&self, b: usize) -> &[u32] {
        &self.members[b]
    }

    /// Splits block `b` by `key`; returns true if it actually split.
    pub fn split_by<K: std::hash::Hash + Eq>(&mut self, b: usize, key: impl Fn(u32) -> K) -> bool {
        let mut groups: HashMap<K, Vec<u32>> = HashMap::new();
        for &u in &self.members[b] {
            groups.entry(key(u)).or_default().push(u);
        }
        if groups.len() <= 1 {
            return false;
        }
        let mut groups: Vec<Vec<u32>> = groups.into_values().collect();
        groups.sort_by_key(|g| g[0]);
        let keeper = groups
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
            .map(|(i, _)| i)
            .unwrap();
        for (i, g) in groups.into_iter().enumerate() {
            if i == keeper {
                self.members[b] = g;
            } else {
                let id = self.members.len() as u32;
                for &u in &g {
                    self.block_of[u as usize] = id;
                }
                self.members.push(g);
            }
        }
        true
    }

    /// Blocks ordered by their lowest member, with each block's members.
    pub fn canonical(&self) -> (Vec<u32>, Vec<Vec<NodeId>>) {
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.sort_by_key(|&b| self.members[b].iter().min().copied());
        let mut renumber = vec![0u32; self.members.len()];
        let mut blocks = Vec::with_capacity(order.len());
        for (new, &old) in order.iter().enumerate() {
            renumber[old] = new as u32;
            let set: BTreeSet<u32> = self.members[old].iter().copied().collect();
            blocks.push(set.into_iter().map(NodeId).collect());
        }
        let block_of = self.block_of.iter().map(|&b| renumber[b as usize]).collect();
        (block_of, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_fragment_keeps_its_id() {
        let mut p = Partition::initial(6, NodeId(0));
        assert_eq!(p.len(), 2);
        assert!(p.split_by(1, |u| u == 5));
        assert_eq!(p.members(1), &[1, 2, 3, 4]);
        assert_eq!(p.members(2), &[5]);
        assert!(!p.split_by(1, |_| 0));
        let (block_of, blocks) = p.canonical();
        assert_eq!(block_of, vec![0, 1, 1, 1, 1, 2]);
        assert_eq!(blocks[2], vec![NodeId(5)]);
    }
}
