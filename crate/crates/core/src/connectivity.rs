//! Interaction graph over the unknown transforms, the calibratability test,
//! and reference pattern/time selection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write;

use crate::dataset::FoundationalRelationship;
use crate::error::{Error, Result};

/// Kind of an unknown transform. The derived order `Camera < Pattern < Time`
/// is the tie-break order used by the initialization schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariableKind {
    Camera,
    Pattern,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariableId {
    pub kind: VariableKind,
    pub index: u32,
}

impl VariableId {
    pub const fn camera(index: u32) -> Self {
        Self {
            kind: VariableKind::Camera,
            index,
        }
    }

    pub const fn pattern(index: u32) -> Self {
        Self {
            kind: VariableKind::Pattern,
            index,
        }
    }

    pub const fn time(index: u32) -> Self {
        Self {
            kind: VariableKind::Time,
            index,
        }
    }

    /// `C3`, `P0`, `T12`.
    pub fn parse(s: &str) -> Option<Self> {
        let (head, tail) = s.split_at(s.char_indices().nth(1).map_or(s.len(), |(i, _)| i));
        let index = tail.parse().ok()?;
        match head {
            "C" => Some(Self::camera(index)),
            "P" => Some(Self::pattern(index)),
            "T" => Some(Self::time(index)),
            _ => None,
        }
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            VariableKind::Camera => 'C',
            VariableKind::Pattern => 'P',
            VariableKind::Time => 'T',
        };
        write!(f, "{tag}{}", self.index)
    }
}

/// The three variables of one relationship, in kind order.
pub fn fr_variables(fr: &FoundationalRelationship) -> [VariableId; 3] {
    [
        VariableId::camera(fr.camera),
        VariableId::pattern(fr.pattern),
        VariableId::time(fr.time),
    ]
}

/// Undirected graph whose edges carry the number of supporting relationships.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionGraph {
    pub nodes: BTreeSet<VariableId>,
    /// Keyed by `(smaller, larger)` endpoint.
    pub edges: BTreeMap<(VariableId, VariableId), usize>,
}

impl InteractionGraph {
    pub fn neighbors(&self, v: VariableId) -> impl Iterator<Item = VariableId> + '_ {
        self.edges.keys().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Graphviz rendering; nodes are grouped by kind.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph interaction {\n");
        for v in &self.nodes {
            let shape = match v.kind {
                VariableKind::Camera => "box",
                VariableKind::Pattern => "diamond",
                VariableKind::Time => "ellipse",
            };
            let _ = writeln!(out, "  {v} [shape={shape}];");
        }
        for (&(a, b), &count) in &self.edges {
            let _ = writeln!(out, "  {a} -- {b} [label=\"{count}\"];");
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_interaction_graph(frs: &[FoundationalRelationship]) -> Result<InteractionGraph> {
    if frs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut g = InteractionGraph::default();
    for fr in frs {
        let vars = fr_variables(fr);
        g.nodes.extend(vars);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            *g.edges.entry((vars[i], vars[j])).or_insert(0) += 1;
        }
    }
    Ok(g)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: alloc::vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Component labels numbered `0..count` in order of each component's
/// smallest variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub labels: BTreeMap<VariableId, usize>,
    pub count: usize,
}

impl Components {
    pub fn is_calibratable(&self) -> bool {
        self.count == 1
    }

    pub fn members(&self, component: usize) -> Vec<VariableId> {
        self.labels
            .iter()
            .filter(|(_, &c)| c == component)
            .map(|(&v, _)| v)
            .collect()
    }
}

pub fn connected_components(g: &InteractionGraph) -> Components {
    let index: BTreeMap<VariableId, usize> =
        g.nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut uf = UnionFind::new(index.len());
    for &(a, b) in g.edges.keys() {
        uf.union(index[&a], index[&b]);
    }
    let mut root_label = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for (&v, &i) in &index {
        let root = uf.find(i);
        let next = root_label.len();
        let label = *root_label.entry(root).or_insert(next);
        labels.insert(v, label);
    }
    Components {
        count: root_label.len(),
        labels,
    }
}

/// Splits relationships by connected component (in label order).
pub fn partition_by_component(
    frs: &[FoundationalRelationship],
) -> Result<Vec<Vec<FoundationalRelationship>>> {
    let g = build_interaction_graph(frs)?;
    let comps = connected_components(&g);
    let mut parts = alloc::vec![Vec::new(); comps.count];
    for fr in frs {
        parts[comps.labels[&VariableId::camera(fr.camera)]].push(fr.clone());
    }
    Ok(parts)
}

/// The gauge-fixing pair `(p*, t*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reference {
    pub pattern: u32,
    pub time: u32,
}

/// `p*` is the most observed pattern; `t*` is, among the times at which `p*`
/// is seen by any camera, the one with the most observations overall.
/// Ties go to the smallest index.
pub fn select_reference(frs: &[FoundationalRelationship]) -> Result<Reference> {
    if frs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut per_pattern: BTreeMap<u32, usize> = BTreeMap::new();
    let mut per_time: BTreeMap<u32, usize> = BTreeMap::new();
    for fr in frs {
        *per_pattern.entry(fr.pattern).or_default() += 1;
        *per_time.entry(fr.time).or_default() += 1;
    }
    let pattern = argmax_smallest(per_pattern.iter().map(|(&k, &v)| (k, v)));
    let times_with_pattern: BTreeSet<u32> = frs
        .iter()
        .filter(|f| f.pattern == pattern)
        .map(|f| f.time)
        .collect();
    let time = argmax_smallest(times_with_pattern.iter().map(|t| (*t, per_time[t])));
    Ok(Reference { pattern, time })
}

/// Ascending-key iteration, so strict `>` keeps the smallest key on ties.
fn argmax_smallest(items: impl Iterator<Item = (u32, usize)>) -> u32 {
    let mut best: Option<(u32, usize)> = None;
    for (k, v) in items {
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::fr;
    use alloc::vec;

    #[test]
    fn single_fr_triangle() {
        let g = build_interaction_graph(&[fr(0, 0, 0)]).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(connected_components(&g).count, 1);
        assert_eq!(select_reference(&[fr(0, 0, 0)]).unwrap(), Reference { pattern: 0, time: 0 });
    }

    #[test]
    fn toy_scenario() {
        let frs = vec![fr(0, 0, 0), fr(0, 0, 1), fr(0, 1, 1), fr(1, 1, 1)];
        let g = build_interaction_graph(&frs).unwrap();
        assert_eq!(g.nodes.len(), 6);
        // C0-P0, C0-T0, P0-T0, C0-T1, P0-T1, C0-P1, P1-T1, C1-P1, C1-T1
        assert_eq!(g.edges.len(), 9);
        assert_eq!(g.edges[&(VariableId::camera(0), VariableId::time(1))], 2);
        assert_eq!(connected_components(&g).count, 1);
        assert_eq!(select_reference(&frs).unwrap(), Reference { pattern: 0, time: 1 });
    }

    #[test]
    fn disjoint_sets_give_two_components() {
        let frs = vec![fr(0, 0, 0), fr(1, 1, 1)];
        let comps = connected_components(&build_interaction_graph(&frs).unwrap());
        assert_eq!(comps.count, 2);
        assert!(!comps.is_calibratable());
        assert_eq!(partition_by_component(&frs).unwrap().len(), 2);
    }

    #[test]
    fn empty_input() {
        assert_eq!(build_interaction_graph(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn variable_order_and_parse() {
        assert!(VariableId::camera(9) < VariableId::pattern(0));
        assert!(VariableId::pattern(9) < VariableId::time(0));
        assert!(VariableId::time(1) < VariableId::time(2));
        assert_eq!(VariableId::parse("T12"), Some(VariableId::time(12)));
        assert_eq!(VariableId::parse("X1"), None);
        assert_eq!(alloc::format!("{}", VariableId::pattern(3)), "P3");
    }

    #[test]
    fn dot_lists_every_edge() {
        let g = build_interaction_graph(&[fr(0, 0, 0)]).unwrap();
        let dot = g.to_dot();
        assert!(dot.contains("C0 -- P0"));
        assert!(dot.contains("P0 -- T0"));
    }
}
