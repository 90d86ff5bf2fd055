//! Structure-mapping action selection.
//!
//! A relation set is read as a labeled digraph over blocks. Two graphs are
//! aligned by greedily accruing block correspondences, and the size of the
//! resulting common subgraph (matched edges) is the similarity.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::heuristics::roster_levenshtein;
use crate::qsr::{BlockId, Label, RelationSet};
use crate::scene::Move;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StateGraph {
    /// Sorted block ids; edges refer to positions in this list.
    pub nodes: Vec<BlockId>,
    pub edges: BTreeMap<(usize, usize), Label>,
}

impl StateGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Per node: out-edge labels and in-edge labels, with multiplicity.
    fn degree_labels(&self) -> Vec<(HashMap<Label, usize>, HashMap<Label, usize>)> {
        let mut d = vec![(HashMap::new(), HashMap::new()); self.nodes.len()];
        for (&(a, b), &l) in &self.edges {
            *d[a].0.entry(l).or_insert(0) += 1;
            *d[b].1.entry(l).or_insert(0) += 1;
        }
        d
    }

    /// Isomorphism-invariant node colors from two rounds of label refinement.
    fn signatures(&self) -> Vec<u64> {
        let hash = |v: &dyn Fn(&mut DefaultHasher)| {
            let mut h = DefaultHasher::new();
            v(&mut h);
            h.finish()
        };
        let mut colors = vec![0u64; self.nodes.len()];
        for _ in 0..3 {
            let mut next = Vec::with_capacity(colors.len());
            for (i, c) in colors.iter().enumerate() {
                let mut neigh: Vec<(u8, Label, u64)> = Vec::new();
                for (&(a, b), &l) in &self.edges {
                    if a == i {
                        neigh.push((0, l, colors[b]));
                    }
                    if b == i {
                        neigh.push((1, l, colors[a]));
                    }
                }
                neigh.sort_unstable();
                next.push(hash(&|h| {
                    c.hash(h);
                    neigh.hash(h);
                }));
            }
            colors = next;
        }
        colors
    }
}

/// One labeled edge per ordered related pair (atoms of repeated pairs are merged).
pub fn build_state_graph(rels: &RelationSet) -> StateGraph {
    let nodes: Vec<BlockId> = rels.blocks().into_iter().collect();
    let pos: HashMap<BlockId, usize> = nodes.iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let mut edges = BTreeMap::new();
    for t in rels {
        edges
            .entry((pos[&t.x], pos[&t.y]))
            .and_modify(|l: &mut Label| *l = l.union(t.label))
            .or_insert(t.label);
    }
    StateGraph { nodes, edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSolution {
    pub a: usize,
    pub b: usize,
    pub score: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    /// Injective partial map from g1 blocks to g2 blocks.
    pub correspondences: Vec<(BlockId, BlockId)>,
    pub matched_edges: Vec<(BlockId, BlockId, Label)>,
    pub similarity: f64,
}

impl MappingResult {
    /// Text table of correspondences and matched edges.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "similarity {}", self.similarity);
        for (a, b) in &self.correspondences {
            let _ = writeln!(out, "map {a} -> {b}");
        }
        for (x, y, l) in &self.matched_edges {
            let _ = writeln!(out, "edge {l} {x} {y}");
        }
        out
    }
}

/// Consistent relations supported by mapping node `a` of g1 to `b` of g2:
/// per label, the smaller out-degree plus the smaller in-degree.
fn local_score(
    d1: &(HashMap<Label, usize>, HashMap<Label, usize>),
    d2: &(HashMap<Label, usize>, HashMap<Label, usize>),
) -> usize {
    let side = |x: &HashMap<Label, usize>, y: &HashMap<Label, usize>| -> usize {
        x.iter().map(|(l, n)| (*n).min(y.get(l).copied().unwrap_or(0))).sum()
    };
    side(&d1.0, &d2.0) + side(&d1.1, &d2.1)
}

pub fn local_solutions(g1: &StateGraph, g2: &StateGraph) -> Vec<LocalSolution> {
    let d1 = g1.degree_labels();
    let d2 = g2.degree_labels();
    let mut out = Vec::with_capacity(d1.len() * d2.len());
    for (a, da) in d1.iter().enumerate() {
        for (b, db) in d2.iter().enumerate() {
            out.push(LocalSolution {
                a,
                b,
                score: local_score(da, db),
            });
        }
    }
    out
}

/// Edges of g1 whose endpoints are both mapped onto an equally labeled g2 edge.
fn matched(g1: &StateGraph, g2: &StateGraph, map: &[Option<usize>]) -> Vec<(usize, usize, Label)> {
    g1.edges
        .iter()
        .filter_map(|(&(a, b), &l)| {
            let (ma, mb) = (map[a]?, map[b]?);
            (g2.edges.get(&(ma, mb)) == Some(&l)).then_some((a, b, l))
        })
        .collect()
}

/// Greedy approximate maximal common subgraph.
///
/// Each round accepts the unmapped pair with the largest immediate gain in
/// matched edges, then the largest local score. Remaining ties prefer pairs
/// of structurally equivalent nodes and then the node colors, so the result
/// does not depend on block numbering except between automorphic nodes.
pub fn match_graphs(g1: &StateGraph, g2: &StateGraph) -> MappingResult {
    let locals = local_solutions(g1, g2);
    let s1 = g1.signatures();
    let s2 = g2.signatures();
    let mut map: Vec<Option<usize>> = vec![None; g1.nodes.len()];
    let mut used = vec![false; g2.nodes.len()];
    loop {
        let mut best = None;
        let mut best_key = None;
        for ls in &locals {
            if map[ls.a].is_some() || used[ls.b] {
                continue;
            }
            let gain = g1
                .edges
                .iter()
                .filter(|(&(x, y), &l)| {
                    let (mx, my) = match (x == ls.a, y == ls.a) {
                        (true, false) => (Some(ls.b), map[y]),
                        (false, true) => (map[x], Some(ls.b)),
                        _ => return false,
                    };
                    matches!((mx, my), (Some(p), Some(q)) if g2.edges.get(&(p, q)) == Some(&l))
                })
                .count();
            if gain == 0 && ls.score == 0 {
                continue;
            }
            let key = (gain, ls.score, s1[ls.a] == s2[ls.b], u64::MAX - s1[ls.a], u64::MAX - s2[ls.b]);
            if best_key.is_none_or(|k| key > k) {
                best_key = Some(key);
                best = Some((ls.a, ls.b));
            }
        }
        let Some((a, b)) = best else { break };
        map[a] = Some(b);
        used[b] = true;
    }
    let edges = matched(g1, g2, &map);
    MappingResult {
        correspondences: map
            .iter()
            .enumerate()
            .filter_map(|(a, m)| m.map(|b| (g1.nodes[a], g2.nodes[b])))
            .collect(),
        similarity: edges.len() as f64,
        matched_edges: edges
            .into_iter()
            .map(|(a, b, l)| (g1.nodes[a], g1.nodes[b], l))
            .collect(),
    }
}

/// Similarity of each option's state graph to the goal graph.
pub fn option_similarities(options: &[(Move, RelationSet)], goal: &RelationSet) -> Vec<f64> {
    let gg = build_state_graph(goal);
    options
        .iter()
        .map(|(_, rels)| match_graphs(&build_state_graph(rels), &gg).similarity)
        .collect()
}

/// Index of the option whose post-move state graph best matches the goal;
/// ties go to the earliest option.
pub fn select_action(options: &[(Move, RelationSet)], goal: &RelationSet) -> Result<usize> {
    if options.is_empty() {
        return Err(Error::NoOptions);
    }
    let sims = option_similarities(options, goal);
    let mut best = 0;
    for (i, s) in sims.iter().enumerate() {
        if *s > sims[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Indices of the options kept by pruning: per move relation, those whose
/// post-move set is Levenshtein-closest to `example` (tokens in roster order).
pub fn prune(options: &[(Move, RelationSet)], example: &RelationSet, roster: &[BlockId]) -> Vec<usize> {
    let dists: Vec<usize> = options.iter().map(|(_, r)| roster_levenshtein(r, example, roster)).collect();
    let mut best = BTreeMap::new();
    for ((mv, _), d) in options.iter().zip(&dists) {
        best.entry(mv.relation)
            .and_modify(|b: &mut usize| *b = (*b).min(*d))
            .or_insert(*d);
    }
    (0..options.len())
        .filter(|i| dists[*i] == best[&options[*i].0.relation])
        .collect()
}

/// [`prune`], then [`select_action`] over the survivors. Returns an index
/// into `options`.
pub fn prune_then_select(
    options: &[(Move, RelationSet)],
    example: &RelationSet,
    goal: &RelationSet,
    roster: &[BlockId],
) -> Result<usize> {
    if options.is_empty() {
        return Err(Error::NoOptions);
    }
    let keep = prune(options, example, roster);
    let survivors: Vec<(Move, RelationSet)> = keep.iter().map(|i| options[*i].clone()).collect();
    Ok(keep[select_action(&survivors, goal)?])
}
