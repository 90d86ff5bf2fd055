//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use blockstair::graphmatch::StateGraph;
use blockstair::qsr::{Atom, BlockId, Label, RelTriple, RelationSet};
use rand::Rng;

pub const LABELS: [Label; 7] = [
    Label::LEFT,
    Label::RIGHT,
    Label::TOUCHING,
    Label::UNDER,
    Label::LEFT_TOUCHING,
    Label::RIGHT_TOUCHING,
    Label::UNDER_TOUCHING_SUPPORT,
];

/// Up to `max_triples` random triples over blocks `1..=blocks`, drawn from `labels`.
pub fn random_set<R: Rng>(rng: &mut R, labels: &[Label], blocks: u16, max_triples: usize) -> RelationSet {
    let n = rng.gen_range(0..=max_triples);
    (0..n)
        .filter_map(|_| {
            let x = rng.gen_range(1..=blocks);
            let y = rng.gen_range(1..=blocks);
            RelTriple::new(labels[rng.gen_range(0..labels.len())], BlockId(x), BlockId(y)).ok()
        })
        .collect()
}

pub type Fact = (Atom, u16, u16);

/// Applies each axiom to every pair of facts until nothing new appears.
pub fn fixpoint_oracle(rels: &RelationSet) -> Option<BTreeMap<(u16, u16), BTreeSet<Atom>>> {
    let mut facts: BTreeSet<Fact> = BTreeSet::new();
    for t in rels {
        for a in t.label.atoms() {
            facts.insert((a, t.x.0, t.y.0));
        }
    }
    loop {
        let mut new: Vec<Fact> = Vec::new();
        for &(a, x, y) in &facts {
            match a {
                Atom::Support => {
                    new.push((Atom::Under, x, y));
                    new.push((Atom::Touching, x, y));
                }
                Atom::Left => new.push((Atom::Right, y, x)),
                Atom::Right => new.push((Atom::Left, y, x)),
                Atom::Touching => new.push((Atom::Touching, y, x)),
                Atom::Under => {}
            }
            for &(b, y2, z) in &facts {
                if y2 != y || z == x {
                    continue;
                }
                match (a, b) {
                    (Atom::Left, Atom::Left) => new.push((Atom::Left, x, z)),
                    (Atom::Right, Atom::Right) => new.push((Atom::Right, x, z)),
                    (Atom::Support, Atom::Support) | (Atom::Under, Atom::Support) => new.push((Atom::Under, x, z)),
                    _ => {}
                }
            }
        }
        let before = facts.len();
        facts.extend(new);
        if facts.len() == before {
            break;
        }
    }
    let mut out: BTreeMap<(u16, u16), BTreeSet<Atom>> = BTreeMap::new();
    for (a, x, y) in facts {
        out.entry((x, y)).or_default().insert(a);
    }
    if out.values().any(|s| s.contains(&Atom::Left) && s.contains(&Atom::Right)) {
        return None;
    }
    Some(out)
}

pub fn as_map(rels: &RelationSet) -> BTreeMap<(u16, u16), BTreeSet<Atom>> {
    let mut out: BTreeMap<(u16, u16), BTreeSet<Atom>> = BTreeMap::new();
    for t in rels {
        out.entry((t.x.0, t.y.0)).or_default().extend(t.label.atoms());
    }
    out
}

/// Full DP table, filled row by row from the textbook recurrence.
pub fn dp_oracle(a: &[String], b: &[String]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn alphabetical(rels: &RelationSet) -> Vec<String> {
    let mut t: Vec<String> = rels.iter().map(|t| format!("{}({},{})", t.label, t.x, t.y)).collect();
    t.sort();
    t
}

pub fn jaccard_by_definition(a: &RelationSet, b: &RelationSet) -> f64 {
    let sa: HashSet<String> = a.tokens().into_iter().collect();
    let sb: HashSet<String> = b.tokens().into_iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        0.0
    } else {
        1.0 - sa.intersection(&sb).count() as f64 / union as f64
    }
}

/// Largest matched-edge count over every injective partial map g1 -> g2.
pub fn exact_mcs(g1: &StateGraph, g2: &StateGraph) -> usize {
    fn rec(i: usize, g1: &StateGraph, g2: &StateGraph, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>) -> usize {
        if i == g1.nodes.len() {
            return g1
                .edges
                .iter()
                .filter(|(&(a, b), &l)| match (map[a], map[b]) {
                    (Some(p), Some(q)) => g2.edges.get(&(p, q)) == Some(&l),
                    _ => false,
                })
                .count();
        }
        map.push(None);
        let mut best = rec(i + 1, g1, g2, map, used);
        for j in 0..g2.nodes.len() {
            if !used[j] {
                used[j] = true;
                map[i] = Some(j);
                best = best.max(rec(i + 1, g1, g2, map, used));
                used[j] = false;
            }
        }
        map.pop();
        best
    }
    rec(0, g1, g2, &mut Vec::new(), &mut vec![false; g2.nodes.len()])
}

