use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowPair;
use crate::error::{Error, Result};
use crate::qsr::{closure, BlockId, Label, RelTriple, RelationSet};
use crate::scene::{Move, MoveRelation, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeuristicKind {
    Chance,
    Jaccard,
    Levenshtein,
    GraphMatch,
    /// Levenshtein-pruned graph matching.
    Combined,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 5] = [
        HeuristicKind::Chance,
        HeuristicKind::Jaccard,
        HeuristicKind::Levenshtein,
        HeuristicKind::GraphMatch,
        HeuristicKind::Combined,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            HeuristicKind::Chance => "chance",
            HeuristicKind::Jaccard => "jd",
            HeuristicKind::Levenshtein => "ld",
            HeuristicKind::GraphMatch => "gm",
            HeuristicKind::Combined => "comb",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .ok_or_else(|| Error::UnknownLabel(format!("heuristic `{s}`")))
    }
}

/// `1 - |A ∩ B| / |A ∪ B|` over token sets; 0 when both are empty.
pub fn jaccard_distance(a: &RelationSet, b: &RelationSet) -> f64 {
    let ta: BTreeSet<String> = a.tokens().into_iter().collect();
    let tb: BTreeSet<String> = b.tokens().into_iter().collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - ta.intersection(&tb).count() as f64 / union as f64
}

/// Token list sorted byte-wise, duplicates kept.
pub fn sorted_tokens(rels: &RelationSet) -> Vec<String> {
    let mut t = rels.tokens();
    t.sort_unstable();
    t
}

/// Unit-cost edit distance between two sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance between the alphabetically sorted token lists.
pub fn levenshtein_distance(a: &RelationSet, b: &RelationSet) -> usize {
    edit_distance(&sorted_tokens(a), &sorted_tokens(b))
}

/// Token list in roster order.
pub fn roster_tokens(rels: &RelationSet, roster: &[BlockId]) -> Vec<String> {
    rels.ordered_by(roster).iter().map(RelTriple::token).collect()
}

/// Edit distance between the token lists in roster order. Unlike
/// [`levenshtein_distance`] this does not depend on how blocks are numbered.
pub fn roster_levenshtein(a: &RelationSet, b: &RelationSet, roster: &[BlockId]) -> usize {
    edit_distance(&roster_tokens(a, roster), &roster_tokens(b, roster))
}

/// Uniformly random unplaced block, then a uniformly random legal
/// `(relation, target)` placement for it.
pub fn chance_move<R: Rng>(scene: &Scene, roster: &[BlockId], rng: &mut R) -> Result<Move> {
    let unplaced: Vec<BlockId> = roster.iter().copied().filter(|b| !scene.is_placed(*b)).collect();
    if unplaced.is_empty() {
        return Err(Error::NoLegalMove);
    }
    let subject = unplaced[rng.gen_range(0..unplaced.len())];
    let rank = |b: &BlockId| roster.iter().position(|r| r == b).unwrap_or(usize::MAX);
    let mut legal: Vec<(MoveRelation, BlockId)> = MoveRelation::ALL
        .into_iter()
        .flat_map(|r| scene.legal_targets(r).into_iter().map(move |t| (r, t)))
        .collect();
    legal.sort_by_key(|(r, t)| (*r, rank(t)));
    if legal.is_empty() {
        return Err(Error::NoLegalMove);
    }
    let (relation, target) = legal[rng.gen_range(0..legal.len())];
    Ok(Move::new(subject, relation, target))
}

/// Training windows prepared for repeated nearest-window lookups.
///
/// Tokens are interned to integers in roster order, so equality (all the
/// edit distance needs) is an integer comparison.
#[derive(Debug, Clone)]
pub struct WindowIndex {
    pairs: Vec<WindowPair>,
    /// Per pair: sorted interned tokens.
    keys: Vec<Vec<u32>>,
    /// Pair indices in tie-break order (example id, window in roster order).
    order: Vec<usize>,
    intern: HashMap<String, u32>,
    roster: Vec<BlockId>,
}

impl WindowIndex {
    pub fn new(pairs: Vec<WindowPair>, roster: &[BlockId]) -> WindowIndex {
        let mut intern = HashMap::new();
        let keys = pairs
            .iter()
            .map(|p| {
                roster_tokens(&RelationSet::from_triples(p.window.clone()), roster)
                    .into_iter()
                    .map(|tok| {
                        let next = intern.len() as u32;
                        *intern.entry(tok).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        let rank = |b: BlockId| roster.iter().position(|r| *r == b).unwrap_or(usize::MAX);
        let sort_keys: Vec<Vec<(usize, usize, Label)>> = pairs
            .iter()
            .map(|p| {
                RelationSet::from_triples(p.window.clone())
                    .ordered_by(roster)
                    .iter()
                    .map(|t| (rank(t.x), rank(t.y), t.label))
                    .collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|a, b| {
            pairs[*a]
                .example
                .cmp(&pairs[*b].example)
                .then_with(|| sort_keys[*a].cmp(&sort_keys[*b]))
        });
        WindowIndex {
            pairs,
            keys,
            order,
            intern,
            roster: roster.to_vec(),
        }
    }

    pub fn pairs(&self) -> &[WindowPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn key_of(&self, rels: &RelationSet) -> Vec<u32> {
        roster_tokens(rels, &self.roster)
            .into_iter()
            .map(|t| self.intern.get(&t).copied().unwrap_or(u32::MAX))
            .collect()
    }

    /// The window nearest to `current` in Levenshtein distance; ties go to
    /// the lowest example id, then the earliest window in roster order.
    pub fn closest_match(&self, current: &RelationSet) -> Result<(&WindowPair, usize)> {
        let key = self.key_of(current);
        let mut best: Option<(usize, usize)> = None;
        for &i in &self.order {
            let other = &self.keys[i];
            if let Some((_, d)) = best {
                if key.len().abs_diff(other.len()) >= d {
                    continue;
                }
            }
            let d = edit_distance(&key, other);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
                if d == 0 {
                    break;
                }
            }
        }
        best.map(|(i, d)| (&self.pairs[i], d)).ok_or(Error::EmptyCorpus)
    }
}

/// Heuristic distance from an option's post-move relation set to the
/// example; lower is better. Levenshtein uses roster order.
pub fn score_option(kind: HeuristicKind, option: &RelationSet, example: &RelationSet, roster: &[BlockId]) -> Result<f64> {
    match kind {
        HeuristicKind::Jaccard => Ok(jaccard_distance(option, example)),
        HeuristicKind::Levenshtein => Ok(roster_levenshtein(option, example, roster) as f64),
        other => Err(Error::UnknownLabel(format!("{other} is not a distance heuristic"))),
    }
}

/// [`score_option`] applied to `closure(current + candidate)`.
pub fn score_candidate(
    kind: HeuristicKind,
    current: &RelationSet,
    candidate: &RelTriple,
    example: &RelationSet,
    roster: &[BlockId],
) -> Result<f64> {
    let next = closure(&current.extended([*candidate]))?;
    score_option(kind, &next, example, roster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsr::Label;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(label: Label, x: u16, y: u16) -> RelTriple {
        RelTriple::new(label, BlockId(x), BlockId(y)).unwrap()
    }

    #[test]
    fn jaccard_examples() {
        let a = RelationSet::from_triples(vec![t(Label::LEFT, 1, 2), t(Label::LEFT, 1, 3)]);
        let b = RelationSet::from_triples(vec![t(Label::LEFT, 1, 3), t(Label::LEFT, 1, 4)]);
        let c = RelationSet::from_triples(vec![t(Label::RIGHT, 5, 6)]);
        assert_eq!(jaccard_distance(&a, &a), 0.0);
        assert_eq!(jaccard_distance(&a, &c), 1.0);
        assert!((jaccard_distance(&a, &b) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard_distance(&RelationSet::new(), &RelationSet::new()), 0.0);
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance(&["a", "b"], &["a", "c"]), 1);
        assert_eq!(edit_distance::<&str>(&[], &["a", "c"]), 2);
        assert_eq!(edit_distance(&["k", "i", "t"], &["k", "i", "t"]), 0);
    }

    #[test]
    fn heuristic_names_round_trip() {
        for k in HeuristicKind::ALL {
            assert_eq!(k.to_string().parse::<HeuristicKind>().unwrap(), k);
        }
        assert!("astar".parse::<HeuristicKind>().is_err());
    }

    #[test]
    fn chance_never_moves_a_placed_block() {
        let scene = Scene::with_anchor(BlockId(1));
        let roster = [BlockId(1), BlockId(2), BlockId(3)];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let mv = chance_move(&scene, &roster, &mut rng).unwrap();
            assert_ne!(mv.subject, BlockId(1));
            assert_eq!(mv.target, BlockId(1));
        }
        let full = Scene::with_anchor(BlockId(1));
        assert_eq!(chance_move(&full, &[BlockId(1)], &mut rng), Err(Error::NoLegalMove));
    }

    #[test]
    fn completing_candidate_scores_zero() {
        let example = closure(&RelationSet::from_triples(vec![t(Label::UNDER_TOUCHING_SUPPORT, 1, 2)])).unwrap();
        let cand = t(Label::UNDER_TOUCHING_SUPPORT, 1, 2);
        for kind in [HeuristicKind::Jaccard, HeuristicKind::Levenshtein] {
            assert_eq!(score_candidate(kind, &RelationSet::new(), &cand, &example, &[]).unwrap(), 0.0);
        }
        let clash = t(Label::LEFT, 1, 2);
        let current = RelationSet::from_triples(vec![t(Label::RIGHT, 1, 2)]);
        assert!(matches!(
            score_candidate(HeuristicKind::Jaccard, &current, &clash, &example, &[]),
            Err(Error::ContradictoryAtoms(..))
        ));
    }

    #[test]
    fn closest_match_prefers_exact_window() {
        let w1 = WindowPair {
            example: 1,
            window: vec![t(Label::LEFT, 1, 2)],
            holdout: vec![],
        };
        let w0 = WindowPair {
            example: 0,
            window: vec![t(Label::RIGHT, 2, 1), t(Label::LEFT, 1, 2)],
            holdout: vec![],
        };
        let idx = WindowIndex::new(vec![w1.clone(), w0.clone()], &[BlockId(1), BlockId(2)]);
        let cur = RelationSet::from_triples(w0.window.clone());
        assert_eq!(idx.closest_match(&cur).unwrap(), (&w0, 0));
        assert_eq!(idx.closest_match(&RelationSet::new()).unwrap(), (&w1, 1));
        assert_eq!(
            WindowIndex::new(vec![], &[]).closest_match(&cur).map(|(_, d)| d),
            Err(Error::EmptyCorpus)
        );
    }
}
