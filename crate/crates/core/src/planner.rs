//! The generation loop.
//!
//! A run starts from an MLP-predicted first move whose target (the anchor)
//! is placed at the origin without consuming a move. Every later step:
//!
//! 1. the CNN names a reference example for the current relations;
//! 2. the Levenshtein-closest training window is looked up;
//! 3. the LSTM predicts that window's holdout;
//! 4. candidate moves are built from the labels shared by example and
//!    holdout that the current scene can still instantiate;
//! 5. the configured heuristic picks one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::graphmatch::{option_similarities, prune_then_select, select_action};
use crate::heuristics::{chance_move, score_option, HeuristicKind, WindowIndex};
use crate::par::rng_for;
use crate::qsr::{BlockId, Label, RelTriple, RelationSet};
use crate::scene::{Move, MoveRelation, Scene};

/// The move that creates `label` between a new block and a placed one.
/// Labels with `under` but no `support`, and bare `touching`, have none.
pub fn move_relation_for(label: Label) -> Option<MoveRelation> {
    match label {
        Label::UNDER_TOUCHING_SUPPORT => Some(MoveRelation::On),
        Label::LEFT_TOUCHING => Some(MoveRelation::Left),
        Label::RIGHT_TOUCHING => Some(MoveRelation::Right),
        Label::LEFT => Some(MoveRelation::LeftDc),
        Label::RIGHT => Some(MoveRelation::RightDc),
        _ => None,
    }
}

/// Move realizing `label(x, y)` with one of the two blocks already placed.
/// For `on` the lower block `x` is the target; otherwise `x` is the subject.
pub fn move_for_triple(label: Label, x: BlockId, y: BlockId) -> Option<Move> {
    let rel = move_relation_for(label)?;
    Some(match rel {
        MoveRelation::On => Move::new(y, rel, x),
        _ => Move::new(x, rel, y),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub heuristic: HeuristicKind,
    pub seed: u64,
    /// Number of top-ranked CNN examples whose candidate moves are pooled.
    pub n_best: usize,
}

impl GenerationConfig {
    pub fn new(heuristic: HeuristicKind, seed: u64) -> Self {
        GenerationConfig {
            heuristic,
            seed,
            n_best: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Reference example chosen by the CNN (absent for chance).
    pub example: Option<usize>,
    /// Example that the closest-match window came from.
    pub window_example: Option<usize>,
    pub holdout: Vec<RelTriple>,
    pub options: Vec<Move>,
    pub scores: Vec<f64>,
    pub chosen: Move,
    /// Options came from the example's remaining labels, not the intersection.
    pub fallback: bool,
}

impl StepRecord {
    pub fn to_line(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
        let join = |v: Vec<String>| if v.is_empty() { "-".to_string() } else { v.join("|") };
        format!(
            "step={} example={} window={} fallback={} chosen={} holdout={} options={} scores={}",
            self.step,
            opt(self.example),
            opt(self.window_example),
            self.fallback,
            self.chosen,
            join(self.holdout.iter().map(RelTriple::token).collect()),
            join(self.options.iter().map(Move::to_string).collect()),
            join(self.scores.iter().map(|s| format!("{s:.4}")).collect()),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub anchor: BlockId,
    pub moves: Vec<Move>,
    pub trace: Vec<StepRecord>,
}

impl Plan {
    /// Semicolon-joined `put(...)` terms.
    pub fn to_text(&self) -> String {
        self.moves.iter().map(Move::to_string).collect::<Vec<_>>().join(";")
    }

    /// Parses `put(...);put(...)`; the anchor is the first move's target.
    /// Lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Plan> {
        let body: String = text.lines().filter(|l| !l.trim_start().starts_with('#')).collect();
        let moves = body
            .trim()
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<Move>())
            .collect::<Result<Vec<_>>>()?;
        let anchor = moves.first().map(|m| m.target).ok_or_else(|| Error::Parse {
            line: 1,
            reason: "empty plan".to_string(),
        })?;
        Ok(Plan {
            anchor,
            moves,
            trace: Vec::new(),
        })
    }

    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            let _ = writeln!(out, "{}", r.to_line());
        }
        out
    }

    /// Folds the moves over the anchor-only scene.
    pub fn execute(&self) -> Result<Scene> {
        execute(&self.moves, &Scene::with_anchor(self.anchor))
    }
}

pub fn execute(moves: &[Move], initial: &Scene) -> Result<Scene> {
    moves.iter().try_fold(initial.clone(), |s, m| s.apply_move(m))
}

/// Label multiset as counts.
fn label_counts(rels: &RelationSet) -> BTreeMap<Label, usize> {
    let mut m = BTreeMap::new();
    for l in rels.labels() {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Multiset intersection of the labels of `a` and `b`.
pub fn label_intersection(a: &RelationSet, b: &RelationSet) -> BTreeMap<Label, usize> {
    let cb = label_counts(b);
    label_counts(a)
        .into_iter()
        .filter_map(|(l, n)| {
            let k = n.min(cb.get(&l).copied().unwrap_or(0));
            (k > 0).then_some((l, k))
        })
        .collect()
}

/// Labels of `a` not yet used up by `b`, with multiplicity.
pub fn label_difference(a: &RelationSet, b: &RelationSet) -> BTreeMap<Label, usize> {
    let cb = label_counts(b);
    label_counts(a)
        .into_iter()
        .filter_map(|(l, n)| {
            let k = n.saturating_sub(cb.get(&l).copied().unwrap_or(0));
            (k > 0).then_some((l, k))
        })
        .collect()
}

/// One option per (instantiable label, legal target), all placing `subject`;
/// paired with the relations of the resulting scene. Targets follow `roster`
/// order.
pub fn options_for_labels(
    labels: impl IntoIterator<Item = Label>,
    scene: &Scene,
    current: &RelationSet,
    subject: BlockId,
    roster: &[BlockId],
) -> Result<Vec<(Move, RelationSet)>> {
    let rank = |b: &BlockId| roster.iter().position(|r| r == b).unwrap_or(usize::MAX);
    let mut out: Vec<(Move, RelationSet)> = Vec::new();
    for label in labels {
        let Some(rel) = move_relation_for(label) else { continue };
        let mut targets = scene.legal_targets(rel);
        targets.sort_by_key(rank);
        for target in targets {
            let mv = Move::new(subject, rel, target);
            if out.iter().any(|(m, _)| *m == mv) {
                continue;
            }
            let next = scene.apply_move(&mv)?.extract_relations()?;
            if current.is_subset_of(&next) {
                out.push((mv, next));
            }
        }
    }
    Ok(out)
}

/// Candidate moves for the labels shared by `example` and `holdout`.
pub fn candidate_moves(
    current: &RelationSet,
    example: &RelationSet,
    holdout: &RelationSet,
    scene: &Scene,
    subject: BlockId,
    roster: &[BlockId],
) -> Result<Vec<(Move, RelationSet)>> {
    let shared = label_intersection(example, holdout);
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let options = options_for_labels(shared.into_keys(), scene, current, subject, roster)?;
    if options.is_empty() {
        return Err(Error::NoLegalMove);
    }
    Ok(options)
}

/// Generation state plus the models and corpus it consults.
pub struct Generator<'a> {
    corpus: &'a Corpus,
    bundle: &'a ModelBundle,
    windows: WindowIndex,
}

#[derive(Debug, Clone)]
struct State {
    scene: Scene,
    rels: RelationSet,
}

impl<'a> Generator<'a> {
    pub fn new(corpus: &'a Corpus, bundle: &'a ModelBundle) -> Result<Self> {
        bundle.check_corpus(corpus)?;
        Ok(Generator {
            corpus,
            bundle,
            windows: WindowIndex::new(bundle.training_pairs(corpus), &bundle.index.roster),
        })
    }

    pub fn roster(&self) -> &[BlockId] {
        &self.bundle.index.roster
    }

    /// Two distinct random blocks and the MLP's most likely instantiable
    /// relation between them, as `(anchor, move)`.
    pub fn first_move<R: Rng>(&self, rng: &mut R) -> Result<(BlockId, Move)> {
        let roster = self.roster();
        let b = roster.len();
        if b < 2 {
            return Err(Error::NoLegalMove);
        }
        let i = rng.gen_range(0..b);
        let j = (i + rng.gen_range(1..b)) % b;
        let scores = self.bundle.mlp.scores(i, j);
        let labels = &self.bundle.index.relations;
        let best = (0..labels.len())
            .filter(|k| move_relation_for(labels[*k]).is_some())
            .fold(None, |best: Option<usize>, k| match best {
                Some(bk) if scores[bk] >= scores[k] => Some(bk),
                _ => Some(k),
            })
            .ok_or(Error::GenerationStuck {
                step: 0,
                reason: "no instantiable relation label in the corpus".to_string(),
            })?;
        let mv = move_for_triple(labels[best], roster[i], roster[j]).expect("instantiable label");
        Ok((mv.target, mv))
    }

    /// Chance baseline opening: two distinct random blocks and a uniformly
    /// random move relation, ignoring the MLP.
    pub fn random_first_move<R: Rng>(&self, rng: &mut R) -> Result<(BlockId, Move)> {
        let roster = self.roster();
        let b = roster.len();
        if b < 2 {
            return Err(Error::NoLegalMove);
        }
        let i = rng.gen_range(0..b);
        let j = (i + rng.gen_range(1..b)) % b;
        let rel = MoveRelation::ALL[rng.gen_range(0..MoveRelation::ALL.len())];
        Ok((roster[j], Move::new(roster[i], rel, roster[j])))
    }

    fn subject(&self, scene: &Scene) -> Option<BlockId> {
        self.roster().iter().copied().find(|b| !scene.is_placed(*b))
    }

    fn step<R: Rng>(&self, state: &State, config: &GenerationConfig, step: usize, rng: &mut R) -> Result<(Move, StepRecord)> {
        let stuck = |reason: String| Error::GenerationStuck { step, reason };
        if config.heuristic == HeuristicKind::Chance {
            let mv = chance_move(&state.scene, self.roster(), rng).map_err(|e| stuck(e.to_string()))?;
            let record = StepRecord {
                step,
                example: None,
                window_example: None,
                holdout: Vec::new(),
                options: Vec::new(),
                scores: Vec::new(),
                chosen: mv,
                fallback: false,
            };
            return Ok((mv, record));
        }
        let subject = self.subject(&state.scene).ok_or_else(|| stuck("all blocks placed".to_string()))?;
        let index = &self.bundle.index;
        let ranked = self.bundle.cnn.ranked_examples(index, &state.rels)?;
        let examples: Vec<usize> = ranked.into_iter().take(config.n_best.max(1)).collect();
        let goal = &self.corpus.examples[examples[0]].relations;
        let (window, _) = self.windows.closest_match(&state.rels)?;
        let holdout = self.bundle.lstm.predict_holdout(index, &window.window)?;

        let mut options: Vec<(Move, RelationSet)> = Vec::new();
        for &e in &examples {
            let example = &self.corpus.examples[e].relations;
            match candidate_moves(&state.rels, example, &holdout, &state.scene, subject, self.roster()) {
                Ok(found) => {
                    for o in found {
                        if !options.iter().any(|(m, _)| *m == o.0) {
                            options.push(o);
                        }
                    }
                }
                Err(Error::EmptyIntersection | Error::NoLegalMove) => {}
                Err(e) => return Err(e),
            }
        }
        let fallback = options.is_empty();
        if fallback {
            let remaining = label_difference(goal, &state.rels);
            options = options_for_labels(remaining.into_keys(), &state.scene, &state.rels, subject, self.roster())?;
        }
        if options.is_empty() {
            return Err(stuck(format!(
                "no legal move for {subject} from the labels of example {}",
                examples[0]
            )));
        }

        let (chosen, scores) = match config.heuristic {
            HeuristicKind::Jaccard | HeuristicKind::Levenshtein => {
                let scores = options
                    .iter()
                    .map(|(_, r)| score_option(config.heuristic, r, goal, self.roster()))
                    .collect::<Result<Vec<f64>>>()?;
                let mut best = 0;
                for (i, s) in scores.iter().enumerate() {
                    if *s < scores[best] {
                        best = i;
                    }
                }
                (best, scores)
            }
            HeuristicKind::GraphMatch => (select_action(&options, goal)?, option_similarities(&options, goal)),
            HeuristicKind::Combined => (
                prune_then_select(&options, goal, goal, self.roster())?,
                option_similarities(&options, goal),
            ),
            HeuristicKind::Chance => unreachable!("handled above"),
        };
        let mv = options[chosen].0;
        let record = StepRecord {
            step,
            example: Some(examples[0]),
            window_example: Some(window.example),
            holdout: holdout.into_triples(),
            options: options.iter().map(|(m, _)| *m).collect(),
            scores,
            chosen: mv,
            fallback,
        };
        Ok((mv, record))
    }

    /// Generates moves until every roster block is placed.
    pub fn generate(&self, config: &GenerationConfig) -> Result<Plan> {
        let roster = self.roster();
        if roster.len() == 1 {
            return Ok(Plan {
                anchor: roster[0],
                moves: Vec::new(),
                trace: Vec::new(),
            });
        }
        let mut opening = rng_for(config.seed, "first-move");
        let (anchor, first) = if config.heuristic == HeuristicKind::Chance {
            self.random_first_move(&mut opening)?
        } else {
            self.first_move(&mut opening)?
        };
        let mut rng = rng_for(config.seed, "chance");
        let mut scene = Scene::with_anchor(anchor).apply_move(&first)?;
        let mut state = State {
            rels: scene.extract_relations()?,
            scene: scene.clone(),
        };
        let mut plan = Plan {
            anchor,
            moves: vec![first],
            trace: Vec::new(),
        };
        while state.scene.len() < roster.len() {
            let step = plan.moves.len();
            let (mv, record) = self.step(&state, config, step, &mut rng)?;
            scene = state.scene.apply_move(&mv)?;
            let rels = scene.extract_relations()?;
            if !state.rels.is_subset_of(&rels) {
                return Err(Error::GenerationStuck {
                    step,
                    reason: format!("{mv} would break an existing relation"),
                });
            }
            state = State { scene, rels };
            plan.moves.push(mv);
            plan.trace.push(record);
        }
        Ok(plan)
    }
}
