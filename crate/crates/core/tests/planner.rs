use std::collections::{BTreeMap, BTreeSet};

use blockstair::bundle::ModelBundle;
use blockstair::dataset::{synthesize_corpus, Corpus, NoiseParams};
use blockstair::eval::{bench, run_one, staircase_score};
use blockstair::heuristics::{chance_move, HeuristicKind};
use blockstair::nn::TrainParams;
use blockstair::par::Exec;
use blockstair::planner::{GenerationConfig, Generator};
use blockstair::qsr::BlockId;
use blockstair::scene::{Move, Scene};
use blockstair::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> (Corpus, ModelBundle) {
    let corpus = synthesize_corpus(4, &NoiseParams::default(), 13).unwrap();
    let hp = TrainParams {
        epochs: 2,
        seed: 13,
        ..TrainParams::default()
    };
    let bundle = ModelBundle::train(&corpus, &hp, Exec::default()).unwrap();
    (corpus, bundle)
}

#[test]
fn chance_moves_are_uniform() {
    let scene = Scene::with_anchor(BlockId(1));
    let roster: Vec<BlockId> = (1..=4).map(BlockId).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 15_000;
    let mut counts: BTreeMap<Move, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(chance_move(&scene, &roster, &mut rng).unwrap()).or_insert(0) += 1;
    }
    // Three unplaced subjects times five placements against the anchor.
    assert_eq!(counts.len(), 15);
    let expected = draws as f64 / 15.0;
    let chi2: f64 = counts.values().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    // Critical value for 14 degrees of freedom at p = 0.001.
    assert!(chi2 < 36.12, "chi-squared {chi2}");
}

#[test]
fn generations_respect_move_once_and_monotone_relations() {
    let (corpus, bundle) = small();
    let generator = Generator::new(&corpus, &bundle).unwrap();
    for kind in HeuristicKind::ALL {
        for seed in 0..8 {
            let config = GenerationConfig::new(kind, seed);
            let plan = match generator.generate(&config) {
                Ok(p) => p,
                Err(Error::GenerationStuck { .. }) => continue,
                Err(e) => panic!("{kind} seed {seed}: {e}"),
            };
            let subjects: BTreeSet<BlockId> = plan.moves.iter().map(|m| m.subject).collect();
            assert_eq!(subjects.len(), plan.moves.len(), "a block moved twice");
            assert!(!subjects.contains(&plan.anchor));
            let mut scene = Scene::with_anchor(plan.anchor);
            let mut rels = scene.extract_relations().unwrap();
            for mv in &plan.moves {
                scene = scene.apply_move(mv).unwrap();
                let next = scene.extract_relations().unwrap();
                assert!(rels.is_subset_of(&next), "{mv} broke a relation");
                rels = next;
            }
            assert_eq!(scene.len(), corpus.index.roster.len());
            assert_eq!(generator.generate(&config).unwrap(), plan);
        }
    }
}

#[test]
fn bench_is_reproducible_and_sequential_agrees() {
    let (corpus, bundle) = small();
    let kinds = [HeuristicKind::Chance, HeuristicKind::GraphMatch];
    let a = bench(&corpus, &bundle, &kinds, 3, 0, Exec::default()).unwrap();
    let b = bench(&corpus, &bundle, &kinds, 3, 0, Exec::Sequential).unwrap();
    assert_eq!(a.to_table(), b.to_table());
    assert_eq!(a.runs.len(), 6);
    let generator = Generator::new(&corpus, &bundle).unwrap();
    let r = run_one(&generator, &GenerationConfig::new(HeuristicKind::GraphMatch, 1)).unwrap();
    if let Some(plan) = &r.plan {
        let scene = blockstair::planner::Plan::from_text(plan).unwrap().execute().unwrap();
        assert_eq!(staircase_score(&scene).unwrap().score, r.score);
    }
}

#[test]
fn permuted_corpus_regenerates_the_same_scores() {
    let (corpus, bundle) = small();
    let ids = [1u16, 3, 4, 5, 6, 7];
    let perm = [5u16, 7, 1, 6, 3, 4];
    let map: BTreeMap<BlockId, BlockId> = ids.iter().zip(perm).map(|(a, b)| (BlockId(*a), BlockId(b))).collect();
    let permuted = corpus.relabeled(&map).unwrap();
    let hp = bundle.train;
    let other = ModelBundle::train(&permuted, &hp, Exec::default()).unwrap();
    assert_eq!(other.mlp.params, bundle.mlp.params);
    let a = bench(&corpus, &bundle, &HeuristicKind::ALL, 3, 0, Exec::default()).unwrap();
    let b = bench(&permuted, &other, &HeuristicKind::ALL, 3, 0, Exec::default()).unwrap();
    let scores = |r: &blockstair::eval::BenchReport| r.runs.iter().map(|x| x.score).collect::<Vec<_>>();
    assert_eq!(scores(&a), scores(&b));
}

#[test]
fn bundle_from_another_corpus_is_refused() {
    let (_, bundle) = small();
    let other = synthesize_corpus(5, &NoiseParams::default(), 2).unwrap();
    assert!(matches!(Generator::new(&other, &bundle), Err(Error::DataMismatch(_))));
}
