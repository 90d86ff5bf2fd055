use std::path::Path;

use blockstair::dataset::{synthesize_staircase, NoiseParams, Orientation, DEFAULT_ROSTER};
use blockstair::eval::{pointing, render, staircase_score, Pointing, RenderFormat, ScoreSummary};
use blockstair::heuristics::HeuristicKind;
use blockstair::qsr::BlockId;
use blockstair::scene::{Pose, Scene};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn columns(heights: &[usize]) -> Scene {
    let mut poses = Vec::new();
    let mut id = 1;
    for (c, h) in heights.iter().enumerate() {
        for level in 0..*h {
            poses.push((BlockId(id), Pose::at(c as f64 - 2.0, level as f64, 0.0)));
            id += 1;
        }
    }
    Scene::from_poses(poses).unwrap()
}

fn canonical_fixture() -> Scene {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures/canonical.scene");
    Scene::from_text(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rubric_orders_canonical_near_and_flat() {
    let canonical = staircase_score(&canonical_fixture()).unwrap();
    let near = staircase_score(&columns(&[1, 3, 2])).unwrap();
    let flat = staircase_score(&columns(&[1, 1, 1, 1, 1, 1])).unwrap();
    assert_eq!(canonical.score, 10.0);
    assert_eq!(canonical.heights, vec![1, 2, 3]);
    assert!(near.flags.contains(&"1-3-2 configuration".to_string()));
    // Read right to left, (2, 3) rises and holds 5 of 6 blocks.
    assert!((near.score - 10.0 * 5.0 / 6.0).abs() < 1e-12);
    assert!(flat.score <= 2.0);
    assert!(canonical.score > near.score && near.score > flat.score);
}

#[test]
fn tall_slots_are_penalized() {
    let tower = staircase_score(&columns(&[1, 5])).unwrap();
    assert!((tower.score - (10.0 - 1.0)).abs() < 1e-12);
    let single = staircase_score(&columns(&[1])).unwrap();
    assert_eq!(single.score, 0.0);
}

#[test]
fn pointing_follows_the_tall_side() {
    assert_eq!(pointing(&columns(&[1, 2, 3])), Some(Pointing::Right));
    assert_eq!(pointing(&columns(&[3, 2, 1])), Some(Pointing::Left));
    assert_eq!(pointing(&columns(&[1, 1, 1])), None);
}

#[test]
fn summary_matches_direct_recomputation() {
    let scores = vec![10.0, 5.0, 0.0, 6.6667, 8.0];
    let s = ScoreSummary::from_scores(HeuristicKind::GraphMatch, scores.clone());
    let mean = scores.iter().sum::<f64>() / 5.0;
    let var = scores.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
    assert!((s.mean - mean).abs() < 1e-12);
    assert!((s.std_dev - var.sqrt()).abs() < 1e-12);
}

#[test]
fn ascii_render_of_canonical_staircase() {
    let text = render(&canonical_fixture(), RenderFormat::Ascii).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    let filled: Vec<usize> = (0..3)
        .map(|c| rows.iter().filter(|r| r.as_bytes()[c] != b'.').count())
        .collect();
    assert_eq!(filled, vec![1, 2, 3]);
    let single = render(&Scene::with_anchor(BlockId(7)), RenderFormat::Ascii).unwrap();
    assert_eq!(single, "7\n");
}

#[test]
fn svg_render_structure() {
    let svg = render(&canonical_fixture(), RenderFormat::Svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let rects: Vec<&str> = svg.lines().filter(|l| l.trim_start().starts_with("<rect")).collect();
    assert_eq!(rects.len(), 6);
    let fills: std::collections::BTreeSet<&str> = rects
        .iter()
        .map(|r| r.split("fill=\"").nth(1).unwrap().split('"').next().unwrap())
        .collect();
    assert_eq!(fills.len(), 6);
    assert!("pdf".parse::<RenderFormat>().is_err());
}

fn roster() -> Vec<BlockId> {
    DEFAULT_ROSTER.iter().map(|n| BlockId(*n)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_staircases_score_ten_and_point_their_way(seed in any::<u64>()) {
        let s = synthesize_staircase(&roster(), &NoiseParams::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(staircase_score(&s.scene).unwrap().score, 10.0);
        let expected = match s.orientation {
            Orientation::RisingRight => Pointing::Right,
            Orientation::RisingLeft => Pointing::Left,
        };
        prop_assert_eq!(pointing(&s.scene), Some(expected));
    }

    #[test]
    fn rubric_ignores_mirroring_and_renaming(heights in prop::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
        let scene = columns(&heights);
        let base = staircase_score(&scene).unwrap();
        prop_assert_eq!(staircase_score(&scene.mirrored()).unwrap().score, base.score);
        let mut ids: Vec<u16> = (1..=scene.len() as u16).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let renamed = scene.renamed(|b| BlockId(ids[b.0 as usize - 1] + 30));
        prop_assert_eq!(staircase_score(&renamed).unwrap(), base);
    }

    #[test]
    fn scores_stay_in_range(heights in prop::collection::vec(1usize..7, 1..6)) {
        let r = staircase_score(&columns(&heights)).unwrap();
        prop_assert!((0.0..=10.0).contains(&r.score));
    }
}
