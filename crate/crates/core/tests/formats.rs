use std::path::{Path, PathBuf};

use blockstair::dataset::{parse_example, synthesize_corpus, Corpus, NoiseParams};
use blockstair::eval::{pointing, staircase_score, Pointing};
use blockstair::planner::Plan;
use blockstair::qsr::{closure, is_closure_complete, Atom, BlockId, Label};
use blockstair::Error;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

const WORKED_PLAN: &str =
    "put(block6,left(block4));put(block5,rightdc(block4));put(block7,on(block4));put(block1,on(block6));put(block3,on(block1))";

#[test]
fn staircase_fixture_round_trips_byte_identically() {
    let text = std::fs::read_to_string(data("fixtures/staircase.rel")).unwrap();
    let ex = parse_example(&text).unwrap();
    assert_eq!(ex.to_rel_text(), text);
    assert_eq!(ex.stored_relations().len(), 18);
    let rot = ex.rotations();
    assert_eq!(rot.len(), 6);
    assert_eq!(rot[0], (BlockId(7), [359.883, 1.222356, 359.0561]));
    assert_eq!(rot[4].1[2], -2.970282e-8);
}

#[test]
fn staircase_fixture_closure_is_consistent_with_its_stored_lines() {
    let ex = parse_example(&std::fs::read_to_string(data("fixtures/staircase.rel")).unwrap()).unwrap();
    let stored = ex.stored_relations();
    let closed = closure(&stored).unwrap();
    assert!(stored.is_subset_of(&closed));
    assert!(is_closure_complete(&ex.relations));
    assert_eq!(closed.label_of(BlockId(1), BlockId(4)), Some(Label::UNDER));
    assert!(closed.holds(BlockId(7), BlockId(1), Atom::Right));
    assert!(closed.holds(BlockId(1), BlockId(7), Atom::Left));
}

#[test]
fn worked_plan_grammar_round_trips() {
    let plan = Plan::from_text(WORKED_PLAN).unwrap();
    assert_eq!(plan.anchor, BlockId(4));
    assert_eq!(plan.moves.len(), 5);
    assert_eq!(plan.to_text(), WORKED_PLAN);
    assert!(Plan::from_text("put(block6,beside(block4))").is_err());
    assert!(Plan::from_text("").is_err());
}

#[test]
fn worked_plan_builds_a_left_pointing_staircase() {
    let scene = Plan::from_text(WORKED_PLAN).unwrap().execute().unwrap();
    let report = staircase_score(&scene).unwrap();
    assert_eq!(report.heights, vec![3, 2, 1]);
    assert_eq!(report.score, 10.0);
    assert_eq!(pointing(&scene), Some(Pointing::Left));
}

#[test]
fn moving_a_block_twice_is_rejected() {
    let plan = Plan::from_text("put(block6,left(block4));put(block6,on(block4))").unwrap();
    assert_eq!(plan.execute(), Err(Error::SubjectAlreadyMoved(BlockId(6))));
}

#[test]
fn shipped_corpus_matches_its_synthesis() {
    let shipped = Corpus::read_dir(&data("corpus")).unwrap();
    let fresh = synthesize_corpus(17, &NoiseParams::default(), 7).unwrap();
    assert_eq!(shipped.len(), 17);
    assert_eq!(shipped.index, fresh.index);
    for (a, b) in shipped.examples.iter().zip(&fresh.examples) {
        assert_eq!(a.to_rel_text(), b.to_rel_text());
    }
    assert!(shipped.examples.iter().all(|e| is_closure_complete(&e.relations)));
}

#[test]
fn corpus_directory_round_trip() {
    let corpus = synthesize_corpus(3, &NoiseParams::default(), 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    corpus.write_dir(dir.path()).unwrap();
    let back = Corpus::read_dir(dir.path()).unwrap();
    assert_eq!(back.index, corpus.index);
    assert_eq!(back.meta, corpus.meta);
    for (a, b) in back.examples.iter().zip(&corpus.examples) {
        assert_eq!(a.to_rel_text(), b.to_rel_text());
    }
}

#[test]
fn tampered_meta_is_a_data_mismatch() {
    let corpus = synthesize_corpus(2, &NoiseParams::default(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    corpus.write_dir(dir.path()).unwrap();
    let meta = dir.path().join("corpus.meta");
    let text = std::fs::read_to_string(&meta).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| if l.starts_with("relations=") { "relations=left" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&meta, tampered).unwrap();
    assert!(matches!(Corpus::read_dir(dir.path()), Err(Error::DataMismatch(_))));
}

#[test]
fn malformed_lines_report_their_position() {
    let err = parse_example("left block1 block2\nleft block1\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }));
    assert!(matches!(parse_example("sideways block1 block2\n"), Err(Error::UnknownAtom(_))));
}
