mod common;

use std::collections::BTreeSet;

use blockstair::qsr::{closure, is_closure_complete, Atom, BlockId, Label, RelTriple, RelationSet};
use common::{as_map, fixpoint_oracle, LABELS};
use proptest::prelude::*;


fn relation_set() -> impl Strategy<Value = RelationSet> {
    prop::collection::vec((0..LABELS.len(), 1u16..=6, 1u16..=6), 0..=15).prop_map(|items| {
        items
            .into_iter()
            .filter(|(_, x, y)| x != y)
            .map(|(l, x, y)| RelTriple::new(LABELS[l], BlockId(x), BlockId(y)).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn closure_matches_fixpoint_oracle(rels in relation_set()) {
        match (closure(&rels), fixpoint_oracle(&rels)) {
            (Ok(c), Some(o)) => prop_assert_eq!(as_map(&c), o),
            (Err(_), None) => {}
            (c, o) => prop_assert!(false, "closure {:?} vs oracle {:?}", c, o),
        }
    }

    #[test]
    fn closure_is_idempotent(rels in relation_set()) {
        if let Ok(c) = closure(&rels) {
            prop_assert_eq!(as_map(&closure(&c).unwrap()), as_map(&c));
            prop_assert!(is_closure_complete(&c));
        }
    }

    #[test]
    fn closure_is_monotone(a in relation_set(), b in relation_set()) {
        let both = a.extended(b.iter().copied());
        if let (Ok(ca), Ok(cab)) = (closure(&a), closure(&both)) {
            prop_assert!(ca.is_subset_of(&cab));
        }
    }

    #[test]
    fn lateral_atoms_are_inverse_after_closure(rels in relation_set()) {
        if let Ok(c) = closure(&rels) {
            for t in &c {
                prop_assert_eq!(t.label.has(Atom::Left), c.holds(t.y, t.x, Atom::Right));
                prop_assert_eq!(t.label.has(Atom::Right), c.holds(t.y, t.x, Atom::Left));
            }
        }
    }
}

fn triple(label: Label, x: u16, y: u16) -> RelTriple {
    RelTriple::new(label, BlockId(x), BlockId(y)).unwrap()
}

#[test]
fn worked_right_chain() {
    let rels = RelationSet::from_triples(vec![triple(Label::RIGHT, 6, 7), triple(Label::RIGHT, 7, 1)]);
    let c = closure(&rels).unwrap();
    assert!(c.holds(BlockId(6), BlockId(1), Atom::Right));
    assert!(c.holds(BlockId(1), BlockId(6), Atom::Left));
    let expected: BTreeSet<String> = [
        "right(block6,block7)",
        "right(block7,block1)",
        "right(block6,block1)",
        "left(block7,block6)",
        "left(block1,block7)",
        "left(block1,block6)",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(c.tokens().into_iter().collect::<BTreeSet<_>>(), expected);
}

#[test]
fn two_support_links_give_plain_under() {
    let rels = RelationSet::from_triples(vec![
        triple(Label::UNDER_TOUCHING_SUPPORT, 1, 3),
        triple(Label::UNDER_TOUCHING_SUPPORT, 3, 4),
    ]);
    let c = closure(&rels).unwrap();
    assert_eq!(c.label_of(BlockId(1), BlockId(4)), Some(Label::UNDER));
}

#[test]
fn opposite_lateral_atoms_are_rejected() {
    let rels = RelationSet::from_triples(vec![triple(Label::LEFT, 1, 2), triple(Label::LEFT, 2, 1)]);
    assert!(closure(&rels).is_err());
}
