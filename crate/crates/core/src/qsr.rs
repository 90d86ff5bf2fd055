//! Qualitative spatial relations between blocks.
//!
//! The vocabulary has five atoms (`left`, `right`, `touching`, `under`,
//! `support`). Atoms that hold together for one ordered pair of blocks are
//! bundled into a composite [`Label`], rendered comma-joined in the fixed
//! order left, right, touching, under, support (e.g. `under,touching,support`).
//!
//! [`closure`] computes the least fixpoint of the relation axioms:
//!
//! * support(x,y) implies under(x,y) and touching(x,y)
//! * left(x,y) if and only if right(y,x)
//! * touching is symmetric
//! * left and right are transitive
//! * support(x,y) and support(y,z) imply under(x,z)
//! * under(x,y) and support(y,z) imply under(x,z)

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block, identified by the number in its display name (`block7` is `BlockId(7)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u16);

impl BlockId {
    pub fn name(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block{}", self.0)
    }
}

impl FromStr for BlockId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix("block")
            .and_then(|n| n.parse::<u16>().ok())
            .map(BlockId)
            .ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("`{s}` is not a block name"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Left,
    Right,
    Touching,
    Under,
    Support,
}

impl Atom {
    pub const ALL: [Atom; 5] = [
        Atom::Left,
        Atom::Right,
        Atom::Touching,
        Atom::Under,
        Atom::Support,
    ];

    fn bit(self) -> u8 {
        match self {
            Atom::Left => 1,
            Atom::Right => 2,
            Atom::Touching => 4,
            Atom::Under => 8,
            Atom::Support => 16,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Atom::Left => "left",
            Atom::Right => "right",
            Atom::Touching => "touching",
            Atom::Under => "under",
            Atom::Support => "support",
        }
    }
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Atom::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAtom(s.to_string()))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Atom order used when rendering labels: `under` precedes `touching`.
const DISPLAY_ORDER: [Atom; 5] = [
    Atom::Left,
    Atom::Right,
    Atom::Under,
    Atom::Touching,
    Atom::Support,
];

/// A non-empty, canonically ordered set of atoms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Label(u8);

const LEFT: u8 = 1;
const RIGHT: u8 = 2;
const TOUCHING: u8 = 4;
const UNDER: u8 = 8;
const SUPPORT: u8 = 16;

impl Label {
    pub const LEFT: Label = Label(LEFT);
    pub const RIGHT: Label = Label(RIGHT);
    pub const TOUCHING: Label = Label(TOUCHING);
    pub const UNDER: Label = Label(UNDER);
    pub const LEFT_TOUCHING: Label = Label(LEFT | TOUCHING);
    pub const RIGHT_TOUCHING: Label = Label(RIGHT | TOUCHING);
    pub const UNDER_TOUCHING_SUPPORT: Label = Label(UNDER | TOUCHING | SUPPORT);

    /// Builds a label from atoms; `None` when `atoms` is empty.
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Option<Label> {
        let bits = atoms.into_iter().fold(0u8, |acc, a| acc | a.bit());
        (bits != 0).then_some(Label(bits))
    }

    pub fn atoms(self) -> impl Iterator<Item = Atom> {
        Atom::ALL.into_iter().filter(move |a| self.0 & a.bit() != 0)
    }

    pub fn has(self, atom: Atom) -> bool {
        self.0 & atom.bit() != 0
    }

    pub fn union(self, other: Label) -> Label {
        Label(self.0 | other.0)
    }

    /// True when every atom of `self` is also in `other`.
    pub fn is_subset_of(self, other: Label) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_contradictory(self) -> bool {
        self.0 & (LEFT | RIGHT) == LEFT | RIGHT
    }

    /// The label of the reversed pair: swaps left and right, keeps touching.
    /// There are no upward atoms, so labels with under or support have no inverse.
    pub fn inverse(self) -> Option<Label> {
        if self.0 & (UNDER | SUPPORT) != 0 {
            return None;
        }
        let mut bits = self.0 & TOUCHING;
        if self.0 & LEFT != 0 {
            bits |= RIGHT;
        }
        if self.0 & RIGHT != 0 {
            bits |= LEFT;
        }
        Some(Label(bits))
    }

    fn bits(self) -> u8 {
        self.0
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for atom in DISPLAY_ORDER.into_iter().filter(|a| self.has(*a)) {
            if !first {
                f.write_str(",")?;
            }
            f.write_str(atom.as_str())?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label({self})")
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let atoms = s
            .split(',')
            .map(|a| a.trim().parse::<Atom>())
            .collect::<Result<Vec<_>>>()?;
        Label::from_atoms(atoms).ok_or_else(|| Error::UnknownAtom(s.to_string()))
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One relation `label(x, y)` between two distinct blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelTriple {
    pub x: BlockId,
    pub y: BlockId,
    pub label: Label,
}

impl RelTriple {
    pub fn new(label: Label, x: BlockId, y: BlockId) -> Result<Self> {
        if x == y {
            return Err(Error::SameBlock(x));
        }
        Ok(RelTriple { x, y, label })
    }

    /// Token text used by the distance heuristics, e.g. `left,touching(block7,block6)`.
    pub fn token(&self) -> String {
        format!("{}({},{})", self.label, self.x, self.y)
    }
}

impl Ord for RelTriple {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.x, self.y, self.label).cmp(&(other.x, other.y, other.label))
    }
}

impl PartialOrd for RelTriple {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RelTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.label, self.x, self.y)
    }
}

/// A multiset of relation triples. Sets produced by [`normalize`] and
/// [`closure`] hold at most one triple per ordered pair, sorted canonically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationSet {
    triples: Vec<RelTriple>,
}

impl RelationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: Vec<RelTriple>) -> Self {
        RelationSet { triples }
    }

    pub fn push(&mut self, t: RelTriple) {
        self.triples.push(t);
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RelTriple> {
        self.triples.iter()
    }

    pub fn triples(&self) -> &[RelTriple] {
        &self.triples
    }

    pub fn into_triples(self) -> Vec<RelTriple> {
        self.triples
    }

    pub fn contains(&self, t: &RelTriple) -> bool {
        self.triples.contains(t)
    }

    /// Union of all atoms stated for the ordered pair.
    pub fn label_of(&self, x: BlockId, y: BlockId) -> Option<Label> {
        self.triples
            .iter()
            .filter(|t| t.x == x && t.y == y)
            .map(|t| t.label)
            .reduce(Label::union)
    }

    pub fn holds(&self, x: BlockId, y: BlockId, atom: Atom) -> bool {
        self.label_of(x, y).is_some_and(|l| l.has(atom))
    }

    pub fn blocks(&self) -> BTreeSet<BlockId> {
        self.triples.iter().flat_map(|t| [t.x, t.y]).collect()
    }

    /// Labels with multiplicity, in triple order.
    pub fn labels(&self) -> Vec<Label> {
        self.triples.iter().map(|t| t.label).collect()
    }

    pub fn tokens(&self) -> Vec<String> {
        self.triples.iter().map(RelTriple::token).collect()
    }

    /// Triples ordered by the roster positions of their blocks. Blocks absent
    /// from `roster` sort after all roster blocks, by id.
    pub fn ordered_by(&self, roster: &[BlockId]) -> Vec<RelTriple> {
        let rank = |b: BlockId| {
            roster
                .iter()
                .position(|r| *r == b)
                .map_or((1, b.0 as usize), |i| (0, i))
        };
        let mut out = self.triples.clone();
        out.sort_by_key(|t| (rank(t.x), rank(t.y), t.label));
        out
    }

    /// Atom-level inclusion: every atom stated in `self` is stated in `other`
    /// for the same ordered pair.
    pub fn is_subset_of(&self, other: &RelationSet) -> bool {
        let theirs = pair_map(other);
        pair_map(self).into_iter().all(|(pair, label)| {
            theirs
                .get(&pair)
                .is_some_and(|have| label.is_subset_of(*have))
        })
    }

    pub fn extended(&self, extra: impl IntoIterator<Item = RelTriple>) -> RelationSet {
        let mut triples = self.triples.clone();
        triples.extend(extra);
        RelationSet { triples }
    }

    /// Applies a block renaming to every triple.
    pub fn renamed(&self, map: impl Fn(BlockId) -> BlockId) -> RelationSet {
        RelationSet {
            triples: self
                .triples
                .iter()
                .map(|t| RelTriple {
                    x: map(t.x),
                    y: map(t.y),
                    label: t.label,
                })
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a RelationSet {
    type Item = &'a RelTriple;
    type IntoIter = std::slice::Iter<'a, RelTriple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

impl FromIterator<RelTriple> for RelationSet {
    fn from_iter<I: IntoIterator<Item = RelTriple>>(iter: I) -> Self {
        RelationSet {
            triples: iter.into_iter().collect(),
        }
    }
}

fn pair_map(rels: &RelationSet) -> BTreeMap<(BlockId, BlockId), Label> {
    let mut map = BTreeMap::new();
    for t in rels {
        map.entry((t.x, t.y))
            .and_modify(|l: &mut Label| *l = l.union(t.label))
            .or_insert(t.label);
    }
    map
}

/// Merges all atoms per ordered pair into one label, in canonical order.
pub fn normalize(rels: &RelationSet) -> Result<RelationSet> {
    let map = pair_map(rels);
    let mut out = Vec::with_capacity(map.len());
    for ((x, y), label) in map {
        if label.is_contradictory() {
            return Err(Error::ContradictoryAtoms(x, y));
        }
        out.push(RelTriple { x, y, label });
    }
    Ok(RelationSet { triples: out })
}

/// Least fixpoint of the relation axioms, normalized.
pub fn closure(rels: &RelationSet) -> Result<RelationSet> {
    let normalized = normalize(rels)?;
    let blocks: Vec<BlockId> = normalized.blocks().into_iter().collect();
    let k = blocks.len();
    let index: BTreeMap<BlockId, usize> = blocks.iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let mut m = vec![0u8; k * k];
    for t in &normalized {
        m[index[&t.x] * k + index[&t.y]] |= t.label.bits();
    }

    loop {
        let mut changed = false;
        let mut set = |m: &mut [u8], i: usize, j: usize, bits: u8| {
            if i != j && m[i * k + j] & bits != bits {
                m[i * k + j] |= bits;
                changed = true;
            }
        };
        for i in 0..k {
            for j in 0..k {
                let r = m[i * k + j];
                if r & SUPPORT != 0 {
                    set(&mut m, i, j, UNDER | TOUCHING);
                }
                if r & LEFT != 0 {
                    set(&mut m, j, i, RIGHT);
                }
                if r & RIGHT != 0 {
                    set(&mut m, j, i, LEFT);
                }
                if r & TOUCHING != 0 {
                    set(&mut m, j, i, TOUCHING);
                }
            }
        }
        // Composition over an intermediate block `j`.
        for j in 0..k {
            for i in 0..k {
                let ij = m[i * k + j];
                if ij == 0 {
                    continue;
                }
                for l in 0..k {
                    let jl = m[j * k + l];
                    if jl == 0 || i == l {
                        continue;
                    }
                    let mut derived = 0u8;
                    derived |= ij & jl & (LEFT | RIGHT);
                    if ij & (UNDER | SUPPORT) != 0 && jl & SUPPORT != 0 {
                        derived |= UNDER;
                    }
                    if derived != 0 {
                        set(&mut m, i, l, derived);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let bits = m[i * k + j];
            if bits == 0 {
                continue;
            }
            if bits & (LEFT | RIGHT) == LEFT | RIGHT {
                return Err(Error::ContradictoryAtoms(blocks[i], blocks[j]));
            }
            out.push(RelTriple {
                x: blocks[i],
                y: blocks[j],
                label: Label(bits),
            });
        }
    }
    Ok(RelationSet { triples: out })
}

/// Inverse of a label, see [`Label::inverse`].
pub fn inverse(label: Label) -> Option<Label> {
    label.inverse()
}

/// True when `rels` already equals its own closure.
pub fn is_closure_complete(rels: &RelationSet) -> bool {
    match (normalize(rels), closure(rels)) {
        (Ok(n), Ok(c)) => n == c,
        _ => false,
    }
}
