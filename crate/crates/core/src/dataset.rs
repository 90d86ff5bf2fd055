//! Example corpus: `.rel` files, synthetic noisy staircases, integer
//! encoding, and window/holdout training pairs.
//!
//! A `.rel` file holds one relation per line (`<label> <blockA> <blockB>`),
//! one rotation per line (`<block> <rx; ry; rz>`), and optional `#` comments.
//! Parsed files keep their original lines so they serialize byte-identically.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::rng_for;
use crate::qsr::{closure, BlockId, Label, RelTriple, RelationSet};
use crate::scene::{Pose, Scene, BLOCK_SIZE, DC_GAP};

/// Block names used by synthesized corpora.
pub const DEFAULT_ROSTER: [u16; 6] = [1, 3, 4, 5, 6, 7];
/// Windows sampled per (example, window length) when enumeration is too large.
pub const DEFAULT_WINDOW_CAP: usize = 8;
/// Typical relation count range for one example; outside it a warning is raised.
pub const RELATION_COUNT_NORM: (usize, usize) = (10, 30);

#[derive(Debug, Clone, PartialEq)]
pub enum RelLine {
    Comment(String),
    Relation(RelTriple),
    /// Rotation with the angle text kept verbatim.
    Rotation {
        block: BlockId,
        angles: [f64; 3],
        raw: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: usize,
    pub concept: String,
    /// Normalized, closure-complete relations.
    pub relations: RelationSet,
    pub lines: Vec<RelLine>,
}

impl Example {
    /// Builds an example from extracted relations; lines are written canonically.
    pub fn from_relations(
        id: usize,
        concept: &str,
        relations: &RelationSet,
        rotations: &[(BlockId, [f64; 3])],
        header: Option<String>,
    ) -> Result<Example> {
        let relations = closure(relations)?;
        let mut lines: Vec<RelLine> = header.into_iter().map(RelLine::Comment).collect();
        lines.extend(relations.iter().copied().map(RelLine::Relation));
        for (block, angles) in rotations {
            lines.push(RelLine::Rotation {
                block: *block,
                angles: *angles,
                raw: angles.map(|a| a.to_string()).join("; "),
            });
        }
        Ok(Example {
            id,
            concept: concept.to_string(),
            relations,
            lines,
        })
    }

    /// Relations exactly as stored in the source file.
    pub fn stored_relations(&self) -> RelationSet {
        self.lines
            .iter()
            .filter_map(|l| match l {
                RelLine::Relation(t) => Some(*t),
                _ => None,
            })
            .collect()
    }

    pub fn rotations(&self) -> Vec<(BlockId, [f64; 3])> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                RelLine::Rotation { block, angles, .. } => Some((*block, *angles)),
                _ => None,
            })
            .collect()
    }

    pub fn to_rel_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            match line {
                RelLine::Comment(c) => out.push_str(c),
                RelLine::Relation(t) => {
                    let _ = write!(out, "{} {} {}", t.label, t.x, t.y);
                }
                RelLine::Rotation { block, raw, .. } => {
                    let _ = write!(out, "{block} <{raw}>");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Warning text when the relation count is outside the usual range.
    pub fn relation_count_warning(&self) -> Option<String> {
        let n = self.relations.len();
        let (lo, hi) = RELATION_COUNT_NORM;
        (n < lo || n > hi).then(|| {
            format!("example {} has {n} relations, outside the usual {lo}..={hi}", self.id)
        })
    }
}

/// Parses a `.rel` document.
pub fn parse_example(text: &str) -> Result<Example> {
    parse_example_with(0, "staircase", text)
}

pub fn parse_example_with(id: usize, concept: &str, text: &str) -> Result<Example> {
    let mut lines = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let err = |reason: String| Error::Parse { line: i + 1, reason };
        let line = raw_line.trim();
        if line.is_empty() {
            return Err(err("blank line".to_string()));
        }
        if line.starts_with('#') {
            lines.push(RelLine::Comment(raw_line.to_string()));
            continue;
        }
        let (head, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| err(format!("cannot read `{line}`")))?;
        let rest = rest.trim();
        if let Some(inner) = rest.strip_prefix('<') {
            let raw = inner
                .strip_suffix('>')
                .ok_or_else(|| err("unterminated rotation".to_string()))?;
            let block: BlockId = head
                .parse()
                .map_err(|_| err(format!("`{head}` is not a block name")))?;
            let values: Vec<f64> = raw
                .split(';')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(format!("bad rotation `{raw}`")))?;
            let angles: [f64; 3] = values
                .try_into()
                .map_err(|_| err("rotation needs three angles".to_string()))?;
            lines.push(RelLine::Rotation {
                block,
                angles,
                raw: raw.to_string(),
            });
            continue;
        }
        let label: Label = head.parse()?;
        let mut blocks = rest.split_whitespace();
        let (Some(a), Some(b), None) = (blocks.next(), blocks.next(), blocks.next()) else {
            return Err(err("relation needs exactly two blocks".to_string()));
        };
        let x: BlockId = a.parse().map_err(|_| err(format!("`{a}` is not a block name")))?;
        let y: BlockId = b.parse().map_err(|_| err(format!("`{b}` is not a block name")))?;
        let t = RelTriple::new(label, x, y).map_err(|e| err(e.to_string()))?;
        lines.push(RelLine::Relation(t));
    }
    let stored: RelationSet = lines
        .iter()
        .filter_map(|l| match l {
            RelLine::Relation(t) => Some(*t),
            _ => None,
        })
        .collect();
    if stored.is_empty() {
        return Err(Error::Parse {
            line: 0,
            reason: "no relations".to_string(),
        });
    }
    Ok(Example {
        id,
        concept: concept.to_string(),
        relations: closure(&stored)?,
        lines,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Half-width of the uniform depth jitter, in block edges.
    pub jitter: f64,
    /// Probability of a gap between two neighbouring columns.
    pub p_gap: f64,
    /// Probability that a block is slightly rotated.
    pub p_rot: f64,
    /// Maximum rotation magnitude in degrees.
    pub rot_max: f64,
    /// Probability that the staircase rises to the left.
    pub p_flip: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            jitter: 0.05,
            p_gap: 0.3,
            p_rot: 0.3,
            rot_max: 5.0,
            p_flip: 0.5,
        }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        NoiseParams {
            jitter: 0.0,
            p_gap: 0.0,
            p_rot: 0.0,
            rot_max: 0.0,
            p_flip: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Columns of height 1, 2, 3 from left to right.
    RisingRight,
    RisingLeft,
}

/// A staircase scene with its orientation.
#[derive(Debug, Clone)]
pub struct SynthStaircase {
    pub scene: Scene,
    pub orientation: Orientation,
}

/// One noisy 1-2-3 staircase built from `roster`.
pub fn synthesize_staircase<R: Rng>(
    roster: &[BlockId],
    noise: &NoiseParams,
    rng: &mut R,
) -> Result<SynthStaircase> {
    let mut names = roster.to_vec();
    names.shuffle(rng);
    let orientation = if rng.gen_bool(noise.p_flip.clamp(0.0, 1.0)) {
        Orientation::RisingLeft
    } else {
        Orientation::RisingRight
    };
    let heights = match orientation {
        Orientation::RisingRight => [1usize, 2, 3],
        Orientation::RisingLeft => [3, 2, 1],
    };
    let mut xs = [0.0f64; 3];
    for c in 1..3 {
        let gap = if rng.gen_bool(noise.p_gap.clamp(0.0, 1.0)) {
            DC_GAP + rng.gen_range(0.0..=noise.jitter.max(0.0)) * BLOCK_SIZE
        } else {
            0.0
        };
        xs[c] = xs[c - 1] + BLOCK_SIZE + gap;
    }
    let shift = xs[1];
    let mut poses = Vec::new();
    let mut name = names.into_iter();
    for (c, h) in heights.iter().enumerate() {
        for level in 0..*h {
            let id = name.next().ok_or_else(|| {
                Error::InvalidScene("roster needs at least six blocks".to_string())
            })?;
            let z = if noise.jitter > 0.0 {
                rng.gen_range(-noise.jitter..noise.jitter) * BLOCK_SIZE
            } else {
                0.0
            };
            let mut pose = Pose::at(xs[c] - shift, level as f64 * BLOCK_SIZE, z);
            if rng.gen_bool(noise.p_rot.clamp(0.0, 1.0)) {
                pose.rotation = [0; 3].map(|_| {
                    let a = rng.gen_range(-noise.rot_max..=noise.rot_max);
                    let a = (a.rem_euclid(360.0) * 1e4).round() / 1e4;
                    if a >= 360.0 {
                        0.0
                    } else {
                        a
                    }
                });
            }
            poses.push((id, pose));
        }
    }
    Ok(SynthStaircase {
        scene: Scene::from_poses(poses)?,
        orientation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub concept: String,
    pub seed: Option<u64>,
    pub noise: Option<NoiseParams>,
}

impl Default for CorpusMeta {
    fn default() -> Self {
        CorpusMeta {
            concept: "staircase".to_string(),
            seed: None,
            noise: None,
        }
    }
}

/// An encoded relation triple: block indices and relation-label index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Encoded {
    pub x: usize,
    pub y: usize,
    pub rel: usize,
}

/// One position of a padded sequence.
pub type Slot = Option<Encoded>;

/// Index tables shared by the networks: block roster, relation labels, and
/// the triple-token vocabulary (token 0 is PAD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub roster: Vec<BlockId>,
    pub relations: Vec<Label>,
    /// Token `i + 1` is `tokens[i]`.
    pub tokens: Vec<Encoded>,
    /// Padded sequence length: the longest example's relation count.
    pub n: usize,
}

pub const PAD: usize = 0;

impl CorpusIndex {
    pub fn block_index(&self, b: BlockId) -> Option<usize> {
        self.roster.iter().position(|r| *r == b)
    }

    /// Triples in roster order, the order every network input uses.
    pub fn ordered(&self, rels: &RelationSet) -> Vec<RelTriple> {
        rels.ordered_by(&self.roster)
    }

    pub fn relation_index(&self, l: Label) -> Option<usize> {
        self.relations.iter().position(|r| *r == l)
    }

    pub fn token_of(&self, e: Encoded) -> Option<usize> {
        self.tokens.iter().position(|t| *t == e).map(|i| i + 1)
    }

    /// Number of token classes including PAD.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn encode_triple(&self, t: &RelTriple) -> Result<Encoded> {
        let unknown = || Error::UnknownLabel(t.token());
        Ok(Encoded {
            x: self.block_index(t.x).ok_or_else(unknown)?,
            y: self.block_index(t.y).ok_or_else(unknown)?,
            rel: self.relation_index(t.label).ok_or_else(unknown)?,
        })
    }

    pub fn decode_triple(&self, e: Encoded) -> Result<RelTriple> {
        let bad = || Error::UnknownLabel(format!("({},{},{})", e.x, e.y, e.rel));
        let x = *self.roster.get(e.x).ok_or_else(bad)?;
        let y = *self.roster.get(e.y).ok_or_else(bad)?;
        let label = *self.relations.get(e.rel).ok_or_else(bad)?;
        RelTriple::new(label, x, y)
    }

    /// Encodes triples, right-padded to `len` (at least `n`).
    pub fn encode_padded(&self, triples: &[RelTriple], len: usize) -> Result<Vec<Slot>> {
        if triples.len() > len {
            return Err(Error::ShapeMismatch(format!(
                "{} triples do not fit in {len} positions",
                triples.len()
            )));
        }
        let mut out = triples
            .iter()
            .map(|t| self.encode_triple(t).map(Some))
            .collect::<Result<Vec<_>>>()?;
        out.resize(len, None);
        Ok(out)
    }

    /// Token ids for triples, right-padded with PAD to `len`.
    pub fn tokens_padded(&self, triples: &[RelTriple], len: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(len);
        for t in triples {
            let e = self.encode_triple(t)?;
            out.push(self.token_of(e).ok_or_else(|| Error::UnknownLabel(t.token()))?);
        }
        if out.len() > len {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens do not fit in {len} positions",
                out.len()
            )));
        }
        out.resize(len, PAD);
        Ok(out)
    }

    pub fn decode_token(&self, token: usize) -> Option<Result<RelTriple>> {
        (token != PAD).then(|| {
            self.tokens
                .get(token - 1)
                .ok_or_else(|| Error::UnknownLabel(format!("token {token}")))
                .and_then(|e| self.decode_triple(*e))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub index: CorpusIndex,
    pub meta: CorpusMeta,
}

impl Corpus {
    /// Builds index tables in first-seen order over the examples. The block
    /// roster follows the stored lines; labels and tokens follow the
    /// roster-ordered triples.
    pub fn new(examples: Vec<Example>, meta: CorpusMeta) -> Result<Corpus> {
        if examples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut roster: Vec<BlockId> = Vec::new();
        let mut note = |b: BlockId| {
            if !roster.contains(&b) {
                roster.push(b);
            }
        };
        for e in &examples {
            for line in &e.lines {
                match line {
                    RelLine::Relation(t) => {
                        note(t.x);
                        note(t.y);
                    }
                    RelLine::Rotation { block, .. } => note(*block),
                    RelLine::Comment(_) => {}
                }
            }
        }
        for e in &examples {
            e.relations.blocks().into_iter().for_each(&mut note);
        }
        let mut relations = Vec::new();
        for e in &examples {
            for t in e.relations.ordered_by(&roster) {
                if !relations.contains(&t.label) {
                    relations.push(t.label);
                }
            }
        }
        let mut index = CorpusIndex {
            roster,
            relations,
            tokens: Vec::new(),
            n: examples.iter().map(|e| e.relations.len()).max().unwrap_or(0),
        };
        let mut seen = HashMap::new();
        for e in &examples {
            for t in &index.ordered(&e.relations) {
                let enc = index.encode_triple(t)?;
                if let std::collections::hash_map::Entry::Vacant(v) = seen.entry(enc) {
                    v.insert(index.tokens.len());
                    index.tokens.push(enc);
                }
            }
        }
        Ok(Corpus {
            examples,
            index,
            meta,
        })
    }

    /// The same corpus with every block renamed through `map`; blocks not in
    /// `map` keep their id. Line order is preserved, so the roster is renamed
    /// position by position.
    pub fn relabeled(&self, map: &BTreeMap<BlockId, BlockId>) -> Result<Corpus> {
        let f = |b: BlockId| map.get(&b).copied().unwrap_or(b);
        let g = |t: &RelTriple| RelTriple::new(t.label, f(t.x), f(t.y));
        let examples = self
            .examples
            .iter()
            .map(|e| {
                let lines = e
                    .lines
                    .iter()
                    .map(|l| {
                        Ok(match l {
                            RelLine::Relation(t) => RelLine::Relation(g(t)?),
                            RelLine::Rotation { block, angles, raw } => RelLine::Rotation {
                                block: f(*block),
                                angles: *angles,
                                raw: raw.clone(),
                            },
                            RelLine::Comment(c) => RelLine::Comment(c.clone()),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let triples = e.relations.iter().map(g).collect::<Result<Vec<_>>>()?;
                Ok(Example {
                    id: e.id,
                    concept: e.concept.clone(),
                    relations: RelationSet::from_triples(triples),
                    lines,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(examples, self.meta.clone())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n(&self) -> usize {
        self.index.n
    }

    pub fn warnings(&self) -> Vec<String> {
        self.examples
            .iter()
            .filter_map(Example::relation_count_warning)
            .collect()
    }

    /// Writes one `.rel` file per example plus `corpus.meta`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut meta = String::new();
        let _ = writeln!(meta, "# {}", crate::VERSION);
        let _ = writeln!(meta, "concept={}", self.meta.concept);
        if let Some(seed) = self.meta.seed {
            let _ = writeln!(meta, "seed={seed}");
        }
        if let Some(n) = &self.meta.noise {
            let _ = writeln!(meta, "noise.jitter={}", n.jitter);
            let _ = writeln!(meta, "noise.p_gap={}", n.p_gap);
            let _ = writeln!(meta, "noise.p_rot={}", n.p_rot);
            let _ = writeln!(meta, "noise.rot_max={}", n.rot_max);
            let _ = writeln!(meta, "noise.p_flip={}", n.p_flip);
        }
        let _ = writeln!(
            meta,
            "roster={}",
            self.index.roster.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";")
        );
        let _ = writeln!(
            meta,
            "relations={}",
            self.index.relations.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";")
        );
        let _ = writeln!(meta, "n={}", self.index.n);
        for e in &self.examples {
            let file = format!("example_{:02}.rel", e.id);
            fs::write(dir.join(&file), e.to_rel_text())?;
            let _ = writeln!(meta, "file={file}");
        }
        fs::write(dir.join("corpus.meta"), meta)?;
        Ok(())
    }

    /// Reads a corpus directory. Without `corpus.meta`, every `.rel` file is
    /// loaded in file-name order.
    pub fn read_dir(dir: &Path) -> Result<Corpus> {
        let meta_path = dir.join("corpus.meta");
        let mut meta = CorpusMeta::default();
        let mut files = Vec::new();
        let mut declared: BTreeMap<String, String> = BTreeMap::new();
        if meta_path.exists() {
            let text = fs::read_to_string(&meta_path)?;
            let mut noise = NoiseParams::default();
            let mut has_noise = false;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                    line: i + 1,
                    reason: format!("corpus.meta: expected key=value, got `{line}`"),
                })?;
                let num = |v: &str| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        reason: format!("corpus.meta: bad number `{v}`"),
                    })
                };
                match k {
                    "concept" => meta.concept = v.to_string(),
                    "seed" => {
                        meta.seed = Some(v.parse().map_err(|_| Error::Parse {
                            line: i + 1,
                            reason: format!("corpus.meta: bad seed `{v}`"),
                        })?)
                    }
                    "noise.jitter" => (noise.jitter, has_noise) = (num(v)?, true),
                    "noise.p_gap" => (noise.p_gap, has_noise) = (num(v)?, true),
                    "noise.p_rot" => (noise.p_rot, has_noise) = (num(v)?, true),
                    "noise.rot_max" => (noise.rot_max, has_noise) = (num(v)?, true),
                    "noise.p_flip" => (noise.p_flip, has_noise) = (num(v)?, true),
                    "file" => files.push(v.to_string()),
                    other => {
                        declared.insert(other.to_string(), v.to_string());
                    }
                }
            }
            if has_noise {
                meta.noise = Some(noise);
            }
        } else {
            let mut names: Vec<String> = fs::read_dir(dir)?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".rel"))
                .collect();
            names.sort();
            files = names;
        }
        let mut examples = Vec::with_capacity(files.len());
        for (id, file) in files.iter().enumerate() {
            let text = fs::read_to_string(dir.join(file))?;
            let ex = parse_example_with(id, &meta.concept, &text).map_err(|e| match e {
                Error::Parse { line, reason } => Error::Parse {
                    line,
                    reason: format!("{file}: {reason}"),
                },
                other => other,
            })?;
            examples.push(ex);
        }
        let corpus = Corpus::new(examples, meta)?;
        if let Some(roster) = declared.get("roster") {
            let have = corpus
                .index
                .roster
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(";");
            if *roster != have {
                return Err(Error::DataMismatch(format!(
                    "corpus.meta declares roster `{roster}` but the files give `{have}`"
                )));
            }
        }
        if let Some(rels) = declared.get("relations") {
            let have = corpus
                .index
                .relations
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(";");
            if *rels != have {
                return Err(Error::DataMismatch(format!(
                    "corpus.meta declares relations `{rels}` but the files give `{have}`"
                )));
            }
        }
        Ok(corpus)
    }
}

/// Synthesizes `count` noisy staircases, deterministically per seed.
pub fn synthesize_corpus(count: usize, noise: &NoiseParams, seed: u64) -> Result<Corpus> {
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    let roster: Vec<BlockId> = DEFAULT_ROSTER.iter().map(|n| BlockId(*n)).collect();
    let mut rng = rng_for(seed, "synth");
    let mut examples = Vec::with_capacity(count);
    for id in 0..count {
        let stair = synthesize_staircase(&roster, noise, &mut rng)?;
        let rels = stair.scene.extract_relations()?;
        let rotations: Vec<(BlockId, [f64; 3])> = stair
            .scene
            .blocks()
            .map(|(b, p)| (b, p.rotation))
            .collect();
        let header = format!("# {} seed={seed} example={id}", crate::VERSION);
        examples.push(Example::from_relations(
            id,
            "staircase",
            &rels,
            &rotations,
            Some(header),
        )?);
    }
    Corpus::new(
        examples,
        CorpusMeta {
            concept: "staircase".to_string(),
            seed: Some(seed),
            noise: Some(*noise),
        },
    )
}

/// A partial build state and the relations still missing from its example.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowPair {
    pub example: usize,
    pub window: Vec<RelTriple>,
    pub holdout: Vec<RelTriple>,
}

impl WindowPair {
    /// Canonical text of the window, used for tie-breaking.
    pub fn window_text(&self) -> String {
        self.window
            .iter()
            .map(RelTriple::token)
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn all_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Window/holdout splits for every example at every window length
/// `1..len-1`. All subsets are enumerated when there are at most `cap` of
/// them; otherwise `cap` distinct subsets are sampled.
pub fn make_training_pairs(corpus: &Corpus, cap: usize, seed: u64) -> Vec<WindowPair> {
    let mut rng = rng_for(seed, "windows");
    let mut pairs = Vec::new();
    for ex in &corpus.examples {
        let triples = corpus.index.ordered(&ex.relations);
        let m = triples.len();
        for len in 1..m {
            let subsets = if binomial(m, len) <= cap as u128 {
                all_subsets(m, len)
            } else {
                let mut chosen = BTreeSet::new();
                while chosen.len() < cap {
                    let mut idx = rand::seq::index::sample(&mut rng, m, len).into_vec();
                    idx.sort_unstable();
                    chosen.insert(idx);
                }
                chosen.into_iter().collect()
            };
            for subset in subsets {
                let mut in_window = vec![false; m];
                for i in &subset {
                    in_window[*i] = true;
                }
                let (window, holdout): (Vec<_>, Vec<_>) =
                    triples.iter().zip(&in_window).partition(|(_, w)| **w);
                pairs.push(WindowPair {
                    example: ex.id,
                    window: window.into_iter().map(|(t, _)| *t).collect(),
                    holdout: holdout.into_iter().map(|(t, _)| *t).collect(),
                });
            }
        }
    }
    pairs
}

/// Encodes triples against the corpus index, padded to the corpus length `n`.
pub fn encode(triples: &[RelTriple], corpus: &Corpus) -> Result<Vec<Slot>> {
    corpus.index.encode_padded(triples, corpus.n())
}

/// Inverse of [`encode`]; stops at the first PAD.
pub fn decode(seq: &[Slot], corpus: &Corpus) -> Result<Vec<RelTriple>> {
    seq.iter()
        .map_while(|s| *s)
        .map(|e| corpus.index.decode_triple(e))
        .collect()
}
