//! Geometric blocks world.
//!
//! Blocks are unit cubes. A pose's position is the center of the block's
//! bottom face (x right, y up, z toward the viewer), so a block resting on
//! the table has `y = 0`. Only placed blocks are stored in a [`Scene`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsr::{closure, Atom, BlockId, Label, RelTriple, RelationSet};

/// Block edge length.
pub const BLOCK_SIZE: f64 = 1.0;
/// Contact tolerance.
pub const CONTACT_EPS: f64 = 1e-3 * BLOCK_SIZE;
/// Minimum centroid x-offset for `left`/`right`.
pub const LATERAL_DELTA: f64 = 0.5 * BLOCK_SIZE;
/// Gap left between blocks by `leftdc`/`rightdc` placements.
pub const DC_GAP: f64 = 0.5 * BLOCK_SIZE;
/// Rotations below this magnitude (degrees, per axis) are ignored by the geometry.
const ROTATION_IGNORE_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    /// Euler angles in degrees.
    pub rotation: [f64; 3],
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Pose {
            position: [x, y, z],
            rotation: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableBounds {
    pub min_x: f64,
    pub max_x: f64,
    pub min_z: f64,
    pub max_z: f64,
}

impl Default for TableBounds {
    fn default() -> Self {
        TableBounds {
            min_x: -6.0,
            max_x: 6.0,
            min_z: -3.0,
            max_z: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoveRelation {
    On,
    Left,
    Right,
    LeftDc,
    RightDc,
}

impl MoveRelation {
    pub const ALL: [MoveRelation; 5] = [
        MoveRelation::On,
        MoveRelation::Left,
        MoveRelation::Right,
        MoveRelation::LeftDc,
        MoveRelation::RightDc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MoveRelation::On => "on",
            MoveRelation::Left => "left",
            MoveRelation::Right => "right",
            MoveRelation::LeftDc => "leftdc",
            MoveRelation::RightDc => "rightdc",
        }
    }

    /// Offset of the subject's pose from the target's pose.
    fn offset(self) -> [f64; 3] {
        let s = BLOCK_SIZE;
        match self {
            MoveRelation::On => [0.0, s, 0.0],
            MoveRelation::Left => [-s, 0.0, 0.0],
            MoveRelation::Right => [s, 0.0, 0.0],
            MoveRelation::LeftDc => [-(s + DC_GAP), 0.0, 0.0],
            MoveRelation::RightDc => [s + DC_GAP, 0.0, 0.0],
        }
    }
}

impl fmt::Display for MoveRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MoveRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MoveRelation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("unknown move relation `{s}`"),
            })
    }
}

/// `put(subject, relation(target))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub subject: BlockId,
    pub relation: MoveRelation,
    pub target: BlockId,
}

impl Move {
    pub fn new(subject: BlockId, relation: MoveRelation, target: BlockId) -> Self {
        Move {
            subject,
            relation,
            target,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "put({},{}({}))", self.subject, self.relation, self.target)
    }
}

impl FromStr for Move {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 0,
            reason: format!("`{s}` is not a put(block,rel(block)) term"),
        };
        let inner = s
            .trim()
            .strip_prefix("put(")
            .and_then(|r| r.strip_suffix("))"))
            .ok_or_else(bad)?;
        let (subject, rest) = inner.split_once(',').ok_or_else(bad)?;
        let (relation, target) = rest.split_once('(').ok_or_else(bad)?;
        Ok(Move {
            subject: subject.parse()?,
            relation: relation.parse()?,
            target: target.parse()?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
}

impl Aabb {
    fn of(pose: &Pose) -> Aabb {
        let half = half_extents(pose.rotation);
        let [x, y, z] = pose.position;
        let cy = y + BLOCK_SIZE / 2.0;
        Aabb {
            min: [x - half[0], cy - half[1], z - half[2]],
            max: [x + half[0], cy + half[1], z + half[2]],
        }
    }

    /// Signed gap along an axis; negative means the extents overlap.
    fn separation(&self, other: &Aabb, axis: usize) -> f64 {
        (other.min[axis] - self.max[axis]).max(self.min[axis] - other.max[axis])
    }

    fn center(&self, axis: usize) -> f64 {
        (self.min[axis] + self.max[axis]) / 2.0
    }
}

fn wrap_degrees(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

fn half_extents(rotation: [f64; 3]) -> [f64; 3] {
    let h = BLOCK_SIZE / 2.0;
    if rotation
        .iter()
        .all(|a| wrap_degrees(*a).abs() < ROTATION_IGNORE_DEG)
    {
        return [h; 3];
    }
    let [rx, ry, rz] = rotation.map(|a| a.to_radians());
    let (sx, cx) = rx.sin_cos();
    let (sy, cy) = ry.sin_cos();
    let (sz, cz) = rz.sin_cos();
    // R = Rz * Ry * Rx
    let r = [
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ];
    [0, 1, 2].map(|i| h * (r[i][0].abs() + r[i][1].abs() + r[i][2].abs()))
}

/// An immutable snapshot of the placed blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    blocks: BTreeMap<BlockId, Pose>,
    pub bounds: TableBounds,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            blocks: BTreeMap::new(),
            bounds: TableBounds::default(),
        }
    }
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    /// A scene holding only `anchor`, resting on the table at the origin.
    pub fn with_anchor(anchor: BlockId) -> Self {
        let mut scene = Scene::new();
        scene.blocks.insert(anchor, Pose::at(0.0, 0.0, 0.0));
        scene
    }

    /// Builds a scene from explicit poses and checks it.
    pub fn from_poses(poses: impl IntoIterator<Item = (BlockId, Pose)>) -> Result<Self> {
        let scene = Scene {
            blocks: poses.into_iter().collect(),
            bounds: TableBounds::default(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn pose(&self, id: BlockId) -> Option<&Pose> {
        self.blocks.get(&id)
    }

    pub fn is_placed(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (BlockId, &Pose)> {
        self.blocks.iter().map(|(id, p)| (*id, p))
    }

    pub fn block_ids(&self) -> Vec<BlockId> {
        self.blocks.keys().copied().collect()
    }

    /// Checks support, interpenetration, and table bounds.
    pub fn validate(&self) -> Result<()> {
        let boxes: Vec<(BlockId, Aabb)> = self
            .blocks
            .iter()
            .map(|(id, p)| (*id, Aabb::of(p)))
            .collect();
        for (i, (id, a)) in boxes.iter().enumerate() {
            let pose = &self.blocks[id];
            if pose.position[1] < -CONTACT_EPS {
                return Err(Error::InvalidScene(format!("{id} is below the table")));
            }
            if !self.footprint_in_bounds(a) {
                return Err(Error::InvalidScene(format!("{id} is off the table")));
            }
            for (other, b) in &boxes[i + 1..] {
                if interpenetrates(a, b) {
                    return Err(Error::InvalidScene(format!("{id} and {other} interpenetrate")));
                }
            }
            if !self.is_supported(a, Some(*id)) {
                return Err(Error::InvalidScene(format!("{id} is not supported")));
            }
        }
        Ok(())
    }

    fn footprint_in_bounds(&self, a: &Aabb) -> bool {
        a.min[0] >= self.bounds.min_x - CONTACT_EPS
            && a.max[0] <= self.bounds.max_x + CONTACT_EPS
            && a.min[2] >= self.bounds.min_z - CONTACT_EPS
            && a.max[2] <= self.bounds.max_z + CONTACT_EPS
    }

    fn is_supported(&self, a: &Aabb, skip: Option<BlockId>) -> bool {
        if a.min[1].abs() <= CONTACT_EPS {
            return true;
        }
        self.blocks.iter().any(|(id, p)| {
            if Some(*id) == skip {
                return false;
            }
            let b = Aabb::of(p);
            (b.max[1] - a.min[1]).abs() <= CONTACT_EPS && xz_overlap(a, &b)
        })
    }

    /// True when some block rests on top of `id`.
    pub fn is_covered(&self, id: BlockId) -> bool {
        let Some(pose) = self.blocks.get(&id) else {
            return false;
        };
        let a = Aabb::of(pose);
        self.blocks.iter().any(|(other, p)| {
            if *other == id {
                return false;
            }
            let b = Aabb::of(p);
            (b.min[1] - a.max[1]).abs() <= CONTACT_EPS && xz_overlap(&a, &b)
        })
    }

    /// Where a new block would go for `relation(target)`, if that is legal.
    pub fn placement(&self, relation: MoveRelation, target: BlockId) -> Result<Pose> {
        let probe = BlockId(u16::MAX);
        let t = self.blocks.get(&target).ok_or(Error::TargetNotPlaced(target))?;
        if relation == MoveRelation::On && self.is_covered(target) {
            return Err(Error::TargetOccupied(target));
        }
        let off = relation.offset();
        let pose = Pose::at(
            t.position[0] + off[0],
            t.position[1] + off[1],
            t.position[2] + off[2],
        );
        let a = Aabb::of(&pose);
        if !self.footprint_in_bounds(&a) {
            return Err(Error::OutOfBounds(probe));
        }
        if let Some((other, _)) = self
            .blocks
            .iter()
            .find(|(_, p)| interpenetrates(&a, &Aabb::of(p)))
        {
            return Err(Error::IllegalPlacement {
                block: probe,
                reason: format!("slot is occupied by {other}"),
            });
        }
        if !self.is_supported(&a, None) {
            return Err(Error::IllegalPlacement {
                block: probe,
                reason: "nothing underneath".to_string(),
            });
        }
        Ok(pose)
    }

    /// Placed blocks on which `relation` can be instantiated.
    pub fn legal_targets(&self, relation: MoveRelation) -> Vec<BlockId> {
        self.blocks
            .keys()
            .copied()
            .filter(|t| self.placement(relation, *t).is_ok())
            .collect()
    }

    /// Returns the scene after `mv`; the subject must not be placed yet.
    pub fn apply_move(&self, mv: &Move) -> Result<Scene> {
        if self.blocks.contains_key(&mv.subject) {
            return Err(Error::SubjectAlreadyMoved(mv.subject));
        }
        let pose = self.placement(mv.relation, mv.target).map_err(|e| match e {
            Error::OutOfBounds(_) => Error::OutOfBounds(mv.subject),
            Error::IllegalPlacement { reason, .. } => Error::IllegalPlacement {
                block: mv.subject,
                reason,
            },
            other => other,
        })?;
        let mut next = self.clone();
        next.blocks.insert(mv.subject, pose);
        Ok(next)
    }

    /// Qualitative relations between every ordered pair of placed blocks,
    /// closure applied.
    pub fn extract_relations(&self) -> Result<RelationSet> {
        self.validate()?;
        let boxes: Vec<(BlockId, Aabb)> = self
            .blocks
            .iter()
            .map(|(id, p)| (*id, Aabb::of(p)))
            .collect();
        let mut rels = RelationSet::new();
        for (x, a) in &boxes {
            for (y, b) in &boxes {
                if x == y {
                    continue;
                }
                if let Some(label) = pair_label(a, b) {
                    rels.push(RelTriple { x: *x, y: *y, label });
                }
            }
        }
        closure(&rels)
    }

    /// Mirror image across the plane x = 0.
    pub fn mirrored(&self) -> Scene {
        Scene {
            blocks: self
                .blocks
                .iter()
                .map(|(id, p)| {
                    let mut q = *p;
                    q.position[0] = -q.position[0];
                    (*id, q)
                })
                .collect(),
            bounds: TableBounds {
                min_x: -self.bounds.max_x,
                max_x: -self.bounds.min_x,
                ..self.bounds
            },
        }
    }

    pub fn renamed(&self, map: impl Fn(BlockId) -> BlockId) -> Scene {
        Scene {
            blocks: self.blocks.iter().map(|(id, p)| (map(*id), *p)).collect(),
            bounds: self.bounds,
        }
    }

    /// One line per block: `<name> <x;y;z> <rx;ry;rz>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, p) in &self.blocks {
            let [x, y, z] = p.position;
            let [rx, ry, rz] = p.rotation;
            out.push_str(&format!("{id} <{x};{y};{z}> <{rx};{ry};{rz}>\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scene> {
        let mut blocks = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| Error::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.split_whitespace();
            let name = parts.next().ok_or_else(|| err("missing block name"))?;
            let id: BlockId = name.parse().map_err(|_| err("bad block name"))?;
            let pos = parse_vec3(parts.next().ok_or_else(|| err("missing position"))?)
                .ok_or_else(|| err("bad position"))?;
            let rot = match parts.next() {
                Some(r) => parse_vec3(r).ok_or_else(|| err("bad rotation"))?,
                None => [0.0; 3],
            };
            if parts.next().is_some() {
                return Err(err("trailing fields"));
            }
            if blocks
                .insert(id, Pose { position: pos, rotation: rot })
                .is_some()
            {
                return Err(err("duplicate block"));
            }
        }
        let scene = Scene {
            blocks,
            bounds: TableBounds::default(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

fn parse_vec3(s: &str) -> Option<[f64; 3]> {
    let inner = s.strip_prefix('<')?.strip_suffix('>')?;
    let v: Vec<f64> = inner
        .split(';')
        .map(|p| p.trim().parse::<f64>().ok())
        .collect::<Option<_>>()?;
    v.try_into().ok()
}

fn xz_overlap(a: &Aabb, b: &Aabb) -> bool {
    a.separation(b, 0) < -CONTACT_EPS && a.separation(b, 2) < -CONTACT_EPS
}

fn interpenetrates(a: &Aabb, b: &Aabb) -> bool {
    (0..3).all(|axis| a.separation(b, axis) < -CONTACT_EPS)
}

fn face_contact(a: &Aabb, b: &Aabb) -> bool {
    let seps = [0, 1, 2].map(|axis| a.separation(b, axis));
    let touching_axes = seps.iter().filter(|s| s.abs() <= CONTACT_EPS).count();
    let overlapping_axes = seps.iter().filter(|s| **s < -CONTACT_EPS).count();
    touching_axes == 1 && overlapping_axes == 2
}

fn pair_label(a: &Aabb, b: &Aabb) -> Option<Label> {
    let mut atoms = Vec::new();
    let same_level = a.separation(b, 1) < -CONTACT_EPS;
    let dx = b.center(0) - a.center(0);
    if same_level && dx > LATERAL_DELTA {
        atoms.push(Atom::Left);
    }
    if same_level && -dx > LATERAL_DELTA {
        atoms.push(Atom::Right);
    }
    let touching = face_contact(a, b);
    if touching {
        atoms.push(Atom::Touching);
    }
    if a.center(1) < b.center(1) && xz_overlap(a, b) {
        atoms.push(Atom::Under);
        if touching && (a.max[1] - b.min[1]).abs() <= CONTACT_EPS {
            atoms.push(Atom::Support);
        }
    }
    Label::from_atoms(atoms)
}
