//! Automated staircase rubric, benchmark statistics and rendering.
//!
//! Blocks are grouped into lateral slots by x-centroid; a slot's height is
//! its block count. The rubric rewards the longest strictly increasing run
//! of contiguous slots (read left-to-right or right-to-left):
//!
//! `score = 10 · blocks_in_run / B − (slots taller than 3)`, floored at 0,
//! where a run needs at least two slots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::heuristics::HeuristicKind;
use crate::par::Exec;
use crate::planner::{GenerationConfig, Generator};
use crate::scene::{Scene, BLOCK_SIZE};

/// Blocks whose x-centroids lie within this distance of a slot's first
/// member share the slot.
pub const SLOT_RADIUS: f64 = 0.75 * BLOCK_SIZE;
/// Neighboring slots closer than this are contiguous.
pub const CONTIGUOUS_SPACING: f64 = 2.0 * BLOCK_SIZE;
pub const MAX_HEIGHT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Heights of the occupied slots, left to right.
    pub heights: Vec<usize>,
    /// Slots in the best strictly increasing contiguous run.
    pub run_length: usize,
    pub run_blocks: usize,
    pub score: f64,
    pub flags: Vec<String>,
}

/// Slot x-positions (left to right) and their heights.
fn slots(scene: &Scene) -> Vec<(f64, usize)> {
    let mut xs: Vec<f64> = scene.blocks().map(|(_, p)| p.position[0]).collect();
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for x in xs {
        match out.last_mut() {
            Some((first, sum, n)) if x - *first <= SLOT_RADIUS => {
                *sum += x;
                *n += 1;
            }
            _ => out.push((x, x, 1)),
        }
    }
    out.into_iter().map(|(_, sum, n)| (sum / n as f64, n)).collect()
}

/// Best strictly increasing contiguous run over `slots`: `(length, blocks)`.
fn best_run(slots: &[(f64, usize)]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut len = 0;
    let mut blocks = 0;
    for (i, (x, h)) in slots.iter().enumerate() {
        let extends = i > 0 && {
            let (px, ph) = slots[i - 1];
            x - px < CONTIGUOUS_SPACING && *h > ph
        };
        if extends {
            len += 1;
            blocks += h;
        } else {
            len = 1;
            blocks = *h;
        }
        if len >= 2 && (blocks, len) > (best.1, best.0) {
            best = (len, blocks);
        }
    }
    best
}

pub fn staircase_score(scene: &Scene) -> Result<ValidityReport> {
    scene.validate()?;
    if scene.is_empty() {
        return Err(Error::InvalidScene("no blocks".to_string()));
    }
    let s = slots(scene);
    let heights: Vec<usize> = s.iter().map(|(_, h)| *h).collect();
    let rev: Vec<(f64, usize)> = s.iter().rev().map(|(x, h)| (-x, *h)).collect();
    let (l1, b1) = best_run(&s);
    let (l2, b2) = best_run(&rev);
    let (run_length, run_blocks) = if (b2, l2) > (b1, l1) { (l2, b2) } else { (l1, b1) };
    let tall = heights.iter().filter(|h| **h > MAX_HEIGHT).count();
    let score = (10.0 * run_blocks as f64 / scene.len() as f64 - tall as f64).max(0.0);

    let mut flags = Vec::new();
    let contiguous = s.windows(2).all(|w| w[1].0 - w[0].0 < CONTIGUOUS_SPACING);
    if contiguous && (heights == [1, 3, 2] || heights == [2, 3, 1]) {
        flags.push("1-3-2 configuration".to_string());
    }
    if heights.iter().max() == Some(&2) {
        flags.push("two-level".to_string());
    }
    if heights.iter().all(|h| *h == 1) && heights.len() > 1 {
        flags.push("flat".to_string());
    }
    Ok(ValidityReport {
        heights,
        run_length,
        run_blocks,
        score,
        flags,
    })
}

/// Direction in which a staircase's heights increase, if it is one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointing {
    /// Tallest column on the right.
    Right,
    Left,
}

pub fn pointing(scene: &Scene) -> Option<Pointing> {
    let s = slots(scene);
    let (l1, b1) = best_run(&s);
    let rev: Vec<(f64, usize)> = s.iter().rev().map(|(x, h)| (-x, *h)).collect();
    let (l2, b2) = best_run(&rev);
    match ((l1, b1), (l2, b2)) {
        ((0, _), (0, _)) => None,
        (a, b) if (a.1, a.0) > (b.1, b.0) => Some(Pointing::Right),
        (a, b) if (b.1, b.0) > (a.1, a.0) => Some(Pointing::Left),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub heuristic: HeuristicKind,
    pub seed: u64,
    pub score: f64,
    pub flags: Vec<String>,
    pub plan: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub heuristic: HeuristicKind,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single run.
    pub std_dev: f64,
    pub scores: Vec<f64>,
}

impl ScoreSummary {
    pub fn from_scores(heuristic: HeuristicKind, scores: Vec<f64>) -> ScoreSummary {
        let n = scores.len() as f64;
        let mean = if scores.is_empty() { 0.0 } else { scores.iter().sum::<f64>() / n };
        let std_dev = if scores.len() < 2 {
            0.0
        } else {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        ScoreSummary {
            heuristic,
            mean,
            std_dev,
            scores,
        }
    }
}

/// Scores one seeded generation; a stuck run scores 0 and is flagged.
pub fn run_one(generator: &Generator<'_>, config: &GenerationConfig) -> Result<RunResult> {
    let mut result = RunResult {
        heuristic: config.heuristic,
        seed: config.seed,
        score: 0.0,
        flags: Vec::new(),
        plan: None,
    };
    match generator.generate(config) {
        Ok(plan) => {
            let report = staircase_score(&plan.execute()?)?;
            result.score = report.score;
            result.flags = report.flags;
            result.plan = Some(plan.to_text());
        }
        Err(Error::GenerationStuck { step, .. }) => result.flags.push(format!("stuck at step {step}")),
        Err(e) => return Err(e),
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<ScoreSummary>,
}

impl BenchReport {
    pub fn summary(&self, kind: HeuristicKind) -> Option<&ScoreSummary> {
        self.summaries.iter().find(|s| s.heuristic == kind)
    }

    /// Per-run rows, then the summary block.
    pub fn to_table(&self) -> String {
        let mut out = String::from("heuristic,seed,score,flags\n");
        for r in &self.runs {
            let _ = writeln!(out, "{},{},{:.4},{}", r.heuristic, r.seed, r.score, r.flags.join(";"));
        }
        out.push('\n');
        out.push_str("heuristic\tmu\tsigma\n");
        for s in &self.summaries {
            let _ = writeln!(out, "{}\t{:.4}\t{:.4}", s.heuristic, s.mean, s.std_dev);
        }
        out
    }
}

/// `runs` seeded generations per heuristic (seeds `base_seed..base_seed+runs`).
pub fn bench(
    corpus: &Corpus,
    bundle: &ModelBundle,
    heuristics: &[HeuristicKind],
    runs: usize,
    base_seed: u64,
    exec: Exec,
) -> Result<BenchReport> {
    let generator = Generator::new(corpus, bundle)?;
    let configs: Vec<GenerationConfig> = heuristics
        .iter()
        .flat_map(|h| (0..runs as u64).map(move |i| GenerationConfig::new(*h, base_seed + i)))
        .collect();
    let runs: Vec<RunResult> = exec
        .map(&configs, |c| run_one(&generator, c))
        .into_iter()
        .collect::<Result<_>>()?;
    let summaries = heuristics
        .iter()
        .map(|h| {
            let scores = runs.iter().filter(|r| r.heuristic == *h).map(|r| r.score).collect();
            ScoreSummary::from_scores(*h, scores)
        })
        .collect();
    Ok(BenchReport { runs, summaries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Ascii,
    Svg,
}

impl std::str::FromStr for RenderFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascii" | "txt" => Ok(RenderFormat::Ascii),
            "svg" => Ok(RenderFormat::Svg),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

const PALETTE: [&str; 10] = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#bcf60c", "#fabebe",
];

/// Front view cells `(column, row, block)`, columns from the leftmost block.
fn cells(scene: &Scene) -> Vec<(i64, i64, u16)> {
    let xmin = scene.blocks().map(|(_, p)| p.position[0]).fold(f64::INFINITY, f64::min);
    scene
        .blocks()
        .map(|(id, p)| {
            let col = ((p.position[0] - xmin) / BLOCK_SIZE).round() as i64;
            let row = (p.position[1] / BLOCK_SIZE).round() as i64;
            (col, row, id.0)
        })
        .collect()
}

/// Orthographic front view: ASCII grid (one cell per block edge) or SVG.
pub fn render(scene: &Scene, format: RenderFormat) -> Result<String> {
    scene.validate()?;
    let cells = cells(scene);
    let width = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let height = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    match format {
        RenderFormat::Ascii => {
            let mut grid = vec![vec!['.'; width as usize]; height as usize];
            for (c, r, id) in &cells {
                let glyph = char::from_digit(u32::from(*id % 36), 36).unwrap_or('#');
                grid[*r as usize][*c as usize] = glyph;
            }
            let mut out = String::new();
            for row in grid.iter().rev() {
                out.extend(row.iter());
                out.push('\n');
            }
            Ok(out)
        }
        RenderFormat::Svg => {
            let unit = 40;
            let mut out = format!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
                width * unit,
                height * unit
            );
            for (c, r, id) in &cells {
                let _ = writeln!(
                    out,
                    "  <rect x=\"{}\" y=\"{}\" width=\"{unit}\" height=\"{unit}\" fill=\"{}\" stroke=\"black\"><title>block{id}</title></rect>",
                    c * unit,
                    (height - 1 - r) * unit,
                    PALETTE[*id as usize % PALETTE.len()],
                );
            }
            out.push_str("</svg>\n");
            Ok(out)
        }
    }
}
