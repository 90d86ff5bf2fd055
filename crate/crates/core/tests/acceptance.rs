//! One PASS/FAIL line per acceptance criterion. Always exits 0; the lines
//! are the result.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use blockstair::bundle::ModelBundle;
use blockstair::dataset::{parse_example, Corpus};
use blockstair::eval::{bench, pointing, BenchReport, Pointing};
use blockstair::graphmatch::{build_state_graph, match_graphs, select_action};
use blockstair::heuristics::{jaccard_distance, levenshtein_distance, HeuristicKind};
use blockstair::nn::gradcheck::{probe_conv, probe_dense, probe_lstm, relative_error};
use blockstair::nn::layers::{sigmoid_bce, softmax_cross_entropy};
use blockstair::nn::TrainParams;
use blockstair::par::Exec;
use blockstair::planner::{GenerationConfig, Generator, Plan};
use blockstair::qsr::{closure, Atom, BlockId, Label, RelTriple, RelationSet};
use blockstair::scene::{Move, MoveRelation, Scene};
use blockstair::Error;
use common::{alphabetical, as_map, dp_oracle, exact_mcs, fixpoint_oracle, jaccard_by_definition, random_set, LABELS};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;

struct Tally {
    passed: usize,
    total: usize,
}

impl Tally {
    fn report(&mut self, id: usize, name: &str, pass: bool, detail: String, started: Instant) {
        self.total += 1;
        self.passed += usize::from(pass);
        println!(
            "{} [{id:>2}] {name}: {detail} ({:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn data(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn closure_oracle(t: &mut Tally) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut agree = 0;
    for _ in 0..100 {
        let rels = random_set(&mut rng, &LABELS, 6, 15);
        let same = match (closure(&rels), fixpoint_oracle(&rels)) {
            (Ok(c), Some(o)) => as_map(&c) == o,
            (Err(_), None) => true,
            _ => false,
        };
        agree += usize::from(same);
    }
    let secs = start.elapsed().as_secs_f64();
    t.report(
        1,
        "closure equals fixpoint oracle",
        agree == 100 && secs < 1.0,
        format!("{agree}/100 agree"),
        start,
    );
}

fn closure_axioms(t: &mut Tally, corpus: &Corpus) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut sets: Vec<RelationSet> = (0..100)
        .filter_map(|_| closure(&random_set(&mut rng, &LABELS, 6, 15)).ok())
        .collect();
    sets.extend(corpus.examples.iter().map(|e| e.relations.clone()));
    let mut violations = 0;
    for c in &sets {
        let blocks: Vec<BlockId> = c.blocks().into_iter().collect();
        for x in &blocks {
            for y in &blocks {
                if c.holds(*x, *y, Atom::Left) != c.holds(*y, *x, Atom::Right) {
                    violations += 1;
                }
            }
        }
    }
    let r = |x, y| RelTriple::new(Label::RIGHT, BlockId(x), BlockId(y)).unwrap();
    let chain = closure(&RelationSet::from_triples(vec![r(6, 7), r(7, 1)])).unwrap();
    let chain_ok = chain.holds(BlockId(6), BlockId(1), Atom::Right)
        && chain.holds(BlockId(1), BlockId(6), Atom::Left)
        && chain.len() == 6;
    t.report(
        2,
        "left/right inverse after closure, worked right chain",
        violations == 0 && chain_ok,
        format!("{violations} inverse violations over {} sets, chain {}", sets.len(), if chain_ok { "reproduced" } else { "wrong" }),
        start,
    );
}

fn gradients(t: &mut Tally) {
    let start = Instant::now();
    let eps = 1e-5;
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut checked = 0;
    for seed in 0..3 {
        for (name, r) in [("dense", probe_dense(seed, eps)), ("conv+pool+dropout", probe_conv(seed, eps)), ("lstm", probe_lstm(seed, eps))] {
            checked += r.checked;
            worst.push((name.to_string(), r.max_rel_err));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut head_err: f64 = 0.0;
    for _ in 0..20 {
        let logits: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let targets: Vec<f64> = (0..5).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let target = rng.gen_range(0..5);
        let mut g1 = vec![0.0; 5];
        let mut g2 = vec![0.0; 5];
        softmax_cross_entropy(&logits, target, Some(&mut g1));
        sigmoid_bce(&logits, &targets, Some(&mut g2));
        for i in 0..5 {
            let mut p = logits.clone();
            p[i] += eps;
            let (a_up, b_up) = (softmax_cross_entropy(&p, target, None), sigmoid_bce(&p, &targets, None));
            p[i] -= 2.0 * eps;
            let (a_dn, b_dn) = (softmax_cross_entropy(&p, target, None), sigmoid_bce(&p, &targets, None));
            head_err = head_err.max(relative_error(g1[i], (a_up - a_dn) / (2.0 * eps)));
            head_err = head_err.max(relative_error(g2[i], (b_up - b_dn) / (2.0 * eps)));
        }
    }
    worst.push(("sigmoid/softmax heads".to_string(), head_err));
    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    t.report(
        3,
        "analytic gradients match central differences",
        max < 1e-4 && secs < 30.0,
        format!("max relative error {max:.2e} over {checked} coordinates"),
        start,
    );
}

fn training(t: &mut Tally, bundle: &ModelBundle, started: Instant) {
    let l = &bundle.lstm.log.epoch_losses;
    let ratio = l[19] / l[0];
    let taper = (l[14] - l[19]) / (l[0] - l[4]);
    let times = bundle.times();
    let total = times.mlp + times.cnn + times.lstm;
    t.report(
        4,
        "LSTM loss falls below half and tapers; training time",
        ratio < 0.5 && taper < 0.2 && total < 300.0,
        format!(
            "epoch20/epoch1 = {ratio:.3} (< 0.5), late/early improvement = {taper:.3} (< 0.2), \
             training {total:.1} s (mlp {:.1}, cnn {:.1}, lstm {:.1}; < 300)",
            times.mlp, times.cnn, times.lstm
        ),
        started,
    );
}

fn cnn_recall(t: &mut Tally, corpus: &Corpus, bundle: &ModelBundle) {
    let start = Instant::now();
    let hits = corpus
        .examples
        .iter()
        .filter(|e| bundle.cnn.predict_example(&corpus.index, &e.relations).ok() == Some(e.id))
        .count();
    let recall = hits as f64 / corpus.len() as f64;
    t.report(5, "CNN train-set recall", recall >= 0.8, format!("{hits}/{} = {recall:.3} (>= 0.8)", corpus.len()), start);
}

fn distances(t: &mut Tally) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut ld_ok, mut jd_ok) = (0, 0);
    for _ in 0..200 {
        let a = random_set(&mut rng, &LABELS, 4, 10);
        let b = random_set(&mut rng, &LABELS, 4, 10);
        ld_ok += usize::from(levenshtein_distance(&a, &b) == dp_oracle(&alphabetical(&a), &alphabetical(&b)));
        jd_ok += usize::from(jaccard_distance(&a, &b) == jaccard_by_definition(&a, &b));
    }
    t.report(
        6,
        "edit-distance oracles",
        ld_ok == 200 && jd_ok == 200,
        format!("levenshtein {ld_ok}/200, jaccard {jd_ok}/200 exact"),
        start,
    );
}

fn mcs(t: &mut Tally) {
    let start = Instant::now();
    let graph_labels = [Label::LEFT, Label::RIGHT_TOUCHING, Label::UNDER_TOUCHING_SUPPORT, Label::TOUCHING];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut over, mut equal) = (0, 0);
    for _ in 0..200 {
        let n1 = rng.gen_range(1..=5);
        let n2 = rng.gen_range(1..=5);
        let g1 = build_state_graph(&random_set(&mut rng, &graph_labels, n1, 8));
        let g2 = build_state_graph(&random_set(&mut rng, &graph_labels, n2, 8));
        let greedy = match_graphs(&g1, &g2).similarity as usize;
        let exact = exact_mcs(&g1, &g2);
        over += usize::from(greedy > exact);
        equal += usize::from(greedy == exact);
    }
    let mut invariant = 0;
    for _ in 0..100 {
        let k = rng.gen_range(1..5);
        let options: Vec<(Move, RelationSet)> = (0..k)
            .map(|i| {
                let mv = Move::new(BlockId(90 + i as u16), MoveRelation::On, BlockId(99));
                (mv, random_set(&mut rng, &graph_labels, 5, 8))
            })
            .collect();
        let goal = random_set(&mut rng, &graph_labels, 5, 8);
        let mut ids: Vec<u16> = (1..=5).collect();
        ids.shuffle(&mut rng);
        let f = |b: BlockId| BlockId(ids[b.0 as usize - 1] + 20);
        let renamed: Vec<(Move, RelationSet)> = options.iter().map(|(m, r)| (*m, r.renamed(f))).collect();
        invariant += usize::from(select_action(&options, &goal).ok() == select_action(&renamed, &goal.renamed(f)).ok());
    }
    t.report(
        7,
        "greedy MCS vs exhaustive; select_action relabel invariance",
        over == 0 && equal >= 180 && invariant == 100,
        format!("{over} over-estimates, {equal}/200 optimal (>= 180), {invariant}/100 invariant"),
        start,
    );
}

/// Audited plans per heuristic: `None` for stuck runs.
type Generated = BTreeMap<HeuristicKind, Vec<Option<Plan>>>;

fn constraint_audit(t: &mut Tally, corpus: &Corpus, bundle: &ModelBundle) -> Generated {
    let start = Instant::now();
    let generator = Generator::new(corpus, bundle).expect("bundle matches corpus");
    let configs: Vec<GenerationConfig> = HeuristicKind::ALL
        .iter()
        .flat_map(|h| (0..100).map(move |s| GenerationConfig::new(*h, s)))
        .collect();
    let run = |c: &GenerationConfig| match generator.generate(c) {
        Ok(p) => Ok(Some(p)),
        Err(Error::GenerationStuck { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let first: Vec<Result<Option<Plan>, Error>> = Exec::default().map(&configs, run);
    let again: Vec<Result<Option<Plan>, Error>> = Exec::default().map(&configs, run);
    let nondeterministic = first.iter().zip(&again).filter(|(a, b)| a != b).count();
    let (mut moved_twice, mut broken, mut stuck, mut errors) = (0, 0, 0, 0);
    let mut out: Generated = BTreeMap::new();
    for (c, r) in configs.iter().zip(first) {
        let plan = match r {
            Ok(p) => p,
            Err(_) => {
                errors += 1;
                None
            }
        };
        if let Some(p) = &plan {
            let mut seen = BTreeSet::from([p.anchor]);
            let mut scene = Scene::with_anchor(p.anchor);
            let mut rels = scene.extract_relations().unwrap();
            for mv in &p.moves {
                if !seen.insert(mv.subject) {
                    moved_twice += 1;
                }
                scene = match scene.apply_move(mv) {
                    Ok(s) => s,
                    Err(_) => {
                        moved_twice += 1;
                        break;
                    }
                };
                let next = scene.extract_relations().unwrap();
                if !rels.is_subset_of(&next) {
                    broken += 1;
                }
                rels = next;
            }
        } else {
            stuck += 1;
        }
        out.entry(c.heuristic).or_default().push(plan);
    }
    t.report(
        8,
        "constraint audit over 500 generations",
        moved_twice == 0 && broken == 0 && nondeterministic == 0 && errors == 0,
        format!(
            "{moved_twice} move-once violations, {broken} broken relations, {nondeterministic} nondeterministic, \
             {errors} errors, {stuck} stuck"
        ),
        start,
    );
    out
}

fn ordering(t: &mut Tally, corpus: &Corpus, bundle: &ModelBundle) -> BenchReport {
    let start = Instant::now();
    let report = bench(corpus, bundle, &HeuristicKind::ALL, 10, 0, Exec::default()).expect("bench");
    let mean = |k| report.summary(k).map_or(f64::NAN, |s| s.mean);
    let chance = mean(HeuristicKind::Chance);
    let others: Vec<String> = HeuristicKind::ALL[1..]
        .iter()
        .map(|k| format!("{k} {:.4}", mean(*k)))
        .collect();
    let lowest = HeuristicKind::ALL[1..].iter().all(|k| mean(*k) > chance);
    let gap = mean(HeuristicKind::GraphMatch) - chance;
    let secs = start.elapsed().as_secs_f64();
    t.report(
        9,
        "chance strictly lowest, gm - chance >= 2",
        lowest && gap >= 2.0 && secs < 600.0,
        format!("chance {chance:.4}, {}; gap {gap:.4}", others.join(", ")),
        start,
    );
    report
}

fn formats(t: &mut Tally) {
    let start = Instant::now();
    let worked =
        "put(block6,left(block4));put(block5,rightdc(block4));put(block7,on(block4));put(block1,on(block6));put(block3,on(block1))";
    let plan_ok = Plan::from_text(worked).map(|p| p.to_text()).ok().as_deref() == Some(worked);
    let text = std::fs::read_to_string(data("fixtures/staircase.rel")).expect("fixture");
    let rel_ok = parse_example(&text).map(|e| e.to_rel_text()).ok().as_deref() == Some(text.as_str());
    t.report(
        10,
        "plan grammar and relation-file round trip",
        plan_ok && rel_ok,
        format!(
            "plan {}, relation file {}",
            if plan_ok { "identical" } else { "differs" },
            if rel_ok { "byte-identical" } else { "differs" }
        ),
        start,
    );
}

fn inferences(t: &mut Tally, corpus: &Corpus, bundle: &ModelBundle, generated: &Generated, base: &BenchReport) {
    let start = Instant::now();
    let (mut left, mut right) = (0, 0);
    for (kind, plans) in generated {
        if *kind == HeuristicKind::Chance {
            continue;
        }
        for p in plans.iter().flatten() {
            match p.execute().ok().as_ref().and_then(pointing) {
                Some(Pointing::Left) => left += 1,
                Some(Pointing::Right) => right += 1,
                None => {}
            }
        }
    }
    let roster = &corpus.index.roster;
    let mut shuffled = roster.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(SEED));
    let map: BTreeMap<BlockId, BlockId> = roster.iter().copied().zip(shuffled).collect();
    let permuted = corpus.relabeled(&map).expect("relabel");
    let other = ModelBundle::train(&permuted, &bundle.train, Exec::default()).expect("train");
    let again = bench(&permuted, &other, &HeuristicKind::ALL, 10, 0, Exec::default()).expect("bench");
    let differing = base.runs.iter().zip(&again.runs).filter(|(a, b)| a.score != b.score).count();
    t.report(
        11,
        "both orientations; block-id permutation leaves scores unchanged",
        left > 0 && right > 0 && differing == 0,
        format!(
            "{left} left- and {right} right-pointing (non-chance), {differing}/{} scores differ after permuting ids",
            base.runs.len()
        ),
        start,
    );
}

fn main() {
    let mut t = Tally { passed: 0, total: 0 };
    let corpus = Corpus::read_dir(&data("corpus")).expect("shipped corpus");
    closure_oracle(&mut t);
    closure_axioms(&mut t, &corpus);
    gradients(&mut t);
    let started = Instant::now();
    let hp = TrainParams {
        seed: SEED,
        ..TrainParams::default()
    };
    let bundle = ModelBundle::train(&corpus, &hp, Exec::default()).expect("training");
    training(&mut t, &bundle, started);
    cnn_recall(&mut t, &corpus, &bundle);
    distances(&mut t);
    mcs(&mut t);
    let generated = constraint_audit(&mut t, &corpus, &bundle);
    let report = ordering(&mut t, &corpus, &bundle);
    formats(&mut t);
    inferences(&mut t, &corpus, &bundle, &generated, &report);
    println!("acceptance: {}/{} criteria passed", t.passed, t.total);
}
