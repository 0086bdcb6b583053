//! End-to-end acceptance criteria. Runs without the libtest harness so each
//! criterion prints exactly one PASS or FAIL line. Failures are reported, not
//! fatal, unless `MUGREP_ACCEPTANCE_STRICT=1`, in which case the process exits
//! nonzero.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

use mugrep::appraisal::{AppraisalEngine, AppraisalRequest};
use mugrep::autodiff::{finite_diff_check, Tape};
use mugrep::data::{AttributeValue, Dataset, Day, EventId, TransactionEvent};
use mugrep::geo::Point;
use mugrep::graph::{active_intra_events, build_hetero_edges, EdgeType, EventGraph, GraphHyperParams, IntraIndex};
use mugrep::model::toy::{toy_world, ToyConfig};
use mugrep::model::{AblationConfig, ModelDims, ModelShape, ModelWorld, MugRep, SubjectQuery};
use mugrep::synth::{generate_dataset, GeneratorConfig};
use mugrep::train::{
    baseline_ha, checkpoint, evaluate, mse, train, Experiment, MetricsReport, TrainConfig, TrainOutcome, Variant,
};

// Tolerances and budgets.
const FD_STEP: f64 = 1e-5;
const FD_MAX_REL_ERR: f64 = 1e-4;
const GRADIENT_INSTANCES: usize = 22;
const GRADIENT_BUDGET: Duration = Duration::from_secs(120);
const GRAPH_BUDGET: Duration = Duration::from_secs(60);
const ATTENTION_PASSES: usize = 1000;
const ATTENTION_SUM_TOL: f64 = 1e-6;
const LEAKAGE_SUBJECTS: usize = 40;
const LEAKAGE_VIRTUAL: usize = 10;
const MIN_TRAIN_MSE_DROP: f64 = 0.5;
const MAX_MAPE_RATIO_TO_HA: f64 = 0.9;
const LEARNING_BUDGET: Duration = Duration::from_secs(15 * 60);
const ABLATION_STRENGTH: f64 = 0.8;
const ABLATION_SEEDS: [u64; 3] = [0, 1, 2];

const STRICT_ENV: &str = "MUGREP_ACCEPTANCE_STRICT";

type Check = Result<String, Box<dyn Error>>;

fn fail(msg: impl Into<String>) -> Box<dyn Error> {
    msg.into().into()
}

fn criterion(name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(Ok(detail)) => {
            println!("PASS {name}: {detail} [{secs:.1}s]");
            true
        }
        Ok(Err(e)) => {
            println!("FAIL {name}: {e} [{secs:.1}s]");
            false
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            println!("FAIL {name}: panicked: {msg} [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let mut results = Vec::new();
    results.push(criterion("gradient_correctness", gradient_correctness));
    results.push(criterion("graph_oracle_equivalence", graph_oracle_equivalence));
    results.push(criterion("attention_normalization", attention_normalization));
    results.push(criterion("no_leakage", no_leakage));

    let mut default_run = None;
    results.push(criterion("learning_works", || {
        let run = DefaultRun::new()?;
        let detail = run.learning_detail();
        default_run = Some(run);
        detail
    }));
    results.push(criterion("per_community_analysis", || {
        per_community(default_run.as_ref())
    }));
    results.push(criterion("ablation_direction", || {
        ablation_direction(default_run.as_ref())
    }));
    results.push(criterion("determinism", determinism));
    results.push(criterion("service_cli_equivalence", service_cli_equivalence));

    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 && std::env::var_os(STRICT_ENV).is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Gradient correctness

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let ablations = [
        AblationConfig::FULL,
        AblationConfig::FULL,
        AblationConfig::NO_EVT,
        AblationConfig::NO_COM,
        AblationConfig::NO_MT,
    ];
    let mut worst: f64 = 0.0;
    let mut n_params = 0;
    for i in 0..GRADIENT_INSTANCES {
        let n_communities = 3 + i % 4;
        let config = ToyConfig {
            n_events: 12 + i % 9,
            n_communities,
            n_districts: 1 + i % 3,
            hyper: GraphHyperParams {
                l_e: 1 + i % 2,
                l_c: 1 + (i / 2) % 2,
                ..GraphHyperParams::default()
            },
            ..ToyConfig::default()
        };
        // Full widths on the last two instances; reduced widths keep the
        // perturbation count manageable on the rest.
        let dims = if i + 2 >= GRADIENT_INSTANCES {
            ModelDims::default()
        } else {
            ModelDims {
                hidden: 6,
                mlp_hidden: 8,
                embedding: 3,
            }
        };
        let (world, _) = toy_world(&config, 1000 + i as u64)?;
        let model = MugRep::new(
            ModelShape::for_world(&world, dims),
            ablations[i % ablations.len()],
            i as u64,
        )?;
        let subjects = all_subjects(&world)?;
        let targets: Vec<f64> = (0..world.n_events() as EventId)
            .map(|id| world.event_price(id))
            .collect();
        let plan = model.plan(&world, &subjects)?;
        let mut store = model.params().clone();
        let report = finite_diff_check(
            &mut store,
            |tape, store| {
                let out = model.forward_with(store, tape, &plan)?;
                tape.mse(out.prediction, targets.clone())
            },
            FD_STEP,
            FD_MAX_REL_ERR,
        )?;
        if !report.passed() {
            return Err(fail(format!("instance {i}: {:?}", report.failures())));
        }
        worst = worst.max(report.max_rel_err());
        n_params += report.params.len();
    }
    let elapsed = start.elapsed();
    if elapsed > GRADIENT_BUDGET {
        return Err(fail(format!("took {elapsed:?}, budget {GRADIENT_BUDGET:?}")));
    }
    Ok(format!(
        "{GRADIENT_INSTANCES} instances, {n_params} tensors, max rel err {worst:.2e} < {FD_MAX_REL_ERR:e}"
    ))
}

fn all_subjects(world: &ModelWorld) -> mugrep::Result<Vec<SubjectQuery>> {
    (0..world.n_events() as EventId)
        .map(|id| world.event_subject(id))
        .collect()
}

// ---------------------------------------------------------------------------
// Graph construction vs brute force

fn random_events(n: usize, n_communities: u32, extent: f64, seed: u64) -> Vec<TransactionEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dates: Vec<Day> = (0..n).map(|_| rng.random_range(0..365)).collect();
    dates.sort_unstable();
    dates
        .into_iter()
        .enumerate()
        .map(|(i, date)| TransactionEvent {
            id: i as EventId,
            location: Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)),
            date,
            community_id: rng.random_range(0..n_communities),
            attributes: Default::default(),
            price: Some(rng.random_range(1.0..10.0)),
        })
        .collect()
}

fn oracle_neighbors(history: &[TransactionEvent], e: &TransactionEvent, p: &GraphHyperParams) -> Vec<EventId> {
    let mut by_community: BTreeMap<u32, Vec<&TransactionEvent>> = BTreeMap::new();
    for h in history {
        let dt = e.date - h.date;
        if h.location.distance(&e.location) <= p.eps_d_m && dt > 0 && dt <= p.eps_tau_days {
            by_community.entry(h.community_id).or_default().push(h);
        }
    }
    let mut out = Vec::new();
    for (_, mut v) in by_community {
        v.sort_by(|a, b| (b.date, b.id).cmp(&(a.date, a.id)));
        out.extend(v.iter().take(p.n_e).map(|h| h.id));
    }
    out.sort_unstable();
    out
}

fn oracle_window(members: &[(EventId, Day)], t: Day, p: &GraphHyperParams) -> Vec<EventId> {
    let mut past: Vec<(EventId, Day)> = members.iter().copied().filter(|(_, d)| *d <= t).collect();
    past.sort_by_key(|&(id, d)| std::cmp::Reverse((d, id)));
    let w = if past.len() >= p.n_c {
        p.eps_tau_days.max(past[0].1 - past[p.n_c - 1].1)
    } else {
        p.eps_tau_days
    };
    let mut out: Vec<EventId> = past.iter().filter(|(_, d)| t - d <= w).map(|(id, _)| *id).collect();
    out.sort_unstable();
    out
}

fn oracle_edges(vectors: &[Vec<f64>], q: f64) -> (f64, BTreeSet<(u32, u32)>) {
    let n = vectors.len();
    let d = |i: usize, j: usize| -> f64 {
        vectors[i]
            .iter()
            .zip(&vectors[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut all = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            all.push(d(i, j));
        }
    }
    all.sort_by(|a, b| a.total_cmp(b));
    let eps = all[((all.len() - 1) as f64 * q) as usize];
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if d(i, j) <= eps {
                edges.insert((i as u32, j as u32));
            }
        }
    }
    (eps, edges)
}

fn graph_oracle_equivalence() -> Check {
    let start = Instant::now();
    let p = GraphHyperParams::default();
    let mut capped = 0;
    let mut n_edges = 0;
    // A spread-out instance and a dense one where the per-community cap binds.
    for (seed, extent) in [(1, 2500.0), (2, 900.0)] {
        let events = random_events(1000, 200, extent, seed);
        let graph = EventGraph::build(&p, &events)?;
        for (i, e) in events.iter().enumerate() {
            let want = oracle_neighbors(&events[..i], e, &p);
            let got = graph.predecessors(e.id)?;
            if got != want.as_slice() {
                return Err(fail(format!(
                    "adjacency of event {} differs: {got:?} vs {want:?}",
                    e.id
                )));
            }
            n_edges += got.len();
            let mut per: BTreeMap<u32, usize> = BTreeMap::new();
            for &q in got {
                *per.entry(events[q as usize].community_id).or_default() += 1;
            }
            capped += per.values().filter(|&&c| c == p.n_e).count();
        }
    }
    // Few communities so windows hold enough members to widen past eps_tau.
    let mut n_windows = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (seed, n_communities) in [(4, 200), (5, 20)] {
        let events = random_events(1000, n_communities, 5000.0, seed);
        let index = IntraIndex::build(&events);
        for c in 0..n_communities {
            let members = index.members(c);
            for _ in 0..10 {
                let t = rng.random_range(0..420);
                let mut got = active_intra_events(members, t, &p);
                got.sort_unstable();
                if got != oracle_window(members, t, &p) {
                    return Err(fail(format!("window of community {c} at day {t} differs")));
                }
                n_windows += 1;
            }
        }
    }
    let ids: Vec<u32> = (0..200).collect();
    let vectors: Vec<Vec<Vec<f64>>> = (0..EdgeType::ALL.len())
        .map(|k| {
            (0..200)
                .map(|_| (0..3 + k).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let typed: Vec<(EdgeType, &[Vec<f64>])> = EdgeType::ALL
        .iter()
        .zip(&vectors)
        .map(|(t, v)| (*t, v.as_slice()))
        .collect();
    let mut n_pairs = 0;
    for q in [p.sim_quantile, 0.01, 0.05] {
        let hetero = build_hetero_edges(&ids, &typed, q)?;
        for (t, v) in EdgeType::ALL.iter().zip(&vectors) {
            let (eps, want) = oracle_edges(v, q);
            let set = hetero.set(*t).ok_or_else(|| fail(format!("{t:?} edge set missing")))?;
            let got: BTreeSet<(u32, u32)> = set.pairs.iter().copied().collect();
            if set.epsilon != eps || got != want {
                return Err(fail(format!("{t:?} edges at q = {q} differ")));
            }
            n_pairs += got.len();
        }
    }
    let elapsed = start.elapsed();
    if elapsed > GRAPH_BUDGET {
        return Err(fail(format!("took {elapsed:?}, budget {GRAPH_BUDGET:?}")));
    }
    if capped == 0 {
        return Err(fail("per-community cap never bound"));
    }
    Ok(format!(
        "{n_edges} event edges ({capped} capped groups), {n_windows} windows, {n_pairs} hetero pairs all equal"
    ))
}

// ---------------------------------------------------------------------------
// Attention normalization

fn attention_normalization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut vectors = [0usize; 3];
    let mut worst: f64 = 0.0;
    for pass in 0..ATTENTION_PASSES {
        let config = ToyConfig {
            n_events: rng.random_range(8..=20),
            n_communities: rng.random_range(2..=6),
            n_districts: rng.random_range(1..=2),
            ..ToyConfig::default()
        };
        let (world, _) = toy_world(&config, pass as u64)?;
        let model = MugRep::new(
            ModelShape::for_world(&world, ModelDims::default()),
            AblationConfig::FULL,
            pass as u64,
        )?;
        let n = world.n_events();
        let subjects: Vec<SubjectQuery> = (0..n as EventId)
            .filter(|_| rng.random_bool(0.5))
            .map(|id| world.event_subject(id))
            .collect::<mugrep::Result<_>>()?;
        let subjects = if subjects.is_empty() {
            vec![world.event_subject(n as EventId - 1)?]
        } else {
            subjects
        };
        let plan = model.plan(&world, &subjects)?;
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &plan)?;
        for (k, att) in [&out.event_attention, &out.intra_attention, &out.inter_attention]
            .into_iter()
            .enumerate()
        {
            let Some(att) = att else { continue };
            let alpha = tape.value(att.alpha);
            for s in 0..att.segments.len() {
                let r = att.segments.range(s);
                if r.is_empty() {
                    continue;
                }
                if let Some(i) = r.clone().find(|&i| !(alpha[(i, 0)] > 0.0)) {
                    return Err(fail(format!(
                        "pass {pass}: coefficient {} is not positive",
                        alpha[(i, 0)]
                    )));
                }
                let err = (r.map(|i| alpha[(i, 0)]).sum::<f64>() - 1.0).abs();
                if !(err <= ATTENTION_SUM_TOL) {
                    return Err(fail(format!("pass {pass}: coefficients sum off by {err:e}")));
                }
                worst = worst.max(err);
                vectors[k] += 1;
            }
        }
    }
    if vectors.contains(&0) {
        return Err(fail(format!("some mechanism never produced a vector: {vectors:?}")));
    }
    Ok(format!(
        "{ATTENTION_PASSES} passes; event/intra/inter vectors {vectors:?}, max |sum - 1| = {worst:.1e}"
    ))
}

// ---------------------------------------------------------------------------
// No leakage

fn perturb_after(dataset: &Dataset, cutoff: impl Fn(Day) -> bool, seed: u64) -> (Dataset, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    let mut touched = 0;
    for e in out.events.iter_mut().filter(|e| cutoff(e.date)) {
        if let Some(p) = e.price.as_mut() {
            *p *= rng.random_range(0.3..3.0);
        }
        if let Some(AttributeValue::Number(a)) = e.attributes.get_mut("area") {
            *a *= rng.random_range(0.5..2.0);
        }
        e.location.x += rng.random_range(-300.0..300.0);
        e.location.y += rng.random_range(-300.0..300.0);
        touched += 1;
    }
    (out, touched)
}

fn no_leakage() -> Check {
    let (dataset, _) = generate_dataset(&GeneratorConfig {
        seed: 11,
        ..GeneratorConfig::small()
    })?;
    let config = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let exp = Experiment::prepare(&dataset, &config)?;
    let outcome = train(&exp, &config)?;
    let ckpt = checkpoint(&outcome.model, &exp, &config);
    let model = ckpt.model()?;

    let n = dataset.events.len();
    let mut checked = 0;
    for k in 0..LEAKAGE_SUBJECTS {
        let subject = &dataset.events[k * (n - 1) / LEAKAGE_SUBJECTS];
        let date = subject.date;
        let (perturbed, touched) = perturb_after(&dataset, |d| d > date, k as u64);
        if touched == 0 {
            continue;
        }
        let before = Experiment::for_checkpoint(&dataset, &ckpt, &config)?;
        let after = Experiment::for_checkpoint(&perturbed, &ckpt, &config)?;
        let a = model.predict(&before.world, &[before.world.event_subject(subject.id)?])?[0];
        let b = model.predict(&after.world, &[after.world.event_subject(subject.id)?])?[0];
        if a.to_bits() != b.to_bits() {
            return Err(fail(format!(
                "event {} moved from {a} to {b} ({touched} later sales perturbed)",
                subject.id
            )));
        }
        checked += 1;
    }

    // Virtual subjects appraised as of a date see nothing on or after it.
    let engine = AppraisalEngine::new(dataset.clone(), ckpt.clone())?;
    let (first, last) = (dataset.events[0].date, dataset.events[n - 1].date);
    let mut virtual_checked = 0;
    for k in 0..LEAKAGE_VIRTUAL {
        let template = &dataset.events[(k * 37) % n];
        let valuation: Day = first + 30 + (last - first - 30) * k as Day / LEAKAGE_VIRTUAL as Day;
        let request = AppraisalRequest {
            community_id: template.community_id,
            valuation_date: Some(valuation),
            attributes: template.attributes.clone(),
        };
        let (perturbed, touched) = perturb_after(&dataset, |d| d >= valuation, 100 + k as u64);
        if touched == 0 {
            continue;
        }
        let a = engine.appraise(&request)?.unit_price_estimate;
        let b = AppraisalEngine::new(perturbed, ckpt.clone())?
            .appraise(&request)?
            .unit_price_estimate;
        if a.to_bits() != b.to_bits() {
            return Err(fail(format!("appraisal at day {valuation} moved from {a} to {b}")));
        }
        virtual_checked += 1;
    }
    if checked < LEAKAGE_SUBJECTS / 2 || virtual_checked == 0 {
        return Err(fail(format!(
            "too few informative subjects: {checked} events, {virtual_checked} virtual"
        )));
    }
    Ok(format!(
        "{checked} event subjects and {virtual_checked} appraisals bit-identical after perturbing later sales"
    ))
}

// ---------------------------------------------------------------------------
// Default city: learning, per-community analysis, ablation

struct DefaultRun {
    dataset: Dataset,
    exp: Experiment,
    outcome: TrainOutcome,
    report: MetricsReport,
    final_train_mse: f64,
    ha_mape: f64,
    elapsed: Duration,
}

impl DefaultRun {
    fn new() -> Result<Self, Box<dyn Error>> {
        let start = Instant::now();
        let (dataset, _) = generate_dataset(&GeneratorConfig::default())?;
        let config = TrainConfig::default();
        let exp = Experiment::prepare(&dataset, &config)?;
        let outcome = train(&exp, &config)?;
        let report = evaluate(&outcome.model, &exp, &dataset)?;
        let train_subjects = exp.subjects(&exp.split.train)?;
        let final_train_mse = mse(
            &outcome.model,
            &exp.world,
            &train_subjects,
            &exp.targets(&exp.split.train),
        )?;
        let ha_mape = ha_test_mape(&dataset, &exp.split.test)?;
        Ok(DefaultRun {
            dataset,
            exp,
            outcome,
            report,
            final_train_mse,
            ha_mape,
            elapsed: start.elapsed(),
        })
    }

    fn learning_detail(&self) -> Check {
        let initial = self.outcome.initial_train_loss();
        let drop = 1.0 - self.final_train_mse / initial;
        let ratio = self.report.mape / self.ha_mape;
        let detail = format!(
            "train MSE {initial:.4} -> {:.4} (drop {:.1}%), test MAPE {:.4} vs HA {:.4} (ratio {ratio:.3}), best epoch {}, {:?}",
            self.final_train_mse,
            100.0 * drop,
            self.report.mape,
            self.ha_mape,
            self.outcome.best_epoch,
            self.elapsed,
        );
        if drop < MIN_TRAIN_MSE_DROP || ratio > MAX_MAPE_RATIO_TO_HA || self.elapsed > LEARNING_BUDGET {
            return Err(fail(detail));
        }
        Ok(detail)
    }
}

fn ha_test_mape(dataset: &Dataset, test: &[EventId]) -> Result<f64, Box<dyn Error>> {
    let queries: Vec<_> = test
        .iter()
        .map(|&id| {
            (
                dataset.events[id as usize].community_id,
                dataset.events[id as usize].date,
            )
        })
        .collect();
    let pred = baseline_ha(&dataset.events, &queries);
    let mut total = 0.0;
    for (&id, p) in test.iter().zip(pred) {
        let p = p.ok_or_else(|| fail(format!("HA has no estimate for event {id}")))?;
        let y = dataset.events[id as usize]
            .price
            .ok_or_else(|| fail("test sale without price"))?;
        total += ((p - y) / y).abs();
    }
    Ok(total / test.len() as f64)
}

/// Average ranks, ties sharing the mean position.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn per_community(run: Option<&DefaultRun>) -> Check {
    let run = run.ok_or_else(|| fail("default city run unavailable"))?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join(mugrep::train::COMMUNITY_MAPE_FILE);
    run.report.write_community_csv(&path)?;

    let mut reader = csv::Reader::from_path(&path)?;
    let mut rows: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for record in reader.records() {
        let r = record?;
        rows.insert(r[0].parse()?, (r[2].parse()?, r[3].parse()?));
    }
    let expected: BTreeSet<u32> = run
        .exp
        .split
        .test
        .iter()
        .map(|&id| run.dataset.events[id as usize].community_id)
        .collect();
    let covered: BTreeSet<u32> = rows.keys().copied().collect();
    if covered != expected {
        return Err(fail(format!(
            "{} communities in table, {} with test sales",
            covered.len(),
            expected.len()
        )));
    }
    let mape: Vec<f64> = rows.values().map(|r| r.1).collect();
    let inverse: Vec<f64> = rows
        .values()
        .map(|r| if r.0 == 0 { f64::INFINITY } else { 1.0 / r.0 as f64 })
        .collect();
    let rho = pearson(&average_ranks(&mape), &average_ranks(&inverse));
    if !(rho > 0.0) {
        return Err(fail(format!(
            "Spearman(MAPE, 1/volume) = {rho:.3} over {} communities",
            rows.len()
        )));
    }
    Ok(format!(
        "{} communities covered, Spearman(MAPE, 1/volume) = {rho:.3}",
        rows.len()
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

fn ablation_direction(run: Option<&DefaultRun>) -> Check {
    let mut mapes: BTreeMap<Variant, Vec<f64>> = BTreeMap::new();
    let variants = [Variant::Full, Variant::NoEvt, Variant::NoCom];
    for seed in ABLATION_SEEDS {
        let generator = GeneratorConfig {
            seed,
            spatial_autocorr_strength: ABLATION_STRENGTH,
            ..GeneratorConfig::default()
        };
        let base = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let reuse =
            run.filter(|_| seed == 0 && generator == GeneratorConfig::default() && base == TrainConfig::default());
        let owned;
        let (dataset, exp) = match reuse {
            Some(r) => (&r.dataset, &r.exp),
            None => {
                let (dataset, _) = generate_dataset(&generator)?;
                let exp = Experiment::prepare(&dataset, &base)?;
                owned = (dataset, exp);
                (&owned.0, &owned.1)
            }
        };
        for v in variants {
            let mape = match (v, reuse) {
                (Variant::Full, Some(r)) => r.report.mape,
                _ => {
                    let config = v.configure(&base);
                    let outcome = train(exp, &config)?;
                    evaluate(&outcome.model, exp, dataset)?.mape
                }
            };
            mapes.entry(v).or_default().push(mape);
        }
    }
    let med: BTreeMap<Variant, f64> = mapes.iter().map(|(v, m)| (*v, median(m.clone()))).collect();
    let detail = format!(
        "median MAPE full {:.4}, noEvt {:.4}, noCom {:.4}; per seed {:?}",
        med[&Variant::Full],
        med[&Variant::NoEvt],
        med[&Variant::NoCom],
        mapes.iter().map(|(v, m)| format!("{v}={m:.4?}")).collect::<Vec<_>>(),
    );
    if med[&Variant::Full] < med[&Variant::NoEvt] && med[&Variant::Full] < med[&Variant::NoCom] {
        Ok(detail)
    } else {
        Err(fail(detail))
    }
}

// ---------------------------------------------------------------------------
// Pipeline through the CLI binary

const SMALL_CITY: &str = "[generator]
n_communities = 60
n_transactions = 600
n_pois = 400
n_stations = 40
n_checkins = 2000
n_trips = 1000
n_users = 600
";

fn mugrep(args: &[&str]) -> Result<String, Box<dyn Error>> {
    let out = Command::new(env!("CARGO_BIN_EXE_mugrep")).args(args).output()?;
    if !out.status.success() {
        return Err(fail(format!(
            "mugrep {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        )));
    }
    Ok(String::from_utf8(out.stdout)?)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// generate -> train -> evaluate under `root`; returns the metrics.json bytes.
fn pipeline(root: &Path, seed: &str) -> Result<Vec<u8>, Box<dyn Error>> {
    let config = root.join("city.toml");
    std::fs::write(&config, SMALL_CITY)?;
    let (city, run, eval) = (root.join("city"), root.join("run"), root.join("eval"));
    mugrep(&["generate", "--seed", seed, "--config", s(&config), "--out", s(&city)])?;
    mugrep(&[
        "train",
        s(&city),
        "--seed",
        seed,
        "--config",
        s(&config),
        "--out",
        s(&run),
    ])?;
    let ckpt = run.join(mugrep::model::CHECKPOINT_FILE);
    mugrep(&[
        "evaluate",
        s(&city),
        "--seed",
        seed,
        "--config",
        s(&config),
        "--checkpoint",
        s(&ckpt),
        "--out",
        s(&eval),
    ])?;
    Ok(std::fs::read(eval.join(mugrep::train::METRICS_FILE))?)
}

fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    let first = pipeline(a.path(), "5")?;
    let second = pipeline(b.path(), "5")?;
    if first != second {
        return Err(fail("metrics.json differs between runs"));
    }
    let metrics: serde_json::Value = serde_json::from_slice(&first)?;
    Ok(format!(
        "identical metrics.json ({} bytes, MAPE {})",
        first.len(),
        metrics["mape"]
    ))
}

fn service_cli_equivalence() -> Check {
    let dir = tempfile::tempdir()?;
    pipeline(dir.path(), "9")?;
    let city = dir.path().join("city");
    let ckpt = dir.path().join("run").join(mugrep::model::CHECKPOINT_FILE);
    let engine = AppraisalEngine::load(&city, &ckpt)?;
    let dataset = engine.dataset().clone();
    let app = mugrep_service::router(mugrep_service::AppState::ready(engine));
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = dataset.events.len();
    let mut compared = 0;
    for k in 0..12 {
        let template = &dataset.events[rng.random_range(0..n)];
        let community = &dataset.communities[rng.random_range(0..dataset.communities.len())];
        let mut attributes = template.attributes.clone();
        if let Some(AttributeValue::Number(a)) = attributes.get_mut("area") {
            *a = (*a * rng.random_range(0.7..1.4) * 10.0).round() / 10.0;
        }
        let request = AppraisalRequest {
            community_id: community.id,
            valuation_date: (k % 2 == 0).then(|| template.date + rng.random_range(1..200)),
            attributes,
        };
        let body = serde_json::to_string(&request)?;
        let path = dir.path().join(format!("request_{k}.json"));
        std::fs::write(&path, &body)?;
        let from_cli = mugrep(&["appraise", s(&city), "--checkpoint", s(&ckpt), "--request", s(&path)])?;

        let response = runtime.block_on(
            app.clone().oneshot(
                Request::post("/api/appraise")
                    .header(header::CONTENT_TYPE, "application/json")
                    .body(Body::from(body))?,
            ),
        )?;
        if response.status() != StatusCode::OK {
            return Err(fail(format!("request {k}: service answered {}", response.status())));
        }
        let bytes = runtime.block_on(axum::body::to_bytes(response.into_body(), usize::MAX))?;
        if from_cli.trim_end().as_bytes() != bytes.as_ref() {
            return Err(fail(format!(
                "request {k}: CLI {} vs service {}",
                from_cli.trim_end(),
                String::from_utf8_lossy(&bytes)
            )));
        }
        let cli: serde_json::Value = serde_json::from_str(&from_cli)?;
        let svc: serde_json::Value = serde_json::from_slice(&bytes)?;
        if cli["unit_price_estimate"].as_f64() != svc["unit_price_estimate"].as_f64() {
            return Err(fail(format!("request {k}: estimates differ")));
        }
        compared += 1;
    }
    Ok(format!(
        "{compared} requests byte-identical between CLI and POST /api/appraise"
    ))
}
