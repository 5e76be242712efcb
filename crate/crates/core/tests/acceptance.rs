//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 3 4`.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radarclass::classifier::{CountingFactory, ForestConfig, ForestFactory};
use radarclass::clustering::{dbscan, DbscanParams, NOISE};
use radarclass::data_model::{ClassLabel, Target};
use radarclass::dataset::{LabeledData, Matrix};
use radarclass::ensemble::{couple, delta, CouplingMethod, DeltaVariant, ProbabilityTable};
use radarclass::evaluation::{
    evaluate_split, grouped_holdout, grouped_splits, macro_f1, nested_cv, Configuration, ConfusionMatrix,
};
use radarclass::features::{feature_index, feature_table, FeatureParams, FeatureTable};
use radarclass::geometry::{cbo, convex_hull, min_bounding_rect, min_enclosing_circle, Point};
use radarclass::imbalance::{ResampleMethod, ResampleSpec};
use radarclass::pipeline::{build_samples, cluster_targets, ExperimentConfig, Stage};
use radarclass::selection::backward_eliminate;
use radarclass::synthgen::{generate, generate_feature_benchmark, ground_truth_samples, BenchmarkConfig, SceneConfig};

/// Frozen after the first measured run (0.8975 on the default profile,
/// seed 0).
const FOREST_SANITY_BOUND: f64 = 0.85;

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    /// A failing non-blocking criterion is reported but does not fail the run.
    blocking: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            blocking: true,
            detail: detail.into(),
        }
    }
}

const COUPLERS: [CouplingMethod; 8] = [
    CouplingMethod::Ova,
    CouplingMethod::Pwc1,
    CouplingMethod::Pwc2,
    CouplingMethod::Pwc3,
    CouplingMethod::Pwc4,
    CouplingMethod::Pwc5,
    CouplingMethod::PwcOva,
    CouplingMethod::PwcOva2,
];

// ---------------------------------------------------------------- 1

fn step(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn first_max(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Direct evaluation of the coupling rules on a full K×K matrix with
/// `m[j][i] = 1 - m[i][j]`.
fn brute_couple(m: &[Vec<f64>], ova: &[f64], method: CouplingMethod) -> (Vec<f64>, usize) {
    let k = m.len();
    let weighted = |w: &dyn Fn(f64) -> f64| -> Vec<f64> {
        (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| w(m[i][j])).sum()).collect()
    };
    let scores = match method {
        CouplingMethod::Ova => ova.to_vec(),
        CouplingMethod::Pwc1 => {
            let votes = weighted(&|p| step(p - 0.5));
            let top = votes.iter().cloned().fold(f64::MIN, f64::max);
            let tied: Vec<usize> = (0..k).filter(|&i| votes[i] == top).collect();
            if tied.len() > 1 {
                let soft = weighted(&|p| p);
                let mut pick = tied[0];
                for &i in &tied {
                    if soft[i] > soft[pick] {
                        pick = i;
                    }
                }
                return (votes, pick);
            }
            votes
        }
        CouplingMethod::Pwc2 => weighted(&|p| p),
        CouplingMethod::Pwc3 => weighted(&|p| 1.0 / (1.0 + (-12.0 * (p - 0.5)).exp())),
        CouplingMethod::Pwc4 => weighted(&|p| p * step(0.5 - p) + step(p - 0.5)),
        CouplingMethod::Pwc5 => weighted(&|p| p * step(p - 0.5)),
        CouplingMethod::PwcOva => (0..k)
            .map(|i| (0..k).filter(|&j| j != i).map(|j| m[i][j] * (ova[i] + ova[j])).sum())
            .collect(),
        CouplingMethod::PwcOva2 => {
            let s = weighted(&|p| p);
            (0..k).map(|i| ova[i] * s[i]).collect()
        }
        CouplingMethod::Multiclass => unreachable!(),
    };
    let d = first_max(&scores);
    (scores, d)
}

fn random_probability<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen_bool(0.35) {
        rng.gen_range(0..=10) as f64 / 10.0
    } else {
        rng.gen_range(0.0..=1.0)
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        let table = ProbabilityTable::new(2, vec![p], Some(vec![p, 1.0 - p])).unwrap();
        let want = first_max(&[p, 1.0 - p]);
        for m in COUPLERS {
            if couple(&table, m).unwrap().decision != want {
                mismatches.push(format!("K=2 p={p} {m}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for k in 3..=6 {
        for _ in 0..10_000 {
            let mut m = vec![vec![0.0; k]; k];
            let mut upper = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    let p = random_probability(&mut rng);
                    m[i][j] = p;
                    m[j][i] = 1.0 - p;
                    upper.push(p);
                }
            }
            let ova: Vec<f64> = (0..k).map(|_| random_probability(&mut rng)).collect();
            let table = ProbabilityTable::new(k, upper, Some(ova.clone())).unwrap();
            for method in COUPLERS {
                let got = couple(&table, method).unwrap();
                let (scores, decision) = brute_couple(&m, &ova, method);
                let scores_ok = method == CouplingMethod::Pwc1 || got.scores == scores;
                if got.decision != decision || !scores_ok {
                    mismatches.push(format!("K={k} {method}"));
                }
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        mismatches.is_empty() && secs < 10.0,
        format!(
            "{} grid points x 8 couplers, {checked} random table evaluations, {} mismatches, {secs:.2} s",
            1001,
            mismatches.len()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Verdict {
    let half = delta(0.5, DeltaVariant::Pwc3).unwrap();
    let one = delta(1.0, DeltaVariant::Pwc3).unwrap();
    let want_one = 1.0 / (1.0 + (-6.0f64).exp());
    let mut worst: f64 = 0.0;
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        for v in [DeltaVariant::Pwc2, DeltaVariant::Pwc3] {
            let s = delta(p, v).unwrap() + delta(1.0 - p, v).unwrap();
            worst = worst.max((s - 1.0).abs());
        }
    }
    let pass = (half - 0.5).abs() <= 1e-12 && (one - want_one).abs() <= 1e-12 && worst <= 1e-12;
    Verdict::new(
        pass,
        format!("delta(0.5)={half}, delta(1)={one:.12}, max |d(p)+d(1-p)-1| = {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 3

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Endpoints of every directed pair that has all other points strictly to
/// its left or on the segment between them.
fn brute_hull_vertices(pts: &[Point]) -> Vec<Point> {
    let mut uniq: Vec<Point> = Vec::new();
    for p in pts {
        if !uniq.contains(p) {
            uniq.push(*p);
        }
    }
    if uniq.len() == 1 {
        return uniq;
    }
    let mut out: Vec<Point> = Vec::new();
    for &a in &uniq {
        for &b in &uniq {
            if a == b {
                continue;
            }
            let edge = uniq.iter().all(|&r| {
                let c = cross(a, b, r);
                let within = (r.x - a.x) * (r.x - b.x) <= 0.0 && (r.y - a.y) * (r.y - b.y) <= 0.0;
                c > 0.0 || (c == 0.0 && within)
            });
            if edge {
                for v in [a, b] {
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out
}

fn polygon_area(v: &[Point]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let cx = v.iter().map(|p| p.x).sum::<f64>() / v.len() as f64;
    let cy = v.iter().map(|p| p.y).sum::<f64>() / v.len() as f64;
    let mut s = v.to_vec();
    s.sort_by(|a, b| (a.y - cy).atan2(a.x - cx).total_cmp(&(b.y - cy).atan2(b.x - cx)));
    let mut twice = 0.0;
    for i in 0..s.len() {
        let (a, b) = (s[i], s[(i + 1) % s.len()]);
        twice += a.x * b.y - a.y * b.x;
    }
    0.5 * twice.abs()
}

fn sorted(mut v: Vec<Point>) -> Vec<Point> {
    v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    v
}

fn brute_circle_radius(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n == 1 {
        return 0.0;
    }
    let covers = |cx: f64, cy: f64, r: f64| pts.iter().all(|p| (p.x - cx).hypot(p.y - cy) <= r + 1e-9);
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let (cx, cy) = (0.5 * (pts[i].x + pts[j].x), 0.5 * (pts[i].y + pts[j].y));
            let r = 0.5 * (pts[i].x - pts[j].x).hypot(pts[i].y - pts[j].y);
            if r < best && covers(cx, cy, r) {
                best = r;
            }
            for k in j + 1..n {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let d = 2.0 * cross(a, b, c);
                if d.abs() < 1e-12 {
                    continue;
                }
                let (a2, b2, c2) = (a.x * a.x + a.y * a.y, b.x * b.x + b.y * b.y, c.x * c.x + c.y * c.y);
                let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
                let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
                let r = (a.x - ux).hypot(a.y - uy);
                if r < best && covers(ux, uy, r) {
                    best = r;
                }
            }
        }
    }
    if best.is_infinite() {
        0.0
    } else {
        best
    }
}

/// Occupied (ring, sector) cells counted by explicit interval tests.
fn brute_cbo(pts: &[Point], c: Point) -> [u8; 3] {
    let r_max = pts.iter().map(|p| (p.x - c.x).hypot(p.y - c.y)).fold(0.0, f64::max);
    if r_max == 0.0 {
        return [1, 0, 0];
    }
    let mut cells = BTreeSet::new();
    for p in pts {
        let d = (p.x - c.x).hypot(p.y - c.y);
        let ring = (0..3).find(|&r| d <= (r + 1) as f64 * (r_max / 3.0)).unwrap_or(2);
        let mut a = (p.y - c.y).atan2(p.x - c.x);
        if a < 0.0 {
            a += 2.0 * PI;
        }
        let sector = if a == 0.0 {
            0
        } else {
            (0..8).find(|&s| a <= (s + 1) as f64 * (PI / 4.0)).unwrap_or(7)
        };
        cells.insert((ring, sector));
    }
    let mut out = [0u8; 3];
    for (ring, _) in cells {
        out[ring] += 1;
    }
    out
}

fn random_point_set<R: Rng>(rng: &mut R, set: usize) -> Vec<Point> {
    let n = rng.gen_range(1..=100);
    if set.is_multiple_of(2) {
        (0..n)
            .map(|_| Point::new(rng.gen_range(0..=8) as f64, rng.gen_range(0..=8) as f64))
            .collect()
    } else {
        let (sx, sy) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let (ox, oy) = (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        (0..n)
            .map(|_| Point::new(ox + sx * rng.gen_range(-1.0..1.0), oy + sy * rng.gen_range(-1.0..1.0)))
            .collect()
    }
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fail = |what: &'static str| *failures.entry(what).or_default() += 1;
    for set in 0..200 {
        let pts = random_point_set(&mut rng, set);
        let hull = convex_hull(&pts);
        let oracle = brute_hull_vertices(&pts);
        if sorted(hull.vertices.clone()) != sorted(oracle.clone()) {
            fail("hull vertices");
        }
        let want_area = polygon_area(&oracle);
        if (hull.area - want_area).abs() > 1e-9 * want_area.max(1.0) {
            fail("hull area");
        }

        let rect = min_bounding_rect(&hull);
        let scale = pts.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
        if !pts.iter().all(|&p| rect.contains(p, 1e-9 * scale)) {
            fail("rect containment");
        }
        for k in 0..3600 {
            let t = k as f64 * (PI / 2.0) / 3600.0;
            let (c, s) = (t.cos(), t.sin());
            let u: Vec<f64> = pts.iter().map(|p| p.x * c + p.y * s).collect();
            let v: Vec<f64> = pts.iter().map(|p| -p.x * s + p.y * c).collect();
            let ext = |w: &[f64]| {
                w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min)
            };
            if rect.area > ext(&u) * ext(&v) * (1.0 + 1e-9) + 1e-12 {
                fail("rect area above a grid orientation");
                break;
            }
        }

        let circle = min_enclosing_circle(&pts);
        if (circle.radius - brute_circle_radius(&pts)).abs() > 1e-9 {
            fail("circle radius");
        }

        let n = pts.len() as f64;
        let center = Point::new(pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n);
        let d = cbo(&pts, center);
        if [d.inner, d.middle, d.outer] != brute_cbo(&pts, center) {
            fail("cbo");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        failures.is_empty() && secs < 60.0,
        format!("200 point sets, failures {failures:?}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- 4

fn brute_dbscan(t: &[Target], p: &DbscanParams) -> Vec<i64> {
    let n = t.len();
    let near = |a: &Target, b: &Target| {
        let d = ((a.x - b.x).hypot(a.y - b.y) / p.eps_xy)
            .max((a.time - b.time).abs() / p.eps_t)
            .max((a.vr_comp - b.vr_comp).abs() / p.eps_vr);
        d <= 1.0
    };
    let nbrs: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| near(&t[i], &t[j])).collect()).collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= p.min_pts).collect();
    let mut label = vec![None::<i64>; n];
    let mut next = 0;
    for i in 0..n {
        if !core[i] || label[i].is_some() {
            continue;
        }
        label[i] = Some(next);
        let mut stack = vec![i];
        while let Some(q) = stack.pop() {
            for &r in &nbrs[q] {
                if label[r].is_none() {
                    label[r] = Some(next);
                    if core[r] {
                        stack.push(r);
                    }
                }
            }
        }
        next += 1;
    }
    label.into_iter().map(|l| l.unwrap_or(NOISE)).collect()
}

fn same_partition(a: &[i64], b: &[i64]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == NOISE) != (y == NOISE) {
            return false;
        }
        *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
    })
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    let mut clusters = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=200);
        let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(1..8))
            .map(|_| {
                (
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(0.0..2.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let targets: Vec<Target> = (0..n)
            .map(|_| {
                let (x, y, t, v) = blobs[rng.gen_range(0..blobs.len())];
                Target::from_cartesian(
                    t + rng.gen_range(0.0..0.5),
                    x + rng.gen_range(-3.0..3.0),
                    y + rng.gen_range(-3.0..3.0),
                    v + rng.gen_range(-1.5..1.5),
                    0.0,
                    0,
                )
            })
            .collect();
        let params = DbscanParams {
            min_pts: rng.gen_range(1..5),
            ..DbscanParams::default()
        };
        let got = dbscan(&targets, &params).unwrap();
        let want = brute_dbscan(&targets, &params);
        clusters += want.iter().filter(|&&l| l != NOISE).collect::<BTreeSet<_>>().len();
        if !same_partition(&got, &want) {
            bad += 1;
        }
    }
    Verdict::new(bad == 0, format!("100 datasets, {clusters} reference clusters, {bad} mismatches"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Verdict {
    let ev1 = feature_index("covEV1").unwrap();
    let major = feature_index("con95major").unwrap();
    let mut samples = Vec::new();
    let mut seed = 0;
    while samples.len() < 10_000 {
        let cfg = SceneConfig {
            seed,
            ..SceneConfig::default()
        };
        samples.extend(ground_truth_samples(&generate(&cfg).unwrap()));
        seed += 1;
    }
    samples.truncate(10_000);
    let singles = samples.iter().filter(|s| s.targets.len() == 1).count();
    let table = feature_table(&samples, &FeatureParams::default()).unwrap();
    let non_finite = table.rows.iter().filter(|r| r.values.iter().any(|v| !v.is_finite())).count();
    let worst = table
        .rows
        .iter()
        .map(|r| (r.values[major] - 2.0 * (5.991464547 * r.values[ev1]).sqrt()).abs())
        .fold(0.0, f64::max);
    Verdict::new(
        non_finite == 0 && worst <= 1e-9 && singles > 0,
        format!(
            "10000 samples ({singles} single-target), {non_finite} with non-finite features, max con95major error {worst:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn pipeline_data(scene: &SceneConfig) -> LabeledData {
    let mut targets = generate(scene).unwrap();
    cluster_targets(&mut targets, &DbscanParams::default()).unwrap();
    let sets = build_samples(&targets, true, scene.seed);
    let params = FeatureParams::default();
    let original = feature_table(&sets.original, &params).unwrap();
    let augmented = feature_table(&sets.augmented, &params).unwrap();
    LabeledData::from_tables(&original, Some(&augmented)).unwrap()
}

fn forest_sanity_run() -> (usize, ConfusionMatrix) {
    let data = pipeline_data(&SceneConfig::default());
    let split = grouped_holdout(&data, 0).unwrap();
    let cfg = Configuration::new(CouplingMethod::Multiclass, ResampleSpec::default());
    let factory = ForestFactory::new(ForestConfig::default());
    let cm = evaluate_split(&data, &split, &[cfg], &factory).unwrap().remove(0);
    (data.original_rows().len(), cm)
}

fn criterion_6() -> Verdict {
    let (n, a) = forest_sanity_run();
    let (_, b) = forest_sanity_run();
    let f1 = macro_f1(&a).unwrap();
    Verdict::new(
        f1 >= FOREST_SANITY_BOUND && a == b,
        format!(
            "{n} samples, hold-out macro-F1 {f1:.4} (bound {FOREST_SANITY_BOUND}), reruns identical: {}",
            a == b
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let none = ResampleSpec::default();
    let st = ResampleSpec::new(ResampleMethod::SmoteTomek);
    let configs = [
        Configuration::new(CouplingMethod::Multiclass, none.clone()),
        Configuration::new(CouplingMethod::PwcOva, none.clone()),
        Configuration::new(CouplingMethod::PwcOva2, none.clone()),
        Configuration::new(CouplingMethod::Multiclass, st),
    ];
    let factory = ForestFactory::new(ForestConfig::default());
    let minority = ClassLabel::Bike.code();
    let seeds = 10;
    let mut f1 = [0.0; 4];
    let mut recall = [0.0; 4];
    for seed in 0..seeds {
        let data = pipeline_data(&SceneConfig {
            seed,
            ..SceneConfig::imbalanced()
        });
        let split = grouped_holdout(&data, seed).unwrap();
        let cms = evaluate_split(&data, &split, &configs, &factory).unwrap();
        for (i, cm) in cms.iter().enumerate() {
            f1[i] += macro_f1(cm).unwrap() / seeds as f64;
            recall[i] += cm.recall(minority) / seeds as f64;
        }
    }
    let gap_a = f1[0] - f1[1].min(f1[2]);
    let gap_b = recall[0] - recall[3];
    let secs = start.elapsed().as_secs_f64();
    let holds = gap_a <= 0.0 && gap_b <= 0.0;
    let blocking_failure = gap_a > 0.02 || gap_b > 0.02 || secs >= 600.0;
    Verdict {
        pass: holds && secs < 600.0,
        blocking: blocking_failure,
        detail: format!(
            "macro-F1 multiclass {:.4}, pwc-ova {:.4}, pwc-ova2 {:.4}; bike recall none {:.4}, smote+tomek {:.4}; {secs:.0} s",
            f1[0], f1[1], f1[2], recall[0], recall[3]
        ),
    }
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Verdict {
    let data = pipeline_data(&SceneConfig::confusable_trucks());
    let split = grouped_holdout(&data, 0).unwrap();
    let thresholds = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let configs: Vec<Configuration> = thresholds
        .iter()
        .map(|&t| Configuration {
            method: CouplingMethod::PwcOva,
            resample: ResampleSpec::default(),
            two_stage_thr: Some(t),
        })
        .collect();
    let cms = evaluate_split(&data, &split, &configs, &ForestFactory::new(ForestConfig::default())).unwrap();
    let truck: Vec<f64> = cms.iter().map(|c| c.recall(ClassLabel::TruckBus.code())).collect();
    let car: Vec<f64> = cms.iter().map(|c| c.recall(ClassLabel::Car.code())).collect();
    let pass = truck.windows(2).all(|w| w[1] <= w[0]) && car.windows(2).all(|w| w[1] >= w[0]) && truck[0] > truck[5];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Verdict::new(pass, format!("thr 0.5..1.0: truck recall [{}], car recall [{}]", fmt(&truck), fmt(&car)))
}

// ---------------------------------------------------------------- 9

fn table_data(table: &FeatureTable) -> LabeledData {
    LabeledData::from_tables(table, None).unwrap()
}

fn criterion_9() -> Verdict {
    let factory = ForestFactory::new(ForestConfig::default());
    let mut hits = Vec::new();
    let mut counts_ok = true;
    for seed in 0..5 {
        let mut cfg = BenchmarkConfig::default();
        cfg.scene.seed = seed;
        let bench = generate_feature_benchmark(&cfg).unwrap();
        let data = table_data(&bench.table);
        let split = grouped_holdout(&data, seed).unwrap();
        let counting = CountingFactory::new(factory.clone());
        let ranking = backward_eliminate(&data, &counting, &split).unwrap();
        let n = data.n_features();
        counts_ok &= ranking.models_trained == n * (n + 1) / 2 - 1 && counting.fits() == ranking.models_trained;
        let found = ranking
            .top(10)
            .iter()
            .filter(|f| bench.declaration.informative.contains(f))
            .count();
        hits.push(found);
    }
    Verdict::new(
        counts_ok && hits.iter().all(|&h| h >= 4),
        format!("informative features in top 10 per seed {hits:?}, model count n(n+1)/2-1 holds: {counts_ok}"),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut audit_failures = 0;
    for trial in 0..100 {
        let n = rng.gen_range(40..300);
        let n_groups = rng.gen_range(10..60);
        let groups: Vec<i64> = (0..n).map(|_| rng.gen_range(0..n_groups) * 7 + 3).collect();
        let distinct = groups.iter().collect::<BTreeSet<_>>().len();
        let k = rng.gen_range(2..=10.min(distinct));
        let x = Matrix::zeros(n, 1);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let mut data = LabeledData::new(x, y, groups.clone(), 2, vec!["f".into()]).unwrap();
        data.augmented = (0..n).map(|_| rng.gen_bool(0.2)).collect();
        let splits = grouped_splits(&data, k, trial).unwrap();
        let mut fold_of: BTreeMap<i64, usize> = BTreeMap::new();
        let mut tested = vec![0usize; n];
        let mut ok = splits.len() == k;
        for (f, s) in splits.iter().enumerate() {
            ok &= !s.test.is_empty();
            let test_groups: BTreeSet<i64> = s.test.iter().map(|&i| groups[i]).collect();
            for &i in &s.test {
                tested[i] += 1;
                ok &= !data.augmented[i];
                ok &= *fold_of.entry(groups[i]).or_insert(f) == f;
            }
            for &i in &s.train {
                ok &= !test_groups.contains(&groups[i]);
            }
            ok &= s.train.len() + s.test.len() + data.augmented.iter().zip(&groups).filter(|(a, g)| **a && test_groups.contains(g)).count() == n;
        }
        ok &= (0..n).all(|i| tested[i] == usize::from(!data.augmented[i]));
        if !ok {
            audit_failures += 1;
        }
    }

    let cm = ConfusionMatrix {
        counts: vec![vec![9, 1], vec![2, 8]],
    };
    let f1 = macro_f1(&cm).unwrap();
    let hand = (18.0 / 21.0 + 16.0 / 19.0) / 2.0;

    let (k_outer, k_inner) = (3, 2);
    let scene = SceneConfig {
        n_objects: 150,
        ..SceneConfig::default()
    };
    let data = pipeline_data(&scene);
    let grid = [
        Configuration::new(CouplingMethod::Multiclass, ResampleSpec::default()),
        Configuration::new(CouplingMethod::PwcOva, ResampleSpec::default()),
        Configuration::new(CouplingMethod::PwcOva2, ResampleSpec::default()),
    ];
    let counting = CountingFactory::new(ForestFactory::new(ForestConfig {
        n_trees: 5,
        ..ForestConfig::default()
    }));
    nested_cv(&data, &grid, &counting, k_outer, k_inner, 0).unwrap();
    let per_fit_round = 15 + 6 + 1;
    let want_fits = k_outer * (k_inner + 1) * per_fit_round;

    Verdict::new(
        audit_failures == 0 && (f1 - hand).abs() <= 1e-9 && (f1 - 0.8496).abs() < 5e-5 && counting.fits() == want_fits,
        format!(
            "grouping audit failures {audit_failures}/100; macro-F1 [[9,1],[2,8]] = {f1:.10}; nested-CV fits {} (expected {want_fits} = {k_outer} outer x ({k_inner} inner + 1) x 22)",
            counting.fits()
        ),
    )
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Verdict {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig {
            work_dir: dir.path().join("work"),
            method: CouplingMethod::PwcOva2,
            resample: ResampleSpec::new(ResampleMethod::SmoteTomek),
            evaluate: vec![
                Configuration::new(CouplingMethod::Multiclass, ResampleSpec::default()),
                Configuration::new(CouplingMethod::PwcOva2, ResampleSpec::new(ResampleMethod::SmoteTomek)),
            ],
            ..ExperimentConfig::default()
        }
        .with_seed(11);
        cfg.scene.n_objects = 120;
        cfg.forest.n_trees = 10;
        cfg.cv.folds = 3;
        radarclass::pipeline::run(&cfg, &[Stage::Evaluate, Stage::Train]).unwrap();
        let read = |f: &str| std::fs::read(cfg.work_dir.join(f)).unwrap();
        (read("report.json"), read("model.json"))
    };
    let a = run();
    let b = run();
    Verdict::new(
        a.0 == b.0 && a.1 == b.1,
        format!(
            "report.json identical: {}, model.json identical: {}",
            a.0 == b.0,
            a.1 == b.1
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, Check); 11] = [
        (1, "coupling correctness", criterion_1),
        (2, "delta-function checks", criterion_2),
        (3, "geometry oracles", criterion_3),
        (4, "DBSCAN equivalence", criterion_4),
        (5, "feature totality", criterion_5),
        (6, "forest sanity", criterion_6),
        (7, "imbalance directionality", criterion_7),
        (8, "two-stage truck trade-off", criterion_8),
        (9, "selection sanity", criterion_9),
        (10, "evaluation plumbing", criterion_10),
        (11, "reproducibility", criterion_11),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut blocking_failures = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        let word = if verdict.pass { "PASS" } else { "FAIL" };
        let note = if !verdict.pass && !verdict.blocking {
            " (non-blocking)"
        } else {
            ""
        };
        println!(
            "criterion {id:>2} {word}{note} {name}: {} [{:.1} s]",
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
        if !verdict.pass && verdict.blocking {
            blocking_failures += 1;
        }
    }
    if blocking_failures > 0 {
        eprintln!("{blocking_failures} blocking acceptance criteria failed");
        std::process::exit(1);
    }
}
