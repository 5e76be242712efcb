//! Seeded synthetic radar scenes with the six-class structure of the
//! classification task.
//!
//! All class profiles below are synthetic defaults, chosen so that the
//! classes differ in footprint, target count, Doppler spread and amplitude
//! roughly the way real road users do. Objects are laid out one after the
//! other on a shared 60 ms cycle clock, separated by a pause longer than
//! the clustering time scale, so ground-truth objects never touch.
//!
//! Each object draws from its own ChaCha8 stream (`set_stream(object_id)`),
//! so adding an object never changes the targets of the others.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data_model::{
    window_samples, ClassLabel, ClusterSample, ClusterTrack, LabeledTarget, SensorPose, SensorSpec, Target,
};
use crate::error::{Error, Result};
use crate::features::{feature_index, feature_table, FeatureParams, FeatureTable, REGISTRY};

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    pub const fn new(min: f64, max: f64) -> Self {
        Span { min, max }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min >= 0.0 && self.min <= self.max
    }
}

/// How one class looks to the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    /// Mean of the Poisson count of targets per radar cycle.
    pub targets_per_cycle: f64,
    /// Extent along the heading, m.
    pub length: f64,
    /// Extent across the heading, m.
    pub width: f64,
    /// Standard deviation of the per-target radial velocity around the
    /// body velocity, m/s.
    pub doppler_spread: f64,
    pub amplitude_mean: f64,
    pub amplitude_std: f64,
    /// Track duration, s.
    pub duration: Span,
    /// Speed over ground, m/s.
    pub speed: Span,
    /// Per-cycle random displacement of the object centre, m. Non-zero
    /// values give the incoherent blobs of the garbage class.
    pub jitter: f64,
    /// Range of the per-object mean radial velocity offset, m/s; used to
    /// give static clutter a random Doppler.
    pub vr_offset: f64,
}

impl ClassProfile {
    pub fn footprint(&self) -> f64 {
        self.length * self.width
    }

    fn validate(&self, class: &str) -> Result<()> {
        let positive = [self.targets_per_cycle, self.length, self.width];
        let non_negative = [self.doppler_spread, self.amplitude_std, self.jitter, self.vr_offset];
        let ok = positive.iter().all(|v| v.is_finite() && *v > 0.0)
            && non_negative.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.amplitude_mean.is_finite()
            && self.duration.valid()
            && self.duration.max > 0.0
            && self.speed.valid();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid {class} profile")))
        }
    }
}

/// One value per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    pub car: T,
    pub pedestrian: T,
    pub pedestrian_group: T,
    pub bike: T,
    pub truck_bus: T,
    pub garbage: T,
}

impl<T> PerClass<T> {
    pub fn get(&self, label: ClassLabel) -> &T {
        match label {
            ClassLabel::Car => &self.car,
            ClassLabel::Pedestrian => &self.pedestrian,
            ClassLabel::PedestrianGroup => &self.pedestrian_group,
            ClassLabel::Bike => &self.bike,
            ClassLabel::TruckBus => &self.truck_bus,
            ClassLabel::Garbage => &self.garbage,
        }
    }

    pub fn get_mut(&mut self, label: ClassLabel) -> &mut T {
        match label {
            ClassLabel::Car => &mut self.car,
            ClassLabel::Pedestrian => &mut self.pedestrian,
            ClassLabel::PedestrianGroup => &mut self.pedestrian_group,
            ClassLabel::Bike => &mut self.bike,
            ClassLabel::TruckBus => &mut self.truck_bus,
            ClassLabel::Garbage => &mut self.garbage,
        }
    }
}

impl Default for PerClass<ClassProfile> {
    fn default() -> Self {
        let moving = Span::new(1.5, 3.0);
        PerClass {
            car: ClassProfile {
                targets_per_cycle: 3.0,
                length: 4.5,
                width: 1.8,
                doppler_spread: 0.15,
                amplitude_mean: 10.0,
                amplitude_std: 4.0,
                duration: moving,
                speed: Span::new(3.0, 12.0),
                jitter: 0.0,
                vr_offset: 0.0,
            },
            pedestrian: ClassProfile {
                targets_per_cycle: 1.2,
                length: 0.5,
                width: 0.5,
                doppler_spread: 0.6,
                amplitude_mean: -6.0,
                amplitude_std: 3.0,
                duration: moving,
                speed: Span::new(0.5, 2.0),
                jitter: 0.0,
                vr_offset: 0.0,
            },
            pedestrian_group: ClassProfile {
                targets_per_cycle: 2.5,
                length: 2.0,
                width: 1.5,
                doppler_spread: 0.5,
                amplitude_mean: -1.0,
                amplitude_std: 3.0,
                duration: moving,
                speed: Span::new(0.5, 1.8),
                jitter: 0.0,
                vr_offset: 0.0,
            },
            bike: ClassProfile {
                targets_per_cycle: 1.5,
                length: 1.8,
                width: 0.6,
                doppler_spread: 0.7,
                amplitude_mean: 0.0,
                amplitude_std: 3.0,
                duration: moving,
                speed: Span::new(2.5, 7.0),
                jitter: 0.0,
                vr_offset: 0.0,
            },
            truck_bus: ClassProfile {
                targets_per_cycle: 5.0,
                length: 10.0,
                width: 2.5,
                doppler_spread: 0.15,
                amplitude_mean: 16.0,
                amplitude_std: 4.0,
                duration: moving,
                speed: Span::new(3.0, 11.0),
                jitter: 0.0,
                vr_offset: 0.0,
            },
            garbage: ClassProfile {
                targets_per_cycle: 2.0,
                length: 1.0,
                width: 1.0,
                doppler_spread: 0.25,
                amplitude_mean: -8.0,
                amplitude_std: 4.0,
                duration: Span::new(0.12, 0.45),
                speed: Span::new(0.0, 0.0),
                jitter: 0.4,
                vr_offset: 3.0,
            },
        }
    }
}

/// Scene composition and measurement model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Total number of objects, split over the classes by `class_ratios`.
    pub n_objects: usize,
    pub class_ratios: PerClass<f64>,
    pub profiles: PerClass<ClassProfile>,
    pub sensor: SensorSpec,
    /// Mean number of isolated clutter targets per cycle. Each clutter
    /// target is its own garbage object.
    pub clutter_rate: f64,
    /// Azimuth noise standard deviation as a fraction of the local
    /// azimuth resolution.
    pub azimuth_noise: f64,
    /// Range band in which object tracks are centred, m.
    pub placement_range: Span,
    /// Pause between consecutive objects, s.
    pub gap: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            n_objects: 600,
            class_ratios: PerClass {
                car: 20.0,
                pedestrian: 2.7,
                pedestrian_group: 5.3,
                bike: 2.0,
                truck_bus: 3.3,
                garbage: 40.0,
            },
            profiles: PerClass::default(),
            sensor: SensorSpec::automotive_77ghz(),
            clutter_rate: 0.1,
            azimuth_noise: 0.1,
            placement_range: Span::new(8.0, 30.0),
            gap: 0.3,
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// Defaults with a 50:1 ratio between the car and bike object counts.
    pub fn imbalanced() -> Self {
        SceneConfig {
            n_objects: 273,
            class_ratios: PerClass {
                car: 50.0,
                pedestrian: 5.0,
                pedestrian_group: 5.0,
                bike: 1.0,
                truck_bus: 5.0,
                garbage: 25.0,
            },
            ..SceneConfig::default()
        }
    }

    /// Defaults with trucks shrunk towards cars in size, target count,
    /// amplitude and speed, so the two are easily confused.
    pub fn confusable_trucks() -> Self {
        let mut cfg = SceneConfig::default();
        let car = cfg.profiles.car;
        cfg.profiles.truck_bus = ClassProfile {
            targets_per_cycle: 3.4,
            length: 5.6,
            width: 2.0,
            amplitude_mean: 11.5,
            ..car
        };
        cfg.class_ratios.truck_bus = 10.0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        if self.n_objects == 0 {
            return Err(Error::InvalidParameter("scene needs at least one object".into()));
        }
        for label in ClassLabel::ALL {
            let r = *self.class_ratios.get(label);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("class ratio of {label} must be > 0")));
            }
            self.profiles.get(label).validate(label.name())?;
        }
        let ok = self.clutter_rate >= 0.0
            && self.clutter_rate.is_finite()
            && self.azimuth_noise >= 0.0
            && self.azimuth_noise.is_finite()
            && self.placement_range.valid()
            && self.placement_range.min >= self.sensor.range_min
            && self.placement_range.max <= self.sensor.range_max
            && self.gap > 0.0
            && self.gap.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid scene parameters".into()))
        }
    }

    /// Objects per class: the largest-remainder split of `n_objects` by
    /// `class_ratios`, with at least one object per class.
    pub fn object_counts(&self) -> [usize; ClassLabel::COUNT] {
        let total: f64 = ClassLabel::ALL.iter().map(|&l| self.class_ratios.get(l)).sum();
        let quota: Vec<f64> = ClassLabel::ALL
            .iter()
            .map(|&l| self.n_objects as f64 * self.class_ratios.get(l) / total)
            .collect();
        let mut counts = [0usize; ClassLabel::COUNT];
        for (c, q) in quota.iter().enumerate() {
            counts[c] = q.floor() as usize;
        }
        let mut order: Vec<usize> = (0..ClassLabel::COUNT).collect();
        order.sort_by(|&a, &b| (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor())).then(a.cmp(&b)));
        let missing = self.n_objects.saturating_sub(counts.iter().sum());
        for &c in order.iter().take(missing) {
            counts[c] += 1;
        }
        for c in counts.iter_mut() {
            *c = (*c).max(1);
        }
        counts
    }
}

struct ObjectPlan {
    id: i64,
    label: ClassLabel,
    first_cycle: u64,
    n_cycles: u64,
}

fn object_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream reserved for scene layout and clutter; object ids start at 1.
const SCENE_STREAM: u64 = 0;

/// Sensor whose boresight is closest to the vehicle-frame azimuth.
fn pick_sensor(layout: &[SensorPose], azimuth: f64) -> (u8, f64) {
    let rel = |p: &SensorPose| wrap_angle(azimuth - p.boresight);
    let (id, pose) = layout
        .iter()
        .enumerate()
        .min_by(|a, b| rel(a.1).abs().total_cmp(&rel(b.1).abs()))
        .expect("non-empty sensor layout");
    (id as u8, rel(pose))
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn quantize(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

struct Measurement<'a> {
    cfg: &'a SceneConfig,
    layout: Vec<SensorPose>,
}

impl Measurement<'_> {
    /// Turns a true point into a target, or `None` when it falls outside
    /// the sensor's range or velocity band.
    fn measure<R: Rng>(&self, rng: &mut R, time: f64, x: f64, y: f64, vr: f64, amp: f64) -> Option<Target> {
        let s = &self.cfg.sensor;
        let azimuth = y.atan2(x);
        let (sensor_id, rel) = pick_sensor(&self.layout, azimuth);
        let sigma = self.cfg.azimuth_noise * s.azimuth_res_at(rel);
        let azimuth = if sigma > 0.0 {
            azimuth + Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            azimuth
        };
        let range = quantize(x.hypot(y), s.range_res);
        let vr = quantize(vr, s.vr_res);
        if range < s.range_min || range > s.range_max || vr < s.vr_min || vr > s.vr_max {
            return None;
        }
        Some(Target::from_polar(time, range, azimuth, vr, amp, sensor_id))
    }
}

fn cycle_time(cycle: u64, dt: f64) -> f64 {
    cycle as f64 * dt
}

fn emit_object(cfg: &SceneConfig, m: &Measurement<'_>, plan: &ObjectPlan) -> Vec<(u64, LabeledTarget)> {
    let p = cfg.profiles.get(plan.label);
    let mut rng = object_rng(cfg.seed, plan.id as u64);
    let dt = cfg.sensor.cycle_time;
    let r0 = cfg.placement_range.sample(&mut rng);
    let az0 = rng.gen_range(-PI / 2.0..PI / 2.0);
    let heading = rng.gen_range(0.0..2.0 * PI);
    let speed = p.speed.sample(&mut rng);
    let (vx, vy) = (speed * heading.cos(), speed * heading.sin());
    let vr_offset = if p.vr_offset > 0.0 {
        rng.gen_range(-p.vr_offset..=p.vr_offset)
    } else {
        0.0
    };
    let count = Poisson::new(p.targets_per_cycle).expect("positive rate");
    let amp = Normal::new(p.amplitude_mean, p.amplitude_std.max(f64::MIN_POSITIVE)).expect("finite amplitude law");
    let micro = Normal::new(0.0, p.doppler_spread.max(f64::MIN_POSITIVE)).expect("finite spread");
    let jitter = Normal::new(0.0, p.jitter.max(f64::MIN_POSITIVE)).expect("finite jitter");

    // The track passes its anchor point half-way through its lifetime.
    let t_mid = 0.5 * (plan.n_cycles.saturating_sub(1)) as f64 * dt;
    let (ax, ay) = (r0 * az0.cos(), r0 * az0.sin());
    let (c, s) = (heading.cos(), heading.sin());
    let mut out = Vec::new();
    for k in 0..plan.n_cycles {
        let cycle = plan.first_cycle + k;
        let local_t = k as f64 * dt - t_mid;
        let (mut cx, mut cy) = (ax + vx * local_t, ay + vy * local_t);
        if p.jitter > 0.0 {
            cx += jitter.sample(&mut rng);
            cy += jitter.sample(&mut rng);
        }
        let n = count.sample(&mut rng) as usize;
        for _ in 0..n {
            let along = rng.gen_range(-0.5..=0.5) * p.length;
            let across = rng.gen_range(-0.5..=0.5) * p.width;
            let x = cx + along * c - across * s;
            let y = cy + along * s + across * c;
            let r = x.hypot(y).max(f64::MIN_POSITIVE);
            let mut vr = (vx * x + vy * y) / r + vr_offset;
            if p.doppler_spread > 0.0 {
                vr += micro.sample(&mut rng);
            }
            let a = if p.amplitude_std > 0.0 {
                amp.sample(&mut rng)
            } else {
                p.amplitude_mean
            };
            if let Some(target) = m.measure(&mut rng, cycle_time(cycle, dt), x, y, vr, a) {
                out.push((
                    cycle,
                    LabeledTarget {
                        target,
                        cluster_id: None,
                        object_id: plan.id,
                        label: plan.label,
                    },
                ));
            }
        }
    }
    out
}

/// Generates a labelled target stream, ordered by time and then object id.
pub fn generate(cfg: &SceneConfig) -> Result<Vec<LabeledTarget>> {
    cfg.validate()?;
    let dt = cfg.sensor.cycle_time;
    let mut scene_rng = object_rng(cfg.seed, SCENE_STREAM);

    let counts = cfg.object_counts();
    let mut labels: Vec<ClassLabel> = ClassLabel::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&l, n)| std::iter::repeat_n(l, n))
        .collect();
    labels.shuffle(&mut scene_rng);

    let gap_cycles = (cfg.gap / dt).ceil() as u64;
    let mut plans = Vec::with_capacity(labels.len());
    let mut next_cycle = 0u64;
    for (i, &label) in labels.iter().enumerate() {
        let duration = cfg.profiles.get(label).duration.sample(&mut scene_rng);
        let n_cycles = ((duration / dt).round() as u64).max(1);
        plans.push(ObjectPlan {
            id: i as i64 + 1,
            label,
            first_cycle: next_cycle,
            n_cycles,
        });
        next_cycle += n_cycles + gap_cycles;
    }

    let m = Measurement {
        cfg,
        layout: SensorPose::default_layout(),
    };
    let mut tagged: Vec<(u64, LabeledTarget)> = plans.iter().flat_map(|p| emit_object(cfg, &m, p)).collect();

    if cfg.clutter_rate > 0.0 {
        let clutter = Poisson::new(cfg.clutter_rate).expect("positive rate");
        let mut id = plans.len() as i64 + 1;
        for cycle in 0..next_cycle {
            for _ in 0..clutter.sample(&mut scene_rng) as usize {
                let r = scene_rng.gen_range(cfg.sensor.range_min..cfg.sensor.range_max);
                let az = scene_rng.gen_range(-PI / 2.0..PI / 2.0);
                let vr = scene_rng.gen_range(-5.0..5.0);
                let a = scene_rng.gen_range(-15.0..0.0);
                if let Some(target) = m.measure(&mut scene_rng, cycle_time(cycle, dt), r * az.cos(), r * az.sin(), vr, a) {
                    tagged.push((
                        cycle,
                        LabeledTarget {
                            target,
                            cluster_id: None,
                            object_id: id,
                            label: ClassLabel::Garbage,
                        },
                    ));
                    id += 1;
                }
            }
        }
    }
    tagged.sort_by_key(|(cycle, t)| (*cycle, t.object_id));
    Ok(tagged.into_iter().map(|(_, t)| t).collect())
}

/// Cluster samples that use each object id as its cluster id, skipping
/// the clustering stage.
pub fn ground_truth_samples(targets: &[LabeledTarget]) -> Vec<ClusterSample> {
    let mut tracks: std::collections::BTreeMap<i64, ClusterTrack> = std::collections::BTreeMap::new();
    for t in targets {
        tracks
            .entry(t.object_id)
            .or_insert_with(|| ClusterTrack {
                cluster_id: t.object_id,
                object_id: t.object_id,
                label: t.label,
                targets: Vec::new(),
            })
            .targets
            .push(t.target);
    }
    tracks.values().flat_map(window_samples).collect()
}

/// Registry features that keep their class signal in the benchmark.
pub const DEFAULT_INFORMATIVE: [&str; 5] = ["con95major", "vrCompStd", "ampMean", "nTargets", "phiSpread"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scene: SceneConfig,
    pub informative: Vec<String>,
    pub n_noise: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scene: SceneConfig {
                n_objects: 200,
                ..SceneConfig::default()
            },
            informative: DEFAULT_INFORMATIVE.iter().map(|s| s.to_string()).collect(),
            n_noise: 15,
        }
    }
}

/// Which benchmark columns carry class signal and where each noise column
/// was taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDeclaration {
    pub informative: Vec<String>,
    pub noise: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBenchmark {
    pub table: FeatureTable,
    pub declaration: BenchmarkDeclaration,
}

impl FeatureBenchmark {
    /// Writes `<stem>.csv` and the declaration as `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        crate::features::write_feature_csv(std::io::BufWriter::new(csv), &self.table)?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.declaration)?,
        )?;
        Ok(())
    }
}

/// Feature vectors in which the declared columns are real and every other
/// column is a row-permuted copy of a further registry feature, so it keeps
/// the marginal distribution but loses all class signal. Column order is
/// shuffled with the scene seed.
pub fn generate_feature_benchmark(cfg: &BenchmarkConfig) -> Result<FeatureBenchmark> {
    let targets = generate(&cfg.scene)?;
    let samples = ground_truth_samples(&targets);
    let full = feature_table(&samples, &FeatureParams::default())?;

    let informative: Vec<usize> = cfg
        .informative
        .iter()
        .map(|n| feature_index(n).ok_or_else(|| Error::InvalidParameter(format!("unknown feature {n:?}"))))
        .collect::<Result<_>>()?;
    let mut rng = object_rng(cfg.scene.seed, u64::MAX);
    let mut pool: Vec<usize> = (0..REGISTRY.len()).filter(|i| !informative.contains(i)).collect();
    if cfg.n_noise > pool.len() {
        return Err(Error::InvalidParameter(format!(
            "at most {} noise columns are available",
            pool.len()
        )));
    }
    pool.shuffle(&mut rng);
    let noise: Vec<usize> = pool[..cfg.n_noise].to_vec();

    let mut columns: Vec<(usize, bool)> = informative
        .iter()
        .map(|&i| (i, false))
        .chain(noise.iter().map(|&i| (i, true)))
        .collect();
    columns.shuffle(&mut rng);

    let n = full.rows.len();
    let perms: Vec<Option<Vec<usize>>> = columns
        .iter()
        .map(|&(_, permuted)| {
            permuted.then(|| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
        })
        .collect();
    let rows = full
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let values = columns
                .iter()
                .zip(&perms)
                .map(|(&(c, _), perm)| match perm {
                    Some(p) => full.rows[p[r]].values[c],
                    None => row.values[c],
                })
                .collect();
            crate::features::FeatureRow {
                values,
                ..row.clone()
            }
        })
        .collect();
    let name = |i: usize| REGISTRY[i].to_string();
    Ok(FeatureBenchmark {
        table: FeatureTable {
            registry_version: full.registry_version,
            names: columns.iter().map(|&(c, _)| name(c)).collect(),
            rows,
        },
        declaration: BenchmarkDeclaration {
            informative: informative.iter().map(|&i| name(i)).collect(),
            noise: noise.iter().map(|&i| name(i)).collect(),
            seed: cfg.scene.seed,
        },
    })
}
