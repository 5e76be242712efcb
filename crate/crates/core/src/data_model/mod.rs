//! Record types shared by every stage of the pipeline.
//!
//! Everything here is SI: metres, radians, seconds, m/s. The sensor data
//! sheet quotes km/h and degrees; those are converted once in
//! [`SensorSpec::automotive_77ghz`].
//!
//! A [`Target`] stores its position in the vehicle frame, both cartesian
//! (`x`, `y`) and polar (`range`, `azimuth`) about the vehicle origin. The
//! mounting pose of the sensor that saw it is only needed again for Doppler
//! compensation, which looks it up through `sensor_id`.

mod io;

pub use io::{
    read_samples_jsonl, read_targets_csv, write_samples_jsonl, write_targets_csv, LabeledTarget,
    TARGET_CSV_HEADER,
};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of one cluster sample window.
pub const WINDOW_SECONDS: f64 = 0.150;

/// Fraction of targets removed by the drop augmentation.
pub const DROP_FRACTION: f64 = 0.40;

const KMH: f64 = 1.0 / 3.6;

/// Operational limits and resolutions of one radar sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub carrier_frequency: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// Half-width of the field of view around boresight.
    pub azimuth_limit: f64,
    pub vr_min: f64,
    pub vr_max: f64,
    pub cycle_time: f64,
    pub range_res: f64,
    /// Azimuth resolution at boresight.
    pub azimuth_res_min: f64,
    /// Azimuth resolution at the edge of the field of view.
    pub azimuth_res_max: f64,
    pub vr_res: f64,
}

impl SensorSpec {
    /// 77 GHz corner radar: 0.25-100 m, ±45°, -400..+200 km/h, 60 ms cycle,
    /// Δr 0.42 m, Δφ 3.2°-12.3°, Δv_r 0.43 km/h.
    pub fn automotive_77ghz() -> Self {
        SensorSpec {
            carrier_frequency: 77.0e9,
            range_min: 0.25,
            range_max: 100.0,
            azimuth_limit: 45f64.to_radians(),
            vr_min: -400.0 * KMH,
            vr_max: 200.0 * KMH,
            cycle_time: 0.060,
            range_res: 0.42,
            azimuth_res_min: 3.2f64.to_radians(),
            azimuth_res_max: 12.3f64.to_radians(),
            vr_res: 0.43 * KMH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let resolutions = [
            self.range_res,
            self.azimuth_res_min,
            self.azimuth_res_max,
            self.vr_res,
            self.cycle_time,
        ];
        if !(self.range_min < self.range_max) {
            return Err(Error::InvalidParameter("range_min must be < range_max".into()));
        }
        if !(self.vr_min < self.vr_max) {
            return Err(Error::InvalidParameter("vr_min must be < vr_max".into()));
        }
        if resolutions.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter("all resolutions must be > 0".into()));
        }
        Ok(())
    }

    /// Azimuth resolution at sensor-frame angle `azimuth`, interpolated
    /// linearly from boresight to the field-of-view edge.
    pub fn azimuth_res_at(&self, azimuth: f64) -> f64 {
        let t = (azimuth.abs() / self.azimuth_limit).clamp(0.0, 1.0);
        self.azimuth_res_min + t * (self.azimuth_res_max - self.azimuth_res_min)
    }
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self::automotive_77ghz()
    }
}

/// One radar detection in the common vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub range: f64,
    pub azimuth: f64,
    /// Ego-motion compensated radial velocity.
    pub vr_comp: f64,
    /// Amplitude after free-space path-loss compensation, dB.
    pub amplitude: f64,
    pub sensor_id: u8,
}

impl Target {
    /// Builds a target from vehicle-frame polar coordinates.
    pub fn from_polar(
        time: f64,
        range: f64,
        azimuth: f64,
        vr_comp: f64,
        amplitude: f64,
        sensor_id: u8,
    ) -> Self {
        Target {
            time,
            x: range * azimuth.cos(),
            y: range * azimuth.sin(),
            range,
            azimuth,
            vr_comp,
            amplitude,
            sensor_id,
        }
    }

    /// Builds a target from vehicle-frame cartesian coordinates.
    pub fn from_cartesian(
        time: f64,
        x: f64,
        y: f64,
        vr_comp: f64,
        amplitude: f64,
        sensor_id: u8,
    ) -> Self {
        Target {
            time,
            x,
            y,
            range: x.hypot(y),
            azimuth: y.atan2(x),
            vr_comp,
            amplitude,
            sensor_id,
        }
    }
}

/// Road-user classes. The discriminants are the stable integer codes.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Car = 0,
    Pedestrian = 1,
    PedestrianGroup = 2,
    Bike = 3,
    TruckBus = 4,
    Garbage = 5,
}

impl ClassLabel {
    pub const COUNT: usize = 6;

    pub const ALL: [ClassLabel; 6] = [
        ClassLabel::Car,
        ClassLabel::Pedestrian,
        ClassLabel::PedestrianGroup,
        ClassLabel::Bike,
        ClassLabel::TruckBus,
        ClassLabel::Garbage,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Car => "car",
            ClassLabel::Pedestrian => "pedestrian",
            ClassLabel::PedestrianGroup => "pedestrian_group",
            ClassLabel::Bike => "bike",
            ClassLabel::TruckBus => "truck_bus",
            ClassLabel::Garbage => "garbage",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::data("class label", format!("unknown class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationTag {
    Original,
    /// Cluster as delivered by the clustering stage, before label correction.
    Uncorrected,
    Dropped40,
}

/// All targets of one cluster id inside one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSample {
    pub cluster_id: i64,
    pub object_id: i64,
    pub label: ClassLabel,
    pub window_start: f64,
    pub targets: Vec<Target>,
    pub augmentation_tag: AugmentationTag,
}

/// Time-ordered targets of one cluster id, with the label assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTrack {
    pub cluster_id: i64,
    pub object_id: i64,
    pub label: ClassLabel,
    pub targets: Vec<Target>,
}

/// Mounting position and boresight of one sensor in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub x: f64,
    pub y: f64,
    pub boresight: f64,
}

impl SensorPose {
    pub const ORIGIN: SensorPose = SensorPose {
        x: 0.0,
        y: 0.0,
        boresight: 0.0,
    };

    /// Four sensors: both front corners and both lateral sides.
    pub fn default_layout() -> Vec<SensorPose> {
        vec![
            SensorPose { x: 3.6, y: 0.8, boresight: PI / 4.0 },
            SensorPose { x: 3.6, y: -0.8, boresight: -PI / 4.0 },
            SensorPose { x: 1.2, y: 0.9, boresight: PI / 2.0 },
            SensorPose { x: 1.2, y: -0.9, boresight: -PI / 2.0 },
        ]
    }
}

/// Planar motion of the host vehicle. Speed may be negative when reversing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub speed: f64,
    pub yaw_rate: f64,
    pub sensors: Vec<SensorPose>,
}

impl EgoState {
    pub fn pose(&self, sensor_id: u8) -> Option<SensorPose> {
        self.sensors.get(sensor_id as usize).copied()
    }

    /// Velocity of the mounting point of `pose` over ground, vehicle axes.
    pub fn sensor_velocity(&self, pose: &SensorPose) -> (f64, f64) {
        (
            self.speed - self.yaw_rate * pose.y,
            self.yaw_rate * pose.x,
        )
    }
}

/// A detection as reported by one sensor, in its own polar frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    pub time: f64,
    pub sensor_id: u8,
    pub range: f64,
    pub azimuth: f64,
    /// Radial velocity relative to the sensor, not compensated.
    pub vr: f64,
    pub amplitude: f64,
}

/// Rotates and translates a sensor-frame detection into the vehicle frame.
///
/// `vr_comp` of the returned target still holds the raw radial velocity;
/// run [`compensate_ego_motion`] (or use [`ingest`]) to fill it properly.
pub fn to_common_frame(raw: &RawDetection, pose: &SensorPose, spec: &SensorSpec) -> Result<Target> {
    if !raw.range.is_finite() || raw.range < spec.range_min || raw.range > spec.range_max {
        return Err(Error::RejectedDetection(format!(
            "range {} m outside [{}, {}]",
            raw.range, spec.range_min, spec.range_max
        )));
    }
    if !raw.azimuth.is_finite() || raw.azimuth.abs() > spec.azimuth_limit {
        return Err(Error::RejectedDetection(format!(
            "azimuth {} rad outside ±{}",
            raw.azimuth, spec.azimuth_limit
        )));
    }
    let bearing = pose.boresight + raw.azimuth;
    let x = pose.x + raw.range * bearing.cos();
    let y = pose.y + raw.range * bearing.sin();
    Ok(Target::from_cartesian(
        raw.time,
        x,
        y,
        raw.vr,
        raw.amplitude,
        raw.sensor_id,
    ))
}

/// Adds back the radial component of the sensor's own velocity.
///
/// The line of sight is taken from the sensor mount to the target, so a
/// static world point reads zero. Targets whose sensor id has no pose in
/// `ego` are treated as seen from the vehicle origin.
pub fn compensate_ego_motion(raw_vr: f64, target: &Target, ego: &EgoState) -> f64 {
    let pose = ego.pose(target.sensor_id).unwrap_or(SensorPose::ORIGIN);
    let (sx, sy) = ego.sensor_velocity(&pose);
    let theta = (target.y - pose.y).atan2(target.x - pose.x);
    raw_vr + (sx * theta.cos() + sy * theta.sin())
}

/// Frame transform followed by Doppler compensation.
pub fn ingest(raw: &RawDetection, ego: &EgoState, spec: &SensorSpec) -> Result<Target> {
    let pose = ego.pose(raw.sensor_id).ok_or_else(|| {
        Error::RejectedDetection(format!("no mounting pose for sensor {}", raw.sensor_id))
    })?;
    let mut target = to_common_frame(raw, &pose, spec)?;
    target.vr_comp = compensate_ego_motion(raw.vr, &target, ego);
    Ok(target)
}

/// Cuts a track into tumbling windows anchored at its first timestamp.
///
/// Windows that receive no target are skipped, so the returned samples are
/// not necessarily contiguous in time.
pub fn window_samples(track: &ClusterTrack) -> Vec<ClusterSample> {
    let Some(first) = track.targets.first() else {
        return Vec::new();
    };
    let t0 = first.time;
    let mut samples: Vec<ClusterSample> = Vec::new();
    let mut current: Option<(i64, Vec<Target>)> = None;
    for target in &track.targets {
        let idx = window_index(target.time - t0);
        match &mut current {
            Some((k, targets)) if *k == idx => targets.push(*target),
            _ => {
                if let Some((k, targets)) = current.take() {
                    samples.push(make_sample(track, t0, k, targets));
                }
                current = Some((idx, vec![*target]));
            }
        }
    }
    if let Some((k, targets)) = current {
        samples.push(make_sample(track, t0, k, targets));
    }
    samples
}

/// Window index for an offset from the track start. The small slack keeps
/// cycle-aligned timestamps such as 0.3 s out of the preceding window when
/// the division rounds down.
fn window_index(offset: f64) -> i64 {
    (offset / WINDOW_SECONDS + 1e-9).floor() as i64
}

fn make_sample(track: &ClusterTrack, t0: f64, k: i64, targets: Vec<Target>) -> ClusterSample {
    ClusterSample {
        cluster_id: track.cluster_id,
        object_id: track.object_id,
        label: track.label,
        window_start: t0 + k as f64 * WINDOW_SECONDS,
        targets,
        augmentation_tag: AugmentationTag::Original,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Augmented {
    Dropped(ClusterSample),
    /// Too few targets to drop any; carries the input unchanged.
    Skipped(ClusterSample),
}

impl Augmented {
    pub fn into_sample(self) -> ClusterSample {
        match self {
            Augmented::Dropped(s) | Augmented::Skipped(s) => s,
        }
    }
}

/// Randomly removes `round(fraction * n)` targets (half rounds up).
pub fn augment_drop(sample: &ClusterSample, fraction: f64, seed: u64) -> Augmented {
    let n = sample.targets.len();
    if n < 2 {
        return Augmented::Skipped(sample.clone());
    }
    let n_drop = ((fraction * n as f64) + 0.5).floor() as usize;
    let n_drop = n_drop.min(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; n];
    for i in index::sample(&mut rng, n, n_drop) {
        dropped[i] = true;
    }
    let targets = sample
        .targets
        .iter()
        .zip(&dropped)
        .filter(|(_, d)| !**d)
        .map(|(t, _)| *t)
        .collect();
    Augmented::Dropped(ClusterSample {
        targets,
        augmentation_tag: AugmentationTag::Dropped40,
        ..sample.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(range: f64, azimuth: f64) -> RawDetection {
        RawDetection {
            time: 0.0,
            sensor_id: 0,
            range,
            azimuth,
            vr: 0.0,
            amplitude: 0.0,
        }
    }

    #[test]
    fn identity_pose_keeps_coordinates() {
        let t = to_common_frame(&raw(10.0, 0.0), &SensorPose::ORIGIN, &SensorSpec::default()).unwrap();
        assert!((t.x - 10.0).abs() < 1e-12);
        assert!(t.y.abs() < 1e-12);
    }

    #[test]
    fn offset_rotated_pose() {
        let pose = SensorPose { x: 1.0, y: 0.0, boresight: PI / 2.0 };
        let t = to_common_frame(&raw(2.0, 0.0), &pose, &SensorSpec::default()).unwrap();
        // rotate (2, 0) by 90° -> (0, 2), then translate by (1, 0)
        assert!((t.x - 1.0).abs() < 1e-12);
        assert!((t.y - 2.0).abs() < 1e-12);
        assert!((t.x - t.range * t.azimuth.cos()).abs() < 1e-9);
        assert!((t.y - t.range * t.azimuth.sin()).abs() < 1e-9);
    }

    #[test]
    fn negative_range_is_rejected() {
        let err = to_common_frame(&raw(-1.0, 0.0), &SensorPose::ORIGIN, &SensorSpec::default());
        assert!(matches!(err, Err(Error::RejectedDetection(_))));
        let err = to_common_frame(&raw(5.0, 1.0), &SensorPose::ORIGIN, &SensorSpec::default());
        assert!(matches!(err, Err(Error::RejectedDetection(_))));
    }

    #[test]
    fn table_values_are_converted_to_si() {
        let s = SensorSpec::automotive_77ghz();
        assert!((s.vr_res - 0.119_444_444_444).abs() < 1e-9);
        assert!((s.vr_min + 111.111_111_111).abs() < 1e-6);
        assert!((s.azimuth_limit - PI / 4.0).abs() < 1e-15);
        s.validate().unwrap();
    }

    fn ego(speed: f64, yaw_rate: f64, pose: SensorPose) -> EgoState {
        EgoState { speed, yaw_rate, sensors: vec![pose] }
    }

    #[test]
    fn zero_ego_motion_is_identity() {
        let t = Target::from_polar(0.0, 7.0, 0.3, 0.0, 0.0, 0);
        let e = ego(0.0, 0.0, SensorPose::ORIGIN);
        assert_eq!(compensate_ego_motion(-2.5, &t, &e), -2.5);
    }

    #[test]
    fn static_target_dead_ahead() {
        let t = Target::from_polar(0.0, 20.0, 0.0, 0.0, 0.0, 0);
        let e = ego(10.0, 0.0, SensorPose::ORIGIN);
        assert!(compensate_ego_motion(-10.0, &t, &e).abs() < 1e-12);
    }

    /// Rigid-body oracle: v_sensor = v_ego + ω × r_mount, evaluated with
    /// explicit 3-D cross products.
    fn rigid_body_sensor_velocity(speed: f64, yaw: f64, mount: [f64; 3]) -> [f64; 3] {
        let omega = [0.0, 0.0, yaw];
        let cross = [
            omega[1] * mount[2] - omega[2] * mount[1],
            omega[2] * mount[0] - omega[0] * mount[2],
            omega[0] * mount[1] - omega[1] * mount[0],
        ];
        [speed + cross[0], cross[1], cross[2]]
    }

    #[test]
    fn yawing_ego_with_offset_sensor() {
        let pose = SensorPose { x: 2.0, y: 1.0, boresight: 0.0 };
        let theta = PI / 4.0;
        let x = 2.0 + 10.0 * theta.cos();
        let y = 1.0 + 10.0 * theta.sin();
        let t = Target::from_cartesian(0.0, x, y, 0.0, 0.0, 0);
        let e = ego(5.0, 0.1, pose);
        let v = rigid_body_sensor_velocity(5.0, 0.1, [2.0, 1.0, 0.0]);
        let los = [theta.cos(), theta.sin(), 0.0];
        let expected = -3.0 + (v[0] * los[0] + v[1] * los[1] + v[2] * los[2]);
        let got = compensate_ego_motion(-3.0, &t, &e);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        // hand value: -3 + 5.1 / sqrt(2)
        assert!((got - 0.606_244_584_051_392).abs() < 1e-9);
    }

    #[test]
    fn static_world_reads_zero_for_every_sensor() {
        let e = EgoState { speed: 12.0, yaw_rate: -0.3, sensors: SensorPose::default_layout() };
        let spec = SensorSpec::default();
        for (id, pose) in e.sensors.iter().enumerate() {
            for &az in &[-0.6, 0.0, 0.4] {
                let d = RawDetection { time: 0.0, sensor_id: id as u8, range: 15.0, azimuth: az, vr: 0.0, amplitude: 0.0 };
                let t = to_common_frame(&d, pose, &spec).unwrap();
                let (sx, sy) = e.sensor_velocity(pose);
                let bearing = pose.boresight + az;
                // a static point moves at -v_sensor relative to the sensor
                let raw_vr = -(sx * bearing.cos() + sy * bearing.sin());
                assert!(compensate_ego_motion(raw_vr, &t, &e).abs() < 1e-9);
            }
        }
    }

    fn track(times: &[f64]) -> ClusterTrack {
        ClusterTrack {
            cluster_id: 7,
            object_id: 3,
            label: ClassLabel::Bike,
            targets: times
                .iter()
                .map(|&t| Target::from_polar(t, 10.0, 0.1, 1.0, 0.0, 0))
                .collect(),
        }
    }

    #[test]
    fn windows_over_450ms() {
        let times: Vec<f64> = (0..=449).map(|ms| ms as f64 / 1000.0).collect();
        let samples = window_samples(&track(&times));
        assert_eq!(samples.len(), 3);
        for s in &samples {
            for t in &s.targets {
                assert!(t.time >= s.window_start - 1e-12);
                assert!(t.time < s.window_start + WINDOW_SECONDS);
            }
        }
    }

    #[test]
    fn windows_single_and_boundary() {
        let s = window_samples(&track(&[0.0]));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].targets.len(), 1);

        let s = window_samples(&track(&[0.10, 0.26]));
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].targets.len(), 1);
        assert_eq!(s[1].targets.len(), 1);

        assert!(window_samples(&track(&[])).is_empty());
    }

    #[test]
    fn windows_skip_empty_gaps() {
        let s = window_samples(&track(&[0.0, 0.05, 0.7]));
        assert_eq!(s.len(), 2);
        assert!((s[1].window_start - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cycle_aligned_times_stay_in_their_window() {
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.06).collect();
        let s = window_samples(&track(&times));
        let idx: Vec<usize> = s.iter().map(|s| s.targets.len()).collect();
        // 0.00 0.06 0.12 | 0.18 0.24 | 0.30 0.36 0.42 | ...
        assert_eq!(&idx[..3], &[3, 2, 3]);
    }

    fn sample_with(n: usize) -> ClusterSample {
        ClusterSample {
            cluster_id: 1,
            object_id: 1,
            label: ClassLabel::Car,
            window_start: 0.0,
            targets: (0..n)
                .map(|i| Target::from_polar(0.0, 10.0 + i as f64, 0.0, 0.0, i as f64, 0))
                .collect(),
            augmentation_tag: AugmentationTag::Original,
        }
    }

    #[test]
    fn drop_forty_percent() {
        match augment_drop(&sample_with(10), DROP_FRACTION, 1) {
            Augmented::Dropped(s) => {
                assert_eq!(s.targets.len(), 6);
                assert_eq!(s.augmentation_tag, AugmentationTag::Dropped40);
            }
            other => panic!("unexpected {other:?}"),
        }
        match augment_drop(&sample_with(1), DROP_FRACTION, 1) {
            Augmented::Skipped(s) => assert_eq!(s.augmentation_tag, AugmentationTag::Original),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drop_is_deterministic() {
        let a = augment_drop(&sample_with(5), DROP_FRACTION, 99).into_sample();
        let b = augment_drop(&sample_with(5), DROP_FRACTION, 99).into_sample();
        assert_eq!(a, b);
        assert_eq!(a.targets.len(), 3);
    }

    proptest! {
        #[test]
        fn polar_cartesian_round_trip(r in 0.25f64..100.0, az in -3.1f64..3.1) {
            let t = Target::from_polar(0.0, r, az, 0.0, 0.0, 0);
            let back = Target::from_cartesian(0.0, t.x, t.y, 0.0, 0.0, 0);
            prop_assert!((back.range - r).abs() <= 1e-9 * r);
            prop_assert!((back.azimuth - az).abs() <= 1e-9 * az.abs().max(1.0));
        }

        #[test]
        fn compensation_is_linear_in_raw_vr(a in -50.0f64..50.0, b in -50.0f64..50.0,
                                            speed in -20.0f64..40.0, yaw in -1.0f64..1.0,
                                            r in 1.0f64..80.0, az in -3.0f64..3.0) {
            let e = EgoState { speed, yaw_rate: yaw, sensors: vec![SensorPose { x: 3.0, y: -0.5, boresight: 0.2 }] };
            let t = Target::from_polar(0.0, r, az, 0.0, 0.0, 0);
            let off_a = compensate_ego_motion(a, &t, &e) - a;
            let off_b = compensate_ego_motion(b, &t, &e) - b;
            prop_assert!((off_a - off_b).abs() < 1e-9);
        }

        #[test]
        fn windows_partition_track(mut times in proptest::collection::vec(0.0f64..3.0, 0..60)) {
            times.sort_by(f64::total_cmp);
            let samples = window_samples(&track(&times));
            let total: usize = samples.iter().map(|s| s.targets.len()).sum();
            prop_assert_eq!(total, times.len());
            let flat: Vec<f64> = samples.iter().flat_map(|s| s.targets.iter().map(|t| t.time)).collect();
            prop_assert_eq!(flat, times);
        }

        #[test]
        fn drop_keeps_a_subset(n in 2usize..40, seed in any::<u64>()) {
            let s = sample_with(n);
            let out = augment_drop(&s, DROP_FRACTION, seed).into_sample();
            prop_assert!(out.targets.iter().all(|t| s.targets.contains(t)));
            let expected_drop = ((0.4 * n as f64) + 0.5).floor() as usize;
            prop_assert_eq!(out.targets.len(), n - expected_drop.min(n - 1));
        }
    }
}
