//! The 50-entry feature vector computed per cluster sample.
//!
//! Registry layout (version [`REGISTRY_VERSION`]):
//!
//! | slots  | group                                                         |
//! |--------|---------------------------------------------------------------|
//! | 0-19   | max/min/mean/std/spread of range, azimuth, compensated vr, amplitude |
//! | 20-25  | covariance eigenvalues, target counts, range-compensated values, stationary fraction |
//! | 26-41  | hull, rectangle, ellipse, circle, CBO and line fits           |
//! | 42-49  | range/azimuth/ellipse-axis spreads and correlations against Doppler |
//!
//! Thirty-six of the names are the established ones from the radar
//! literature (`con95major`, `vrCompMax`, `fracStationary`, ...). The
//! remaining fourteen complete the statistics families (for example
//! `rMin`, `vrCompMean`, `ampMax`) and the ellipse-axis linearities. The
//! order is frozen; any change bumps the version string.
//!
//! Every feature is finite for every non-empty sample. Ratios and
//! correlations whose denominator vanishes are reported as 0.

mod io;

pub use io::{read_feature_csv, write_feature_csv, FeatureRow, FeatureTable};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{ClusterSample, SensorSpec};
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

pub const REGISTRY_VERSION: &str = "radarclass-features-v1";

pub const N_FEATURES: usize = 50;

pub const REGISTRY: [&str; N_FEATURES] = [
    // basic statistics
    "rMax",
    "rMin",
    "rMean",
    "rStd",
    "rSpread",
    "phiMax",
    "phiMin",
    "phiMean",
    "phiStd",
    "phiSpread",
    "vrCompMax",
    "vrCompMin",
    "vrCompMean",
    "vrCompStd",
    "vrCompSpread",
    "ampMax",
    "ampMin",
    "ampMean",
    "ampStd",
    "ampSpread",
    // covariance, counts, range compensation
    "covEV1",
    "covEV2",
    "nTargets",
    "nTargetsComp",
    "phiSpreadComp",
    "fracStationary",
    // shape
    "cohuArea",
    "cohuPerimeter",
    "cohuDensity",
    "circularity",
    "fitCircleRadius",
    "rehuArea",
    "rehuPerimeter",
    "rehuDensity",
    "con95major",
    "con95minor",
    "CBOinner",
    "CBOmiddle",
    "CBOouter",
    "maxDistDev",
    "xyLinearity",
    "compactness",
    // Doppler profile
    "rVrSpread",
    "phiVrSpread",
    "rVrLinearity",
    "phiVrLinearity",
    "majorVrSpread",
    "minorVrSpread",
    "majorVrLinearity",
    "minorVrLinearity",
];

/// Registry index of a feature name.
pub fn feature_index(name: &str) -> Option<usize> {
    REGISTRY.iter().position(|n| *n == name)
}

/// Tunables of the extractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Targets with `|vr_comp|` below this count as stationary.
    pub v_stationary: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            v_stationary: SensorSpec::automotive_77ghz().vr_res,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [&'static str] {
        &REGISTRY
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

/// An ordered, duplicate-free selection of registry features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub selected: Vec<String>,
}

impl FeatureSubset {
    pub fn new(names: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let selected: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, name) in selected.iter().enumerate() {
            if feature_index(name).is_none() {
                return Err(Error::InvalidParameter(format!("unknown feature {name:?}")));
            }
            if selected[..i].contains(name) {
                return Err(Error::InvalidParameter(format!("duplicate feature {name:?}")));
            }
        }
        Ok(FeatureSubset { selected })
    }

    pub fn all() -> Self {
        FeatureSubset {
            selected: REGISTRY.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Registry indices in subset order.
    pub fn indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .map(|n| feature_index(n).expect("validated at construction"))
            .collect()
    }
}

/// max, min, mean, std (n-1), spread.
fn five_stats(v: &[f64]) -> [f64; 5] {
    let n = v.len() as f64;
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 && max > min {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    [max, min, mean, std, max - min]
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 || spread(a) == 0.0 || spread(b) == 0.0 {
        return 0.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Per-sample columns reused by several feature groups.
struct Columns {
    range: Vec<f64>,
    azimuth: Vec<f64>,
    vr: Vec<f64>,
    amplitude: Vec<f64>,
    /// Positions relative to the centroid.
    centered: Vec<Point>,
}

impl Columns {
    fn of(sample: &ClusterSample) -> Self {
        let t = &sample.targets;
        let raw: Vec<Point> = t.iter().map(|t| Point::new(t.x, t.y)).collect();
        let c = geometry::centroid(&raw);
        Columns {
            range: t.iter().map(|t| t.range).collect(),
            azimuth: t.iter().map(|t| t.azimuth).collect(),
            vr: t.iter().map(|t| t.vr_comp).collect(),
            amplitude: t.iter().map(|t| t.amplitude).collect(),
            centered: raw.iter().map(|p| Point::new(p.x - c.x, p.y - c.y)).collect(),
        }
    }
}

fn ensure_nonempty(sample: &ClusterSample) -> Result<()> {
    if sample.targets.is_empty() {
        Err(Error::Empty(format!(
            "cluster {} window {} has no targets",
            sample.cluster_id, sample.window_start
        )))
    } else {
        Ok(())
    }
}

/// max/min/mean/std/spread of range, azimuth, vr_comp and amplitude.
pub fn basic_stats(sample: &ClusterSample) -> Result<[f64; 20]> {
    ensure_nonempty(sample)?;
    Ok(basic_stats_of(&Columns::of(sample)))
}

fn basic_stats_of(c: &Columns) -> [f64; 20] {
    let mut out = [0.0; 20];
    for (k, col) in [&c.range, &c.azimuth, &c.vr, &c.amplitude].into_iter().enumerate() {
        out[5 * k..5 * k + 5].copy_from_slice(&five_stats(col));
    }
    out
}

/// `(covEV1, covEV2)` of the x/y sample covariance.
pub fn covariance_features(sample: &ClusterSample) -> Result<(f64, f64)> {
    ensure_nonempty(sample)?;
    Ok(geometry::Covariance2::of(&Columns::of(sample).centered).eigenvalues())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedFeatures {
    pub n_targets: f64,
    pub n_targets_comp: f64,
    pub phi_spread: f64,
    pub phi_spread_comp: f64,
    pub frac_stationary: f64,
}

pub fn compensated_features(
    sample: &ClusterSample,
    params: &FeatureParams,
) -> Result<CompensatedFeatures> {
    ensure_nonempty(sample)?;
    Ok(compensated_of(&Columns::of(sample), params))
}

fn compensated_of(c: &Columns, params: &FeatureParams) -> CompensatedFeatures {
    let n = c.range.len() as f64;
    let r_mean = c.range.iter().sum::<f64>() / n;
    let phi_spread = spread(&c.azimuth);
    let stationary = c.vr.iter().filter(|v| v.abs() < params.v_stationary).count() as f64;
    CompensatedFeatures {
        n_targets: n,
        n_targets_comp: n * r_mean,
        phi_spread,
        phi_spread_comp: phi_spread * r_mean,
        frac_stationary: stationary / n,
    }
}

/// The sixteen shape features in registry order (`cohuArea` .. `compactness`).
pub fn shape_features(sample: &ClusterSample) -> Result<[f64; 16]> {
    ensure_nonempty(sample)?;
    Ok(shape_of(&Columns::of(sample)))
}

fn shape_of(c: &Columns) -> [f64; 16] {
    let pts = &c.centered;
    let n = pts.len() as f64;
    let hull = geometry::convex_hull(pts);
    let rect = geometry::min_bounding_rect(&hull);
    let ellipse = geometry::confidence_ellipse_95(pts);
    let circle = geometry::min_enclosing_circle(pts);
    let cbo = geometry::cbo(pts, geometry::median_center(pts));
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let compactness = pts.iter().map(|p| p.x.hypot(p.y)).sum::<f64>() / n;
    [
        hull.area,
        hull.perimeter,
        ratio(n, hull.area),
        hull.circularity(),
        circle.radius,
        rect.area,
        rect.perimeter,
        ratio(n, rect.area),
        ellipse.major_axis_len,
        ellipse.minor_axis_len,
        f64::from(cbo.inner),
        f64::from(cbo.middle),
        f64::from(cbo.outer),
        geometry::max_dist_line_deviation(pts),
        pearson(&xs, &ys),
        compactness,
    ]
}

/// The eight Doppler-profile features in registry order.
pub fn doppler_profile_features(sample: &ClusterSample) -> Result<[f64; 8]> {
    ensure_nonempty(sample)?;
    Ok(doppler_of(&Columns::of(sample)))
}

fn doppler_of(c: &Columns) -> [f64; 8] {
    let vr_spread = spread(&c.vr);
    let ellipse = geometry::confidence_ellipse_95(&c.centered);
    let (maj, min) = (ellipse.major_unit(), ellipse.minor_unit());
    let along_major: Vec<f64> = c.centered.iter().map(|p| p.x * maj.x + p.y * maj.y).collect();
    let along_minor: Vec<f64> = c.centered.iter().map(|p| p.x * min.x + p.y * min.y).collect();
    [
        ratio(spread(&c.range), vr_spread),
        ratio(spread(&c.azimuth), vr_spread),
        pearson(&c.range, &c.vr),
        pearson(&c.azimuth, &c.vr),
        ratio(spread(&along_major), vr_spread),
        ratio(spread(&along_minor), vr_spread),
        pearson(&along_major, &c.vr),
        pearson(&along_minor, &c.vr),
    ]
}

/// Full 50-value vector in registry order.
pub fn extract(sample: &ClusterSample, params: &FeatureParams) -> Result<FeatureVector> {
    ensure_nonempty(sample)?;
    let c = Columns::of(sample);
    let mut values = Vec::with_capacity(N_FEATURES);
    values.extend_from_slice(&basic_stats_of(&c));
    let (ev1, ev2) = geometry::Covariance2::of(&c.centered).eigenvalues();
    let comp = compensated_of(&c, params);
    values.extend_from_slice(&[
        ev1,
        ev2,
        comp.n_targets,
        comp.n_targets_comp,
        comp.phi_spread_comp,
        comp.frac_stationary,
    ]);
    values.extend_from_slice(&shape_of(&c));
    values.extend_from_slice(&doppler_of(&c));
    debug_assert_eq!(values.len(), N_FEATURES);
    Ok(FeatureVector { values })
}

/// Extracts every sample in parallel; output order follows input order.
pub fn extract_all(samples: &[ClusterSample], params: &FeatureParams) -> Result<Vec<FeatureVector>> {
    samples.par_iter().map(|s| extract(s, params)).collect()
}

/// Feature table of `samples` in input order, with every registry column.
pub fn feature_table(samples: &[ClusterSample], params: &FeatureParams) -> Result<FeatureTable> {
    let vectors = extract_all(samples, params)?;
    Ok(FeatureTable {
        registry_version: REGISTRY_VERSION.to_string(),
        names: REGISTRY.iter().map(|s| s.to_string()).collect(),
        rows: samples
            .iter()
            .zip(vectors)
            .map(|(s, v)| FeatureRow {
                cluster_id: s.cluster_id,
                object_id: s.object_id,
                window_start: s.window_start,
                label: s.label,
                values: v.values,
            })
            .collect(),
    })
}
