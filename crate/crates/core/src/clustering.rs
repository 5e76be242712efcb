//! DBSCAN over targets in space, time and Doppler.
//!
//! Two targets are neighbours when
//! `max(|Δxy| / eps_xy, |Δt| / eps_t, |Δvr| / eps_vr) <= 1`, with `|Δxy|` the
//! planar euclidean distance. A point is core when its neighbourhood,
//! counting itself, holds at least `min_pts` points.
//!
//! Clusters are numbered in the order the sequential scan creates them, so a
//! cluster's id follows the index of its first core point. A border point
//! belongs to the first cluster that reaches it.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::data_model::Target;
use crate::error::{Error, Result};

/// Label given to points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    pub eps_xy: f64,
    pub eps_t: f64,
    pub eps_vr: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps_xy: 1.5,
            eps_t: 0.16,
            eps_vr: 1.0,
            min_pts: 2,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        let eps = [self.eps_xy, self.eps_t, self.eps_vr];
        if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidParameter("dbscan eps values must be > 0".into()));
        }
        if self.min_pts < 1 {
            return Err(Error::InvalidParameter("dbscan min_pts must be >= 1".into()));
        }
        Ok(())
    }

    /// Normalised distance between two targets; neighbours have `<= 1`.
    pub fn scaled_distance(&self, a: &Target, b: &Target) -> f64 {
        let dxy = (a.x - b.x).hypot(a.y - b.y) / self.eps_xy;
        let dt = (a.time - b.time).abs() / self.eps_t;
        let dvr = (a.vr_comp - b.vr_comp).abs() / self.eps_vr;
        dxy.max(dt).max(dvr)
    }
}

type Cell = (i64, i64, i64);

/// Uniform grid over (x, y, t) with cell edges equal to the eps values, so
/// every neighbour lies in one of the 27 cells around a point.
struct GridIndex<'a> {
    targets: &'a [Target],
    params: DbscanParams,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    fn new(targets: &'a [Target], params: DbscanParams) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, t) in targets.iter().enumerate() {
            cells.entry(Self::cell_of(t, &params)).or_default().push(i);
        }
        GridIndex {
            targets,
            params,
            cells,
        }
    }

    fn cell_of(t: &Target, p: &DbscanParams) -> Cell {
        (
            (t.x / p.eps_xy).floor() as i64,
            (t.y / p.eps_xy).floor() as i64,
            (t.time / p.eps_t).floor() as i64,
        )
    }

    /// Neighbours of point `i` (itself included), ascending by index.
    fn neighbours(&self, i: usize) -> Vec<usize> {
        let t = &self.targets[i];
        let (cx, cy, ct) = Self::cell_of(t, &self.params);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dt in -1..=1 {
                    if let Some(members) = self.cells.get(&(cx + dx, cy + dy, ct + dt)) {
                        out.extend(members.iter().copied().filter(|&j| {
                            self.params.scaled_distance(t, &self.targets[j]) <= 1.0
                        }));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Assigns a cluster id (or [`NOISE`]) to every target.
pub fn dbscan(targets: &[Target], params: &DbscanParams) -> Result<Vec<i64>> {
    params.validate()?;
    if targets
        .iter()
        .any(|t| !(t.x.is_finite() && t.y.is_finite() && t.time.is_finite() && t.vr_comp.is_finite()))
    {
        return Err(Error::InvalidParameter("dbscan input has non-finite coordinates".into()));
    }
    let n = targets.len();
    let index = GridIndex::new(targets, *params);
    let mut labels: Vec<Option<i64>> = vec![None; n];
    let mut next_id = 0i64;
    let mut queue = VecDeque::new();

    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = index.neighbours(i);
        if seeds.len() < params.min_pts {
            labels[i] = Some(NOISE);
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[i] = Some(id);
        queue.extend(seeds.into_iter().filter(|&j| j != i));
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(NOISE) => {
                    // previously seen as noise: it is a border point of this cluster
                    labels[j] = Some(id);
                    continue;
                }
                Some(_) => continue,
                None => labels[j] = Some(id),
            }
            let nb = index.neighbours(j);
            if nb.len() >= params.min_pts {
                queue.extend(nb.into_iter().filter(|&k| match labels[k] {
                    None => true,
                    Some(l) => l == NOISE,
                }));
            }
        }
    }
    Ok(labels.into_iter().map(|l| l.unwrap_or(NOISE)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Target {
        Target::from_cartesian(0.0, x, y, 0.0, 0.0, 0)
    }

    #[test]
    fn coincident_points_form_one_cluster() {
        let p = DbscanParams { min_pts: 1, ..Default::default() };
        let l = dbscan(&[pt(1.0, 1.0), pt(1.0, 1.0)], &p).unwrap();
        assert_eq!(l, vec![0, 0]);
    }

    #[test]
    fn far_points_split_or_become_noise() {
        let p1 = DbscanParams { min_pts: 1, ..Default::default() };
        let far = [pt(0.0, 0.0), pt(15.0, 0.0)];
        assert_eq!(dbscan(&far, &p1).unwrap(), vec![0, 1]);
        let p2 = DbscanParams { min_pts: 2, ..Default::default() };
        assert_eq!(dbscan(&far, &p2).unwrap(), vec![NOISE, NOISE]);
    }

    #[test]
    fn empty_input() {
        assert!(dbscan(&[], &DbscanParams::default()).unwrap().is_empty());
    }

    #[test]
    fn time_and_doppler_separate_clusters() {
        let p = DbscanParams { min_pts: 1, ..Default::default() };
        let a = Target::from_cartesian(0.0, 0.0, 0.0, 0.0, 0.0, 0);
        let late = Target::from_cartesian(1.0, 0.0, 0.0, 0.0, 0.0, 0);
        let fast = Target::from_cartesian(0.0, 0.0, 0.0, 5.0, 0.0, 0);
        assert_eq!(dbscan(&[a, late, fast], &p).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // two dense pairs with a shared border point in the middle
        let p = DbscanParams { eps_xy: 1.0, min_pts: 4, ..Default::default() };
        let pts = [
            pt(0.0, 0.0),
            pt(0.02, 0.0),
            pt(0.04, 0.0),
            pt(0.1, 0.0),
            pt(1.05, 0.0), // border, within reach of 0.1 and 2.0
            pt(2.0, 0.0),
            pt(2.06, 0.0),
            pt(2.08, 0.0),
            pt(2.1, 0.0),
        ];
        let l = dbscan(&pts, &p).unwrap();
        assert_eq!(l, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
        // scanning the second blob first hands the border point to it
        let mut rev = pts.to_vec();
        rev.reverse();
        let l = dbscan(&rev, &p).unwrap();
        assert_eq!(l, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn invalid_params() {
        let p = DbscanParams { eps_xy: 0.0, ..Default::default() };
        assert!(dbscan(&[pt(0.0, 0.0)], &p).is_err());
        let p = DbscanParams { min_pts: 0, ..Default::default() };
        assert!(dbscan(&[pt(0.0, 0.0)], &p).is_err());
    }
}
