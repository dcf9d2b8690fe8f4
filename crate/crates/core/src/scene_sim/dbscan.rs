use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::WorldPoint;

/// Cluster id, or `None` for noise.
pub type ClusterLabel = Option<usize>;

/// Uniform hash grid with cell size `eps`; a neighborhood query scans the 27
/// surrounding cells.
struct SpatialHash {
    eps: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl SpatialHash {
    fn new(points: &[WorldPoint], eps: f64) -> Self {
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, eps)).or_default().push(i);
        }
        Self { eps, cells }
    }

    fn key(p: &WorldPoint, eps: f64) -> (i64, i64, i64) {
        ((p.x / eps).floor() as i64, (p.y / eps).floor() as i64, (p.z / eps).floor() as i64)
    }

    /// Indices within `eps` of `points[i]`, including `i` itself.
    fn neighbors(&self, points: &[WorldPoint], i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = &points[i];
        let (cx, cy, cz) = Self::key(p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(c) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(c.iter().copied().filter(|&j| (points[j] - p).norm_squared() <= eps2));
                    }
                }
            }
        }
    }
}

/// DBSCAN over 3D points. A point is core if at least `min_pts` points
/// (itself included) lie within `eps`. Clusters are numbered in order of
/// their first core point; a border point reachable from several clusters
/// joins the first one expanded.
pub fn dbscan(points: &[WorldPoint], eps: f64, min_pts: usize) -> Result<Vec<ClusterLabel>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("dbscan eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::invalid("dbscan min_pts must be at least 1"));
    }
    if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid("dbscan points must be finite"));
    }
    let index = SpatialHash::new(points, eps);
    let mut labels: Vec<ClusterLabel> = vec![None; points.len()];
    let mut visited = vec![false; points.len()];
    let mut nbrs = Vec::new();
    let mut frontier = Vec::new();
    let mut next = 0;
    for i in 0..points.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        index.neighbors(points, i, &mut nbrs);
        if nbrs.len() < min_pts {
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = Some(id);
        frontier.clear();
        frontier.extend_from_slice(&nbrs);
        while let Some(j) = frontier.pop() {
            if labels[j].is_none() {
                labels[j] = Some(id);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            index.neighbors(points, j, &mut nbrs);
            if nbrs.len() >= min_pts {
                frontier.extend(nbrs.iter().copied().filter(|&k| !visited[k] || labels[k].is_none()));
            }
        }
    }
    Ok(labels)
}
