//! Per-event accuracy against ground-truth labels and the bounding-box
//! detection criterion.

use crate::error::{Error, Result};
use crate::event::EventPacket;
use crate::solver::types::{AssociationMatrix, ClusterSet};
use crate::warp::warp_point;

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// Fraction of non-noise events whose hard label maps to their true label.
    pub accuracy: f64,
    /// Cluster index to matched object label (1-based); `None` if unmatched.
    pub matching: Vec<Option<u32>>,
    pub per_cluster_mass: Vec<f64>,
    /// Relative displacement of the evaluated window; set by experiment drivers.
    pub displacement_px: f64,
    /// Number of events counted (noise excluded).
    pub evaluated: usize,
}

/// Best one-to-one assignment of rows to columns of `score`, maximizing the
/// total. Exact when the smaller side has at most 16 entries, greedy by
/// overlap otherwise.
fn best_matching(score: &[Vec<usize>], cols: usize) -> Vec<Option<usize>> {
    let rows = score.len();
    if rows.min(cols) > 16 {
        let mut pairs: Vec<(usize, usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (score[r][c], r, c))).collect();
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out = vec![None; rows];
        let mut used = vec![false; cols];
        for (_, r, c) in pairs {
            if out[r].is_none() && !used[c] {
                out[r] = Some(c);
                used[c] = true;
            }
        }
        return out;
    }
    // Exact dynamic program over subsets of the smaller side: dp[i][m] is the
    // best total using the first i items of the larger side and subset m.
    let transpose = cols < rows;
    let (small, large) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |s: usize, l: usize| if transpose { score[l][s] } else { score[s][l] };
    let states = 1usize << small;
    let mut dp = vec![vec![None::<usize>; states]; large + 1];
    dp[0][0] = Some(0);
    for i in 0..large {
        for m in 0..states {
            let Some(v) = dp[i][m] else { continue };
            if dp[i + 1][m].is_none_or(|b| v > b) {
                dp[i + 1][m] = Some(v);
            }
            for s in (0..small).filter(|s| m & (1 << s) == 0) {
                let (nm, cand) = (m | (1 << s), v + at(s, i));
                if dp[i + 1][nm].is_none_or(|b| cand > b) {
                    dp[i + 1][nm] = Some(cand);
                }
            }
        }
    }
    let mut m = (0..states).fold(0, |best, m| if dp[large][m] > dp[large][best] { m } else { best });
    let mut out = vec![None; rows];
    for i in (0..large).rev() {
        let v = dp[i + 1][m];
        if dp[i][m] == v {
            continue;
        }
        let s = (0..small)
            .find(|&s| m & (1 << s) != 0 && dp[i][m & !(1 << s)].map(|p| p + at(s, i)) == v)
            .expect("consistent table");
        let (r, c) = if transpose { (i, s) } else { (s, i) };
        out[r] = Some(c);
        m &= !(1 << s);
    }
    out
}

/// Hard labels by row argmax (ties to the lowest index), matched to the
/// ground-truth labels so as to maximize the number of correct events.
/// Events labeled 0 (noise) are excluded.
pub fn per_event_accuracy(associations: &AssociationMatrix, labels: &[u32], j: usize) -> Result<AccuracyReport> {
    let n = associations.events();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {} events", labels.len(), n)));
    }
    if associations.clusters() != j {
        return Err(Error::ShapeMismatch(format!(
            "{} association columns for J = {}",
            associations.clusters(),
            j
        )));
    }
    let objects = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![vec![0usize; objects]; j];
    let mut evaluated = 0;
    for (k, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        counts[associations.argmax(k)][l as usize - 1] += 1;
        evaluated += 1;
    }
    let per_cluster_mass: Vec<f64> = (0..j).map(|c| associations.column_mass(c)).collect();
    let live: Vec<usize> = (0..j).filter(|&c| per_cluster_mass[c] > 0.0).collect();
    let live_counts: Vec<Vec<usize>> = live.iter().map(|&c| counts[c].clone()).collect();
    let assignment = best_matching(&live_counts, objects);
    let mut matching = vec![None; j];
    let mut correct = 0;
    for (i, &c) in live.iter().enumerate() {
        if let Some(o) = assignment[i] {
            matching[c] = Some(o as u32 + 1);
            correct += counts[c][o];
        }
    }
    Ok(AccuracyReport {
        accuracy: if evaluated > 0 { correct as f64 / evaluated as f64 } else { 0.0 },
        matching,
        per_cluster_mass,
        displacement_px: 0.0,
        evaluated,
    })
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn intersection(&self, o: &PixelRect) -> f64 {
        PixelRect::new(self.x0.max(o.x0), self.y0.max(o.y0), self.x1.min(o.x1), self.y1.min(o.y1)).area()
    }

    /// Smallest rectangle covering the unit pixels at `points`.
    pub fn bounding(points: impl IntoIterator<Item = [f64; 2]>) -> Option<Self> {
        points.into_iter().fold(None, |acc, [x, y]| {
            let (x, y) = (x.floor(), y.floor());
            Some(match acc {
                None => PixelRect::new(x, y, x + 1.0, y + 1.0),
                Some(r) => PixelRect::new(r.x0.min(x), r.y0.min(y), r.x1.max(x + 1.0), r.y1.max(y + 1.0)),
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBox {
    pub rect: PixelRect,
    pub t: f64,
}

impl DetectionBox {
    pub fn new(rect: PixelRect, t: f64) -> Result<Self> {
        if !(rect.area() > 0.0) {
            return Err(Error::Config("detection box must be non-empty".into()));
        }
        Ok(Self { rect, t })
    }
}

/// Bounding rectangle at `t` of the events cluster `j` holds with
/// probability above one half, each transported to `t` by the cluster's warp.
pub fn cluster_rect(associations: &AssociationMatrix, packet: &EventPacket, clusters: &ClusterSet, j: usize, t: f64) -> Option<PixelRect> {
    let params = &clusters.params[j];
    PixelRect::bounding(
        packet
            .events
            .iter()
            .enumerate()
            .filter(|(k, _)| associations.get(*k, j) > 0.5)
            .map(|(_, e)| warp_point([e.x, e.y], e.t, params, t)),
    )
}

/// Detection succeeds when the best-matching live cluster (highest
/// intersection over union with the box) covers at least half of the box and
/// has more of its area inside than outside.
pub fn detection_success(associations: &AssociationMatrix, packet: &EventPacket, clusters: &ClusterSet, bbox: &DetectionBox) -> bool {
    let best = clusters
        .live()
        .filter_map(|j| cluster_rect(associations, packet, clusters, j, bbox.t))
        .map(|r| {
            let inside = r.intersection(&bbox.rect);
            let iou = inside / (r.area() + bbox.rect.area() - inside);
            (iou, inside, r.area())
        })
        .fold(None, |acc: Option<(f64, f64, f64)>, c| match acc {
            Some(a) if a.0 >= c.0 => Some(a),
            _ => Some(c),
        });
    match best {
        Some((_, inside, area)) => inside >= 0.5 * bbox.rect.area() && inside > area - inside,
        None => false,
    }
}
