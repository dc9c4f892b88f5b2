//! Achievable utility region, its convex hull (the time-sharing region)
//! and the Pareto boundary of that hull.

use super::oracle::axis;
use super::NashProductContext;
use crate::error::{Error, Result};
use crate::game::{BandAllocation, UtilityPair};
use crate::parallel::{map_indices, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullVertex {
    /// Index into [`RegionSample::samples`].
    pub sample: usize,
    pub utilities: UtilityPair,
}

/// A utility point reached by playing `first` a fraction `mu` of the time
/// and `second` the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSharedPoint {
    pub mu: f64,
    pub first: BandAllocation,
    pub second: BandAllocation,
    pub utilities: UtilityPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    pub samples: Vec<(BandAllocation, UtilityPair)>,
    /// Convex hull vertices, counter-clockwise, collinear points dropped.
    pub hull: Vec<HullVertex>,
    /// Undominated hull vertices, sorted by increasing `u1`. Consecutive
    /// entries bound one Pareto edge.
    pub pareto: Vec<HullVertex>,
}

impl RegionSample {
    pub fn hull_polygon(&self) -> Vec<UtilityPair> {
        self.hull.iter().map(|v| v.utilities).collect()
    }

    pub fn is_on_hull(&self) -> Vec<bool> {
        let mut flags = vec![false; self.samples.len()];
        for v in &self.hull {
            flags[v.sample] = true;
        }
        flags
    }

    pub fn is_on_pareto(&self) -> Vec<bool> {
        let mut flags = vec![false; self.samples.len()];
        for v in &self.pareto {
            flags[v.sample] = true;
        }
        flags
    }

    /// Pareto vertices as degenerate time-sharing points (μ = 1).
    pub fn pareto_points(&self) -> Vec<TimeSharedPoint> {
        self.pareto
            .iter()
            .map(|v| {
                let a = self.samples[v.sample].0;
                TimeSharedPoint {
                    mu: 1.0,
                    first: a,
                    second: a,
                    utilities: v.utilities,
                }
            })
            .collect()
    }
}

fn cross(o: UtilityPair, a: UtilityPair, b: UtilityPair) -> f64 {
    (a.u1 - o.u1) * (b.u2 - o.u2) - (a.u2 - o.u2) * (b.u1 - o.u1)
}

/// Monotone-chain convex hull. Returns indices into `points` in
/// counter-clockwise order; duplicates and collinear points are dropped.
pub fn convex_hull(points: &[UtilityPair]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (points[a], points[b]);
        p.u1.total_cmp(&q.u1)
            .then(p.u2.total_cmp(&q.u2))
            .then(a.cmp(&b))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);
    if order.len() < 3 {
        return order;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * order.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(order.iter())
        } else {
            Box::new(order.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(
                    points[hull[hull.len() - 2]],
                    points[hull[hull.len() - 1]],
                    points[i],
                ) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        // The last point of each chain starts the next one.
        hull.pop();
    }
    if hull.len() == 2 && points[hull[0]] == points[hull[1]] {
        hull.pop();
    }
    hull
}

/// Whether `p` lies inside or on a counter-clockwise convex polygon, with a
/// relative tolerance on the edge tests.
pub fn point_in_convex_polygon(polygon: &[UtilityPair], p: UtilityPair, rel_tol: f64) -> bool {
    let scale = polygon
        .iter()
        .map(|v| v.u1.abs().max(v.u2.abs()))
        .fold(p.u1.abs().max(p.u2.abs()), f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;
    match polygon.len() {
        0 => false,
        1 => (polygon[0].u1 - p.u1).abs() <= tol && (polygon[0].u2 - p.u2).abs() <= tol,
        2 => {
            let (a, b) = (polygon[0], polygon[1]);
            let len = (b.u1 - a.u1).hypot(b.u2 - a.u2);
            let along = ((p.u1 - a.u1) * (b.u1 - a.u1) + (p.u2 - a.u2) * (b.u2 - a.u2)) / len;
            cross(a, b, p).abs() / len <= tol && along >= -tol && along <= len + tol
        }
        n => (0..n).all(|k| {
            let a = polygon[k];
            let b = polygon[(k + 1) % n];
            let len = (b.u1 - a.u1).hypot(b.u2 - a.u2);
            cross(a, b, p) / len >= -tol
        }),
    }
}

fn pareto_subset(hull: &[HullVertex]) -> Vec<HullVertex> {
    let mut front: Vec<HullVertex> = hull
        .iter()
        .filter(|v| {
            !hull.iter().any(|w| {
                w.sample != v.sample
                    && w.utilities.u1 >= v.utilities.u1
                    && w.utilities.u2 >= v.utilities.u2
                    && w.utilities != v.utilities
            })
        })
        .copied()
        .collect();
    front.sort_by(|a, b| a.utilities.u1.total_cmp(&b.utilities.u1));
    front
}

/// Samples the utility region on a `resolution × resolution` grid over
/// `[0, ω]²` and builds its hull and Pareto boundary. A resolution of 1
/// samples the single allocation (0, 0).
pub fn sample_utility_region(
    ctx: &NashProductContext,
    resolution: usize,
    execution: Execution,
) -> Result<RegionSample> {
    if resolution == 0 {
        return Err(Error::InvalidArgument(
            "region resolution must be at least 1".into(),
        ));
    }
    let omega = ctx.total_band();
    let rows = map_indices(resolution, execution, |i| {
        let w1 = axis(0.0, omega, resolution, i);
        (0..resolution)
            .map(|j| {
                let a = BandAllocation::new(w1, axis(0.0, omega, resolution, j));
                (a, ctx.utilities(a))
            })
            .collect::<Vec<_>>()
    });
    let samples: Vec<_> = rows.into_iter().flatten().collect();
    let points: Vec<UtilityPair> = samples.iter().map(|s| s.1).collect();
    let hull: Vec<HullVertex> = convex_hull(&points)
        .into_iter()
        .map(|i| HullVertex {
            sample: i,
            utilities: points[i],
        })
        .collect();
    let pareto = pareto_subset(&hull);
    Ok(RegionSample {
        samples,
        hull,
        pareto,
    })
}

/// Maximizes the Nash product over time-sharing mixtures of consecutive
/// Pareto vertices, keeping both utilities at or above the threat point.
/// Returns the best point and its product, or `None` when no point of the
/// Pareto boundary reaches the threat point.
pub fn best_time_shared_point(
    region: &RegionSample,
    threat: UtilityPair,
) -> Option<(TimeSharedPoint, f64)> {
    let product = |u: UtilityPair| (u.u1 - threat.u1) * (u.u2 - threat.u2);
    let feasible = |u: UtilityPair| u.u1 >= threat.u1 && u.u2 >= threat.u2;
    let mut best: Option<(TimeSharedPoint, f64)> = None;
    let mut consider = |p: TimeSharedPoint| {
        if feasible(p.utilities) {
            let v = product(p.utilities);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((p, v));
            }
        }
    };
    for p in region.pareto_points() {
        consider(p);
    }
    for pair in region.pareto.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ua, ub) = (a.utilities, b.utilities);
        // u(μ) = μ ua + (1 − μ) ub; surplus_k(μ) = s_k + μ r_k.
        let s = [ub.u1 - threat.u1, ub.u2 - threat.u2];
        let r = [ua.u1 - ub.u1, ua.u2 - ub.u2];
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for k in 0..2 {
            if r[k] > 0.0 {
                lo = lo.max(-s[k] / r[k]);
            } else if r[k] < 0.0 {
                hi = hi.min(-s[k] / r[k]);
            } else if s[k] < 0.0 {
                hi = -1.0;
            }
        }
        if lo > hi {
            continue;
        }
        let mut candidates = vec![lo, hi];
        let curvature = 2.0 * r[0] * r[1];
        if curvature != 0.0 {
            let mu = -(s[0] * r[1] + s[1] * r[0]) / curvature;
            if mu > lo && mu < hi {
                candidates.push(mu);
            }
        }
        let first = region.samples[a.sample].0;
        let second = region.samples[b.sample].0;
        for mu in candidates {
            let utilities = UtilityPair::new(ub.u1 + mu * r[0], ub.u2 + mu * r[1]);
            consider(TimeSharedPoint {
                mu,
                first,
                second,
                utilities,
            });
        }
    }
    best
}
