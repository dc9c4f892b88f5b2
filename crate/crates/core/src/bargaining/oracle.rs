//! Brute-force grid search for the bargaining solution.

use super::{nash_product, NashProductContext};
use crate::game::{BandAllocation, EquilibriumReport, SolutionKind, UtilityPair};
use crate::parallel::{map_indices, Execution};

/// Best grid point found by [`grid_argmax_nash_product`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridArgmax {
    pub allocation: BandAllocation,
    pub utilities: UtilityPair,
    pub value: f64,
    /// Grid indices `(i, j)` of the argmax.
    pub index: (usize, usize),
}

/// Uniform axis `lo + (hi - lo) k / (n - 1)`, `k = 0..n`.
pub(crate) fn axis(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if n <= 1 {
        return lo;
    }
    if k + 1 == n {
        return hi;
    }
    lo + (hi - lo) * k as f64 / (n - 1) as f64
}

/// Maximizes `(u₁ − t₁)(u₂ − t₂)` over an `n × n` grid on `[lo, hi]²`,
/// skipping points with either utility below the threat. Ties keep the
/// first point in row-major order. Returns `None` when no point qualifies.
pub fn grid_argmax_nash_product<F>(
    lo: [f64; 2],
    hi: [f64; 2],
    resolution: usize,
    threat: UtilityPair,
    utilities: F,
    execution: Execution,
) -> Option<GridArgmax>
where
    F: Fn(BandAllocation) -> UtilityPair + Sync,
{
    let rows = map_indices(resolution, execution, |i| {
        let w1 = axis(lo[0], hi[0], resolution, i);
        let mut best: Option<GridArgmax> = None;
        for j in 0..resolution {
            let alloc = BandAllocation::new(w1, axis(lo[1], hi[1], resolution, j));
            let u = utilities(alloc);
            let (d1, d2) = (u.u1 - threat.u1, u.u2 - threat.u2);
            if d1 < 0.0 || d2 < 0.0 {
                continue;
            }
            let value = d1 * d2;
            if best.is_none_or(|b| value > b.value) {
                best = Some(GridArgmax {
                    allocation: alloc,
                    utilities: u,
                    value,
                    index: (i, j),
                });
            }
        }
        best
    });
    rows.into_iter()
        .flatten()
        .fold(None, |acc: Option<GridArgmax>, r| match acc {
            Some(a) if a.value >= r.value => Some(a),
            _ => Some(r),
        })
}

fn report_from(
    ctx: &NashProductContext,
    found: Option<GridArgmax>,
    residual: f64,
) -> EquilibriumReport {
    let mut report = EquilibriumReport {
        kind: SolutionKind::NashBargaining,
        allocation: ctx.ne_alloc(),
        utilities: ctx.threat(),
        iterations: 0,
        residual,
        converged: true,
        diagnostics: Default::default(),
    };
    match found {
        Some(g) => {
            report.allocation = g.allocation;
            report.utilities = g.utilities;
        }
        None => report.diagnostics.no_feasible_grid_point = true,
    }
    report
}

/// Grid maximizer of π over `[0, ω]²` restricted to utilities above the
/// threat point. `residual` is the grid spacing.
///
/// # Panics
/// When `resolution < 2`.
pub fn grid_oracle_nbs(
    ctx: &NashProductContext,
    resolution: usize,
    execution: Execution,
) -> EquilibriumReport {
    assert!(
        resolution >= 2,
        "grid oracle needs at least 2 points per axis"
    );
    let omega = ctx.total_band();
    let found = grid_argmax_nash_product(
        [0.0, 0.0],
        [omega, omega],
        resolution,
        ctx.threat(),
        |a| ctx.utilities(a),
        execution,
    );
    let mut report = report_from(ctx, found, omega / (resolution - 1) as f64);
    // With no positive surplus anywhere on the grid the threat point itself
    // is the bargaining outcome.
    if found.is_some_and(|g| g.value <= 0.0) {
        report.allocation = ctx.ne_alloc();
        report.utilities = ctx.threat();
    }
    report
}

/// [`grid_oracle_nbs`] followed by [`refine_oracle`].
pub fn refined_grid_oracle_nbs(
    ctx: &NashProductContext,
    resolution: usize,
    levels: usize,
    execution: Execution,
) -> EquilibriumReport {
    let coarse = grid_oracle_nbs(ctx, resolution, execution);
    refine_oracle(ctx, coarse, resolution, levels, execution)
}

/// Zooms a full-box oracle result `levels` times, each search covering two
/// cells of the previous grid on either side of its argmax with the same
/// resolution.
pub fn refine_oracle(
    ctx: &NashProductContext,
    coarse: EquilibriumReport,
    resolution: usize,
    levels: usize,
    execution: Execution,
) -> EquilibriumReport {
    let mut report = coarse;
    if report.diagnostics.no_feasible_grid_point {
        return report;
    }
    let omega = ctx.total_band();
    let mut cell = omega / (resolution - 1) as f64;
    let mut best_value = nash_product(report.allocation, ctx);
    for _ in 0..levels {
        let c = report.allocation.to_array();
        let lo = c.map(|x| (x - 2.0 * cell).max(0.0));
        let hi = c.map(|x| (x + 2.0 * cell).min(omega));
        let found = grid_argmax_nash_product(
            lo,
            hi,
            resolution,
            ctx.threat(),
            |a| ctx.utilities(a),
            execution,
        );
        let Some(g) = found else { break };
        if g.value > best_value {
            best_value = g.value;
            report.allocation = g.allocation;
            report.utilities = g.utilities;
        }
        cell = (hi[0] - lo[0]).max(hi[1] - lo[1]) / (resolution - 1) as f64;
        report.residual = cell;
    }
    report
}
