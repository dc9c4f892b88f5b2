//! Relay-position sweeps: NE against NBS gains and concavity maps.

use crate::bargaining::{
    eigenvalues, grid_oracle_nbs, hessian, solve_nbs, EigenPair, NashProductContext, NbsSolver,
};
use crate::error::{Error, Result};
use crate::game::{EquilibriumReport, UtilityPair};
use crate::parallel::{map_slice, Execution};
use crate::system_model::{Point, Scenario};

/// Rectangular grid of relay positions, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

impl SweepGrid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, step: f64) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            step,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `[0, 700]²` with the given step.
    pub fn square_700(step: f64) -> Result<Self> {
        Self::new(0.0, 700.0, 0.0, 700.0, step)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.step]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "sweep grid values must be finite".into(),
            ));
        }
        if self.step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sweep step must be > 0, got {}",
                self.step
            )));
        }
        if self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidArgument(
                "sweep grid needs max > min on both axes".into(),
            ));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| lo + step * k as f64).collect()
    }

    /// Positions in x-major order.
    pub fn positions(&self) -> Vec<Point> {
        let xs = Self::axis(self.x_min, self.x_max, self.step);
        let ys = Self::axis(self.y_min, self.y_max, self.step);
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| Point::new(x, y)))
            .collect()
    }
}

/// Relative bandwidth saving of the NBS over the NE, in percent. Zero when
/// the NE uses no relay band.
pub fn bandwidth_gain(ne_band: f64, nbs_band: f64) -> f64 {
    if ne_band > 0.0 {
        100.0 * (ne_band - nbs_band) / ne_band
    } else {
        0.0
    }
}

/// Relative sum-utility gain of the NBS over the NE, in percent; `None` when
/// the NE sum is not positive.
pub fn social_welfare_gain(ne: UtilityPair, nbs: UtilityPair) -> Option<f64> {
    let base = ne.sum();
    (base > 0.0).then(|| 100.0 * (nbs.sum() - base) / base)
}

/// When the sweep also runs the grid oracle for cross-checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleCadence {
    /// Every position for steps of at least 25 m, every 10th otherwise.
    #[default]
    Auto,
    Every(usize),
    Never,
}

impl OracleCadence {
    fn every(&self, grid: &SweepGrid) -> Option<usize> {
        match *self {
            OracleCadence::Auto => Some(if grid.step >= 25.0 { 1 } else { 10 }),
            OracleCadence::Every(n) => Some(n.max(1)),
            OracleCadence::Never => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepConfig {
    pub solver: NbsSolver,
    pub oracle_cadence: OracleCadence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionResult {
    pub ne: EquilibriumReport,
    /// Accepted bargaining solution.
    pub nbs: EquilibriumReport,
    pub gain_bw_u1_pct: f64,
    pub gain_bw_u2_pct: f64,
    pub gain_bw_total_pct: f64,
    pub gain_sw_pct: Option<f64>,
    /// Hessian eigenvalues of π at the accepted NBS allocation.
    pub eigen: EigenPair,
    pub strictly_concave: bool,
    /// `None` when the oracle was not run at this position.
    pub cg_matched_oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub relay: Point,
    pub outcome: std::result::Result<PositionResult, Error>,
}

/// Solves one relay position.
pub fn evaluate_position(
    scenario: &Scenario,
    relay: Point,
    solver: &NbsSolver,
    run_oracle: bool,
) -> Result<PositionResult> {
    let ctx = NashProductContext::new(scenario, relay)?;
    let solution = solve_nbs(&ctx, solver, run_oracle);
    let ne = ctx.ne;
    let nbs = solution.report;
    let eigen = eigenvalues(&hessian(nbs.allocation, &ctx));
    Ok(PositionResult {
        gain_bw_u1_pct: bandwidth_gain(ne.allocation.w1, nbs.allocation.w1),
        gain_bw_u2_pct: bandwidth_gain(ne.allocation.w2, nbs.allocation.w2),
        gain_bw_total_pct: bandwidth_gain(ne.allocation.total(), nbs.allocation.total()),
        gain_sw_pct: social_welfare_gain(ne.utilities, nbs.utilities),
        strictly_concave: eigen.is_negative_definite(),
        eigen,
        cg_matched_oracle: solution.cg_matched_oracle,
        ne,
        nbs,
    })
}

/// Inner grid work runs sequentially when positions are spread over the pool.
fn inner(execution: Execution) -> Execution {
    match execution {
        Execution::Parallel => Execution::Sequential,
        Execution::Sequential => Execution::Sequential,
    }
}

/// Solves every grid position. Failures (for example a relay on top of a
/// node) are kept in the record and do not stop the sweep.
pub fn sweep(
    scenario: &Scenario,
    grid: &SweepGrid,
    config: &SweepConfig,
) -> Result<Vec<SweepRecord>> {
    scenario.validate()?;
    grid.validate()?;
    let positions = grid.positions();
    let every = config.oracle_cadence.every(grid);
    let solver = NbsSolver {
        execution: inner(config.solver.execution),
        ..config.solver
    };
    let indexed: Vec<(usize, Point)> = positions.into_iter().enumerate().collect();
    Ok(map_slice(
        &indexed,
        config.solver.execution,
        |&(k, relay)| {
            let run_oracle = every.is_some_and(|n| k % n == 0);
            SweepRecord {
                relay,
                outcome: evaluate_position(scenario, relay, &solver, run_oracle),
            }
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityRecord {
    pub relay: Point,
    pub outcome: std::result::Result<(EigenPair, bool), Error>,
}

/// Hessian eigenvalues of π at the grid-oracle NBS, per relay position.
pub fn concavity_at(
    scenario: &Scenario,
    relay: Point,
    resolution: usize,
    execution: Execution,
) -> Result<(EigenPair, bool)> {
    let ctx = NashProductContext::new(scenario, relay)?;
    let oracle = grid_oracle_nbs(&ctx, resolution, execution);
    let eigen = eigenvalues(&hessian(oracle.allocation, &ctx));
    Ok((eigen, eigen.is_negative_definite()))
}

pub fn concavity_map(
    scenario: &Scenario,
    grid: &SweepGrid,
    resolution: usize,
    execution: Execution,
) -> Result<Vec<ConcavityRecord>> {
    scenario.validate()?;
    grid.validate()?;
    if resolution < 2 {
        return Err(Error::InvalidArgument(
            "oracle resolution must be at least 2".into(),
        ));
    }
    let positions = grid.positions();
    Ok(map_slice(&positions, execution, |&relay| ConcavityRecord {
        relay,
        outcome: concavity_at(scenario, relay, resolution, inner(execution)),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        assert_eq!(bandwidth_gain(2e5, 2e5), 0.0);
        assert_eq!(bandwidth_gain(0.0, 0.0), 0.0);
        assert_eq!(bandwidth_gain(4e5, 3e5), 25.0);
        let u = UtilityPair::new(4.0, 6.0);
        assert_eq!(social_welfare_gain(u, u), Some(0.0));
        let g = social_welfare_gain(u, UtilityPair::new(5.0, 6.1)).unwrap();
        assert!((g - 11.0).abs() < 1e-12);
        assert_eq!(social_welfare_gain(UtilityPair::new(-1.0, 1.0), u), None);
    }

    #[test]
    fn grid_positions() {
        assert_eq!(SweepGrid::square_700(50.0).unwrap().positions().len(), 225);
        assert_eq!(SweepGrid::square_700(25.0).unwrap().positions().len(), 841);
        let corners = SweepGrid::square_700(700.0).unwrap().positions();
        assert_eq!(corners.len(), 4);
        assert_eq!(corners[0], Point::new(0.0, 0.0));
        assert!(SweepGrid::new(0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(SweepGrid::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }
}
