//! Nash bargaining over the spectrum game.
//!
//! The threat point is the Nash equilibrium. The bargaining objective is the
//! Nash product `π = (u₁ − u₁^NE)(u₂ − u₂^NE)`, maximized over allocations
//! whose utilities are not below the threat point.

pub mod cg;
mod eigen;
mod oracle;
mod region;

pub use cg::{minimize, CgMode, CgOutcome, CgSettings, CgState, SmoothObjective};
pub use eigen::{eigenvalues, EigenPair, Hessian2x2};
pub use oracle::{
    grid_argmax_nash_product, grid_oracle_nbs, refine_oracle, refined_grid_oracle_nbs, GridArgmax,
};
pub use region::{
    best_time_shared_point, convex_hull, point_in_convex_polygon, sample_utility_region,
    HullVertex, RegionSample, TimeSharedPoint,
};

use crate::error::Result;
use crate::game::{
    marginal_terms, nash_equilibrium, utilities, utility_partial, BandAllocation,
    EquilibriumReport, MarginalTerms, Player, SolutionKind, UtilityPair,
};
use crate::parallel::Execution;
use crate::system_model::{link_budget, LinkBudget, Point, Scenario};

/// Everything the Nash product needs at one relay position.
#[derive(Debug, Clone)]
pub struct NashProductContext {
    pub scenario: Scenario,
    pub budget: LinkBudget,
    pub terms: MarginalTerms,
    pub ne: EquilibriumReport,
}

impl NashProductContext {
    pub fn new(scenario: &Scenario, relay: Point) -> Result<Self> {
        let budget = link_budget(scenario, relay)?;
        let terms = marginal_terms(&budget, scenario);
        Self::from_parts(scenario.clone(), budget, terms)
    }

    pub fn from_parts(
        scenario: Scenario,
        budget: LinkBudget,
        terms: MarginalTerms,
    ) -> Result<Self> {
        let ne = nash_equilibrium(&terms, &scenario)?;
        Ok(Self {
            scenario,
            budget,
            terms,
            ne,
        })
    }

    pub fn threat(&self) -> UtilityPair {
        self.ne.utilities
    }

    pub fn ne_alloc(&self) -> BandAllocation {
        self.ne.allocation
    }

    pub fn total_band(&self) -> f64 {
        self.scenario.total_band
    }

    pub fn utilities(&self, alloc: BandAllocation) -> UtilityPair {
        utilities(alloc, &self.terms, &self.scenario)
    }

    /// Utility gains over the threat point.
    fn surplus(&self, alloc: BandAllocation) -> (f64, f64) {
        let u = self.utilities(alloc);
        let t = self.threat();
        (u.u1 - t.u1, u.u2 - t.u2)
    }

    /// True when `alloc` does not leave either player below the threat point.
    pub fn above_threat(&self, alloc: BandAllocation, rel_tol: f64) -> bool {
        self.utilities(alloc)
            .weakly_dominates(&self.threat(), rel_tol)
    }
}

pub fn nash_product(alloc: BandAllocation, ctx: &NashProductContext) -> f64 {
    let (d1, d2) = ctx.surplus(alloc);
    d1 * d2
}

/// Analytic gradient (∂π/∂ω₁, ∂π/∂ω₂).
pub fn nash_product_gradient(alloc: BandAllocation, ctx: &NashProductContext) -> [f64; 2] {
    let (d1, d2) = ctx.surplus(alloc);
    let b = ctx.scenario.price;
    let p1 = utility_partial(Player::One, alloc, &ctx.terms, &ctx.scenario);
    let p2 = utility_partial(Player::Two, alloc, &ctx.terms, &ctx.scenario);
    // ∂u_j/∂ω_i = −b ω_j for j ≠ i.
    [p1 * d2 - b * alloc.w2 * d1, p2 * d1 - b * alloc.w1 * d2]
}

/// Second partials of π.
pub fn hessian(alloc: BandAllocation, ctx: &NashProductContext) -> Hessian2x2 {
    let (d1, d2) = ctx.surplus(alloc);
    let b = ctx.scenario.price;
    let (w1, w2) = (alloc.w1, alloc.w2);
    let t1 = ctx.terms.users[0];
    let t2 = ctx.terms.users[1];
    let a11 = -2.0 * b * d2 - 2.0 * b * w2 * (-t1.phi + t1.psi - b * (2.0 * w1 + w2));
    let a22 = -2.0 * b * d1 - 2.0 * b * w1 * (-t2.phi + t2.psi - b * (2.0 * w2 + w1));
    let a12 = -b * d2 - b * d1
        + b * b * w1 * w2
        + (t1.phi - t1.psi + b * (2.0 * w1 + w2)) * (t2.phi - t2.psi + b * (2.0 * w2 + w1));
    Hessian2x2 {
        a11,
        a12,
        a21: a12,
        a22,
    }
}

/// Both Hessian eigenvalues strictly negative.
pub fn is_strictly_concave_at(alloc: BandAllocation, ctx: &NashProductContext) -> bool {
    eigenvalues(&hessian(alloc, ctx)).is_negative_definite()
}

/// `π_m = −π`, the objective handed to the conjugate-gradient minimizer.
pub struct NegatedNashProduct<'a>(pub &'a NashProductContext);

impl SmoothObjective for NegatedNashProduct<'_> {
    fn value(&self, x: [f64; 2]) -> f64 {
        -nash_product(BandAllocation::from_array(x), self.0)
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let g = nash_product_gradient(BandAllocation::from_array(x), self.0);
        [-g[0], -g[1]]
    }

    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let h = hessian(BandAllocation::from_array(x), self.0);
        [[-h.a11, -h.a12], [-h.a21, -h.a22]]
    }
}

/// How the descent is started when the caller gives no explicit point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StartPoint {
    /// The best scaled-down threat allocation `κ·ω^NE`, `κ ∈ (0, 1)`, with
    /// both players strictly above the threat point; the centre of the box
    /// when there is none.
    #[default]
    Auto,
    /// (ω/2, ω/2).
    Centre,
    Explicit(BandAllocation),
}

impl StartPoint {
    pub fn resolve(&self, ctx: &NashProductContext) -> BandAllocation {
        let omega = ctx.total_band();
        let centre = BandAllocation::new(0.5 * omega, 0.5 * omega);
        match *self {
            StartPoint::Explicit(w) => w.clamped(omega),
            StartPoint::Centre => centre,
            StartPoint::Auto => {
                // Best point of the segment from the origin to the threat
                // allocation; shrinking an interior threat allocation raises
                // both utilities to first order.
                let ne = ctx.ne_alloc();
                let mut best: Option<(f64, BandAllocation)> = None;
                for k in 1..AUTO_START_SAMPLES {
                    let kappa = k as f64 / AUTO_START_SAMPLES as f64;
                    let w = BandAllocation::new(kappa * ne.w1, kappa * ne.w2);
                    let (d1, d2) = ctx.surplus(w);
                    if d1 > 0.0 && d2 > 0.0 && best.is_none_or(|(v, _)| d1 * d2 > v) {
                        best = Some((d1 * d2, w));
                    }
                }
                best.map_or(centre, |(_, w)| w)
            }
        }
    }
}

const AUTO_START_SAMPLES: usize = 1000;

/// Zoom levels used when a plain oracle comparison misses.
const ORACLE_REFINE_LEVELS: usize = 4;

/// Conjugate-gradient maximization of π from `w0`.
///
/// Returns the raw descent result; the threat-region check and any oracle
/// fallback are left to [`solve_nbs`].
pub fn cg_nbs(
    ctx: &NashProductContext,
    w0: BandAllocation,
    settings: &CgSettings,
) -> EquilibriumReport {
    let omega = ctx.total_band();
    let objective = NegatedNashProduct(ctx);
    let mut start = w0.clamped(omega);
    let mut restarted = false;

    // The threat point is a critical point of π; starting on it stalls.
    let g0 = objective.gradient(start.to_array());
    let eps0 = settings.epsilon_for(norm(g0));
    if norm(g0) <= eps0 && nash_product(start, ctx).abs() <= f64::EPSILON * ctx.threat().sum().abs()
    {
        start = if start.w1 > 0.0 || start.w2 > 0.0 {
            BandAllocation::new(0.9 * start.w1, 0.9 * start.w2)
        } else {
            BandAllocation::new(0.05 * omega, 0.05 * omega)
        };
        restarted = true;
    }

    let outcome = minimize(&objective, [0.0, omega], start.to_array(), settings);
    let allocation = BandAllocation::from_array(outcome.x);
    let mut report = EquilibriumReport {
        kind: SolutionKind::NashBargaining,
        allocation,
        utilities: ctx.utilities(allocation),
        iterations: outcome.iterations,
        residual: outcome.direction_norm,
        converged: outcome.converged,
        diagnostics: Default::default(),
    };
    report.diagnostics.curvature_fallbacks = outcome.curvature_fallbacks;
    report.diagnostics.direction_restarts = outcome.direction_restarts;
    report.diagnostics.restarted_from_perturbed_start = restarted;
    report
}

/// Settings of the full NBS pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbsSolver {
    pub cg: CgSettings,
    pub start: StartPoint,
    /// Grid oracle resolution per axis.
    pub oracle_resolution: usize,
    /// Relative slack when testing utilities against the threat point.
    pub threat_tol: f64,
    pub execution: Execution,
}

impl Default for NbsSolver {
    fn default() -> Self {
        Self {
            cg: CgSettings::default(),
            start: StartPoint::Auto,
            oracle_resolution: 401,
            threat_tol: 1e-12,
            execution: Execution::default(),
        }
    }
}

/// Outcome of [`solve_nbs`].
#[derive(Debug, Clone, PartialEq)]
pub struct NbsSolution {
    /// The accepted bargaining solution.
    pub report: EquilibriumReport,
    /// The raw descent result, before acceptance.
    pub cg: EquilibriumReport,
    /// Grid oracle result, when it was evaluated.
    pub oracle: Option<EquilibriumReport>,
    /// CG lies within one oracle cell of the oracle argmax, or of the
    /// zoom-refined argmax when the plain grid misses.
    pub cg_matched_oracle: Option<bool>,
}

/// Runs the descent, checks the result against the threat point and falls
/// back to the grid oracle when it is rejected. With `run_oracle` the oracle
/// is evaluated regardless, for cross-checking.
pub fn solve_nbs(ctx: &NashProductContext, solver: &NbsSolver, run_oracle: bool) -> NbsSolution {
    let w0 = solver.start.resolve(ctx);
    let cg = cg_nbs(ctx, w0, &solver.cg);
    let accepted = cg.converged
        && cg
            .utilities
            .weakly_dominates(&ctx.threat(), solver.threat_tol)
        && nash_product(cg.allocation, ctx) >= 0.0;

    let oracle = (run_oracle || !accepted)
        .then(|| grid_oracle_nbs(ctx, solver.oracle_resolution, solver.execution));
    let cell = ctx.total_band() / (solver.oracle_resolution - 1) as f64;
    let cg_matched_oracle = oracle.as_ref().filter(|_| run_oracle).map(|o| {
        // Elongated level sets let the plain grid argmax drift more than
        // a cell along the ridge; refine before calling it a mismatch.
        o.allocation.max_distance(&cg.allocation) <= cell
            || refine_oracle(
                ctx,
                *o,
                solver.oracle_resolution,
                ORACLE_REFINE_LEVELS,
                solver.execution,
            )
            .allocation
            .max_distance(&cg.allocation)
                <= cell
    });

    let report = if accepted {
        cg
    } else {
        let mut r = oracle.expect("oracle evaluated when descent is rejected");
        r.diagnostics.rejected_below_threat = !cg
            .utilities
            .weakly_dominates(&ctx.threat(), solver.threat_tol);
        r.diagnostics.oracle_fallback = true;
        r.iterations = cg.iterations;
        r
    };
    NbsSolution {
        report,
        cg,
        oracle,
        cg_matched_oracle,
    }
}

pub(crate) fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}
