//! The two-source spectrum allocation game.
//!
//! Source `i` splits the total band ω into a direct-only part `ω - ω_i` and
//! a relayed part `ω_i`, paying `b (ω_1 + ω_2) ω_i` for relay bandwidth.
//! With the per-user constants
//!
//! ```text
//! φ_i = α f(γ_ii) / p_i          ψ_i = α f(γ_ii^AF) / (p_i + p_r)
//! ```
//!
//! the utility is `u_i = φ_i (ω - ω_i) + ψ_i ω_i - b (ω_1 + ω_2) ω_i`,
//! a concave quadratic in the player's own strategy.

use crate::error::{Error, Result};
use crate::system_model::{efficiency, LinkBudget, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub const fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub const fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// Strategy profile (ω₁, ω₂) in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BandAllocation {
    pub w1: f64,
    pub w2: f64,
}

impl BandAllocation {
    pub const fn new(w1: f64, w2: f64) -> Self {
        Self { w1, w2 }
    }

    pub fn get(&self, p: Player) -> f64 {
        match p {
            Player::One => self.w1,
            Player::Two => self.w2,
        }
    }

    pub fn set(&mut self, p: Player, value: f64) {
        match p {
            Player::One => self.w1 = value,
            Player::Two => self.w2 = value,
        }
    }

    pub fn total(&self) -> f64 {
        self.w1 + self.w2
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.w1, self.w2]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn within(&self, total_band: f64) -> bool {
        (0.0..=total_band).contains(&self.w1) && (0.0..=total_band).contains(&self.w2)
    }

    pub fn clamped(self, total_band: f64) -> Self {
        Self::new(
            self.w1.clamp(0.0, total_band),
            self.w2.clamp(0.0, total_band),
        )
    }

    /// Chebyshev distance, used for "within one grid cell" comparisons.
    pub fn max_distance(&self, other: &Self) -> f64 {
        (self.w1 - other.w1).abs().max((self.w2 - other.w2).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UtilityPair {
    pub u1: f64,
    pub u2: f64,
}

impl UtilityPair {
    pub const fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn get(&self, p: Player) -> f64 {
        match p {
            Player::One => self.u1,
            Player::Two => self.u2,
        }
    }

    pub fn sum(&self) -> f64 {
        self.u1 + self.u2
    }

    /// True when both entries are at least the threat values, up to
    /// `rel_tol * |threat|`.
    pub fn weakly_dominates(&self, threat: &UtilityPair, rel_tol: f64) -> bool {
        self.u1 >= threat.u1 - rel_tol * threat.u1.abs()
            && self.u2 >= threat.u2 - rel_tol * threat.u2.abs()
    }
}

/// φ (direct-only) and ψ (relay-assisted) energy efficiency per Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTerms {
    pub phi: f64,
    pub psi: f64,
}

impl UserTerms {
    /// Marginal value of moving one Hz to the relay, ignoring the price.
    pub fn relay_advantage(&self) -> f64 {
        self.psi - self.phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalTerms {
    pub users: [UserTerms; 2],
}

impl MarginalTerms {
    pub fn user(&self, p: Player) -> UserTerms {
        self.users[p.index()]
    }
}

pub fn marginal_terms(budget: &LinkBudget, scenario: &Scenario) -> MarginalTerms {
    let m = scenario.symbols_per_packet;
    let alpha = scenario.spectral_efficiency;
    let users = std::array::from_fn(|i| {
        let link = &budget.users[i];
        let p = scenario.tx_power[i];
        UserTerms {
            phi: alpha * efficiency(link.gamma_direct, m) / p,
            psi: alpha * efficiency(link.gamma_af, m) / (p + scenario.relay_power),
        }
    });
    MarginalTerms { users }
}

pub fn utility(
    player: Player,
    alloc: BandAllocation,
    terms: &MarginalTerms,
    scenario: &Scenario,
) -> f64 {
    let t = terms.user(player);
    let own = alloc.get(player);
    t.phi * (scenario.total_band - own) + t.psi * own - scenario.price * alloc.total() * own
}

pub fn utilities(alloc: BandAllocation, terms: &MarginalTerms, scenario: &Scenario) -> UtilityPair {
    UtilityPair::new(
        utility(Player::One, alloc, terms, scenario),
        utility(Player::Two, alloc, terms, scenario),
    )
}

/// ∂u_i/∂ω_i = ψ_i − φ_i − b(2ω_i + ω_j).
pub fn utility_partial(
    player: Player,
    alloc: BandAllocation,
    terms: &MarginalTerms,
    scenario: &Scenario,
) -> f64 {
    let own = alloc.get(player);
    let other = alloc.get(player.other());
    terms.user(player).relay_advantage() - scenario.price * (2.0 * own + other)
}

/// A best response together with a flag telling whether the maximizer was
/// not unique (flat utility) and the smallest one was picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub band: f64,
    pub degenerate: bool,
}

pub fn best_response(
    player: Player,
    other_band: f64,
    terms: &MarginalTerms,
    scenario: &Scenario,
) -> BestResponse {
    let c = terms.user(player).relay_advantage();
    let b = scenario.price;
    let omega = scenario.total_band;
    if b == 0.0 {
        // Linear utility in the own band: bang-bang, ties go to 0.
        return match c.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => BestResponse {
                band: omega,
                degenerate: false,
            },
            Some(std::cmp::Ordering::Less) => BestResponse {
                band: 0.0,
                degenerate: false,
            },
            _ => BestResponse {
                band: 0.0,
                degenerate: true,
            },
        };
    }
    BestResponse {
        band: ((c - b * other_band) / (2.0 * b)).clamp(0.0, omega),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    NashEquilibrium,
    NashBargaining,
}

/// Counters and flags gathered while computing an equilibrium report.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// A best response was not unique and the tie-break picked 0.
    pub degenerate_best_response: bool,
    /// Best-response validation landed elsewhere than the closed form.
    pub validation_mismatch: bool,
    /// Iterations where the Newton step had no positive curvature and a
    /// backtracking steepest-descent step was used instead.
    pub curvature_fallbacks: usize,
    /// Direction restarts (negative Polak-Ribière β or non-descent direction).
    pub direction_restarts: usize,
    /// The starting point was a stationary threat point and was perturbed.
    pub restarted_from_perturbed_start: bool,
    /// The descent result left the region above the threat point.
    pub rejected_below_threat: bool,
    /// The report comes from the grid oracle rather than the descent.
    pub oracle_fallback: bool,
    /// No grid point lay above the threat point; the threat allocation was
    /// returned.
    pub no_feasible_grid_point: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    pub kind: SolutionKind,
    pub allocation: BandAllocation,
    pub utilities: UtilityPair,
    pub iterations: usize,
    /// Gradient or step norm at exit, depending on the solver.
    pub residual: f64,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

/// Damping and stopping rule of the best-response validation iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseIteration {
    pub damping: f64,
    /// Stop when the step is below `rel_tol * ω` in both coordinates.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for BestResponseIteration {
    fn default() -> Self {
        Self {
            damping: 0.5,
            rel_tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// Simultaneous damped best-response dynamics from (0, 0).
///
/// Returns the fixed point and the number of iterations used.
pub fn best_response_iteration(
    terms: &MarginalTerms,
    scenario: &Scenario,
    settings: &BestResponseIteration,
) -> Result<(BandAllocation, usize)> {
    let mut w = BandAllocation::default();
    let tol = settings.rel_tol * scenario.total_band;
    let mut last_step = f64::INFINITY;
    for k in 1..=settings.max_iter {
        let r1 = best_response(Player::One, w.w2, terms, scenario).band;
        let r2 = best_response(Player::Two, w.w1, terms, scenario).band;
        let next = BandAllocation::new(
            (1.0 - settings.damping) * w.w1 + settings.damping * r1,
            (1.0 - settings.damping) * w.w2 + settings.damping * r2,
        );
        last_step = next.max_distance(&w);
        w = next;
        if last_step <= tol {
            return Ok((w, k));
        }
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        last_step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Face {
    Lower,
    Interior,
    Upper,
}

/// Closed-form KKT solution of the game with `b > 0`.
///
/// Enumerates the nine lower/interior/upper patterns; interior coordinates
/// solve their stationarity equation given the fixed ones. Returns `None`
/// only if rounding rejects every pattern.
fn kkt_equilibrium(terms: &MarginalTerms, scenario: &Scenario) -> Option<BandAllocation> {
    const FACES: [Face; 3] = [Face::Interior, Face::Lower, Face::Upper];
    let b = scenario.price;
    let omega = scenario.total_band;
    let c1 = terms.users[0].relay_advantage();
    let c2 = terms.users[1].relay_advantage();
    // Slack on the sign conditions, relative to the terms involved.
    let slack = 1e-12 * (c1.abs().max(c2.abs()) + b * omega);
    let band_slack = 1e-12 * omega;

    for f1 in FACES {
        for f2 in FACES {
            let fixed = |f: Face| match f {
                Face::Lower => Some(0.0),
                Face::Upper => Some(omega),
                Face::Interior => None,
            };
            let (w1, w2) = match (fixed(f1), fixed(f2)) {
                (Some(w1), Some(w2)) => (w1, w2),
                (Some(w1), None) => (w1, (c2 - b * w1) / (2.0 * b)),
                (None, Some(w2)) => ((c1 - b * w2) / (2.0 * b), w2),
                (None, None) => ((2.0 * c1 - c2) / (3.0 * b), (2.0 * c2 - c1) / (3.0 * b)),
            };
            let alloc = BandAllocation::new(w1, w2);
            let ok = [(f1, Player::One), (f2, Player::Two)]
                .iter()
                .all(|&(f, p)| {
                    let w = alloc.get(p);
                    let d = utility_partial(p, alloc, terms, scenario);
                    match f {
                        Face::Interior => w >= -band_slack && w <= omega + band_slack,
                        Face::Lower => d <= slack,
                        Face::Upper => d >= -slack,
                    }
                });
            if ok {
                return Some(alloc.clamped(omega));
            }
        }
    }
    None
}

/// The unique pure Nash equilibrium.
///
/// With `b > 0` the KKT closed form is used and cross-checked against
/// damped best-response dynamics; a disagreement larger than `1e-6 ω` is
/// flagged in the diagnostics and the closed form is kept. With `b = 0`
/// best responses do not depend on the opponent and the equilibrium is the
/// pair of (tie-broken) best responses.
pub fn nash_equilibrium(terms: &MarginalTerms, scenario: &Scenario) -> Result<EquilibriumReport> {
    let omega = scenario.total_band;
    let mut diagnostics = Diagnostics::default();

    if scenario.price == 0.0 {
        let r1 = best_response(Player::One, 0.0, terms, scenario);
        let r2 = best_response(Player::Two, 0.0, terms, scenario);
        diagnostics.degenerate_best_response = r1.degenerate || r2.degenerate;
        let allocation = BandAllocation::new(r1.band, r2.band);
        return Ok(EquilibriumReport {
            kind: SolutionKind::NashEquilibrium,
            allocation,
            utilities: utilities(allocation, terms, scenario),
            iterations: 0,
            residual: 0.0,
            converged: true,
            diagnostics,
        });
    }

    let (iterated, iterations) =
        best_response_iteration(terms, scenario, &BestResponseIteration::default())?;
    let allocation = match kkt_equilibrium(terms, scenario) {
        Some(closed) => {
            diagnostics.validation_mismatch = closed.max_distance(&iterated) > 1e-6 * omega;
            closed
        }
        None => {
            diagnostics.validation_mismatch = true;
            iterated
        }
    };
    Ok(EquilibriumReport {
        kind: SolutionKind::NashEquilibrium,
        allocation,
        utilities: utilities(allocation, terms, scenario),
        iterations,
        residual: kkt_residual(allocation, terms, scenario),
        converged: true,
        diagnostics,
    })
}

/// Largest violation of the per-coordinate KKT conditions.
pub fn kkt_residual(alloc: BandAllocation, terms: &MarginalTerms, scenario: &Scenario) -> f64 {
    let omega = scenario.total_band;
    Player::BOTH
        .iter()
        .map(|&p| {
            let w = alloc.get(p);
            let d = utility_partial(p, alloc, terms, scenario);
            if w <= 0.0 {
                d.max(0.0)
            } else if w >= omega {
                (-d).max(0.0)
            } else {
                d.abs()
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::system_model::{link_budget, Point};
    use proptest::prelude::*;

    fn terms(c: [(f64, f64); 2]) -> MarginalTerms {
        MarginalTerms {
            users: [
                UserTerms {
                    phi: c[0].0,
                    psi: c[0].1,
                },
                UserTerms {
                    phi: c[1].0,
                    psi: c[1].1,
                },
            ],
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    fn reference_terms() -> (Scenario, MarginalTerms) {
        let s = Scenario::reference();
        let budget = link_budget(&s, Point::new(450.0, 450.0)).unwrap();
        let t = marginal_terms(&budget, &s);
        (s, t)
    }

    #[test]
    fn marginal_terms_at_reference_relay() {
        let (_, t) = reference_terms();
        // 40-digit references.
        assert!(close(t.users[0].phi, 2.410_298_272_569_367_1e-5, 1e-10));
        assert!(close(t.users[0].psi, 4.444_040_422_377_369_2, 1e-12));
        assert!(close(t.users[1].phi, 1.914_325_928_876_279_7e-5, 1e-10));
        assert!(close(t.users[1].psi, 4.444_137_977_496_544_3, 1e-12));
    }

    #[test]
    fn marginal_terms_limits() {
        let s = Scenario::reference();
        let mut budget = link_budget(&s, Point::new(450.0, 450.0)).unwrap();
        budget.users[0].gamma_direct = 0.0;
        assert_eq!(marginal_terms(&budget, &s).users[0].phi, 0.0);

        // Silent relay: ψ → φ as p_r → 0.
        let quiet = Scenario {
            relay_power: 1e-15,
            ..Scenario::reference()
        };
        let b = link_budget(&quiet, Point::new(450.0, 450.0)).unwrap();
        let t = marginal_terms(&b, &quiet);
        for u in t.users {
            assert!(close(u.psi, u.phi, 1e-9));
        }
    }

    #[test]
    fn utility_examples() {
        let (s, t) = reference_terms();
        let omega = s.total_band;
        let zero = BandAllocation::new(0.0, 0.3 * omega);
        assert!(close(
            utility(Player::One, zero, &t, &s),
            t.users[0].phi * omega,
            1e-15
        ));

        let free = Scenario {
            price: 0.0,
            ..s.clone()
        };
        let full = BandAllocation::new(omega, 0.5 * omega);
        assert!(close(
            utility(Player::One, full, &t, &free),
            t.users[0].psi * omega,
            1e-15
        ));

        let quarter = BandAllocation::new(omega / 4.0, omega / 4.0);
        let u = utilities(quarter, &t, &s);
        assert!(close(u.u1, -138_971.817_168_613_42, 1e-10));
        assert!(close(u.u2, -138_951.148_181_397_35, 1e-10));
    }

    #[test]
    fn partial_examples() {
        let (s, t) = reference_terms();
        let free = Scenario {
            price: 0.0,
            ..s.clone()
        };
        let a = BandAllocation::new(1e5, 3e5);
        assert_eq!(
            utility_partial(Player::One, a, &t, &free),
            t.users[0].relay_advantage()
        );
        let wj = 1e5;
        let wi = (t.users[0].relay_advantage() - s.price * wj) / (2.0 * s.price);
        let d = utility_partial(Player::One, BandAllocation::new(wi, wj), &t, &s);
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn best_response_examples() {
        let s = Scenario::reference();
        let t = terms([(2.0, 1.0), (1.0, 1.0 + 1e-5 * (0.2e6 + 2e6))]);
        assert_eq!(best_response(Player::One, 1e5, &t, &s).band, 0.0);
        assert_eq!(best_response(Player::Two, 0.2e6, &t, &s).band, s.total_band);

        let free = Scenario {
            price: 0.0,
            ..s.clone()
        };
        let tie = terms([(1.0, 1.0), (1.0, 2.0)]);
        let r = best_response(Player::One, 0.0, &tie, &free);
        assert_eq!(
            r,
            BestResponse {
                band: 0.0,
                degenerate: true
            }
        );
        assert_eq!(
            best_response(Player::Two, 0.0, &tie, &free).band,
            free.total_band
        );
    }

    #[test]
    fn best_response_matches_dense_grid_search() {
        let (s, t) = reference_terms();
        let n = 100_000;
        let step = s.total_band / n as f64;
        for wj in [0.0, 5e4, 1.5e5, 4e5, 9e5] {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for k in 0..=n {
                let wi = k as f64 * step;
                let u = utility(Player::One, BandAllocation::new(wi, wj), &t, &s);
                if u > best.0 {
                    best = (u, wi);
                }
            }
            let br = best_response(Player::One, wj, &t, &s).band;
            assert!((br - best.1).abs() <= step, "wj={wj}: {br} vs {}", best.1);
        }
    }

    #[test]
    fn equilibrium_examples() {
        let s = Scenario::reference();
        let t = terms([(2.0, 1.0), (3.0, 3.0)]);
        let ne = nash_equilibrium(&t, &s).unwrap();
        assert_eq!(ne.allocation, BandAllocation::new(0.0, 0.0));

        let c = 3.0;
        let t = terms([(0.5, 0.5 + c), (0.5, 0.5 + c)]);
        let ne = nash_equilibrium(&t, &s).unwrap();
        let expect = c / (3.0 * s.price);
        assert!(close(ne.allocation.w1, expect, 1e-13));
        assert!(close(ne.allocation.w2, expect, 1e-13));
    }

    #[test]
    fn equilibrium_at_reference_relay() {
        let (s, t) = reference_terms();
        let ne = nash_equilibrium(&t, &s).unwrap();
        // 40-digit references of the interior closed form.
        assert!(close(ne.allocation.w1, 148_130.460_151_734_38, 1e-10));
        assert!(close(ne.allocation.w2, 148_140.711_635_995_59, 1e-10));
        assert!(close(ne.utilities.u1, 219_450.435_230_371_37, 1e-10));
        assert!(close(ne.utilities.u2, 219_475.847_699_480_74, 1e-10));
        let (it, _) = best_response_iteration(&t, &s, &BestResponseIteration::default()).unwrap();
        assert!(it.max_distance(&ne.allocation) <= 1e-6 * s.total_band);
        assert!(!ne.diagnostics.validation_mismatch);
    }

    #[test]
    fn equilibrium_without_price() {
        let s = Scenario {
            price: 0.0,
            ..Scenario::reference()
        };
        let t = terms([(1.0, 2.0), (2.0, 1.0)]);
        let ne = nash_equilibrium(&t, &s).unwrap();
        assert_eq!(ne.allocation, BandAllocation::new(s.total_band, 0.0));
    }

    fn arb_instance() -> impl Strategy<Value = (Scenario, MarginalTerms)> {
        (
            1e-7f64..1e-4,
            1e5f64..1e7,
            prop::array::uniform4(0.0f64..10.0),
        )
            .prop_map(|(b, omega, v)| {
                let s = Scenario {
                    price: b,
                    total_band: omega,
                    ..Scenario::reference()
                };
                (s, terms([(v[0], v[1]), (v[2], v[3])]))
            })
    }

    proptest! {
        #[test]
        fn utility_is_concave_in_own_band((s, t) in arb_instance(), a in 0.0f64..1.0, d in 0.0f64..1.0, other in 0.0f64..1.0) {
            let omega = s.total_band;
            let lo = a * omega * 0.5;
            let hi = (lo + d * omega * 0.5).min(omega);
            let mid = 0.5 * (lo + hi);
            let u = |w: f64| utility(Player::Two, BandAllocation::new(other * omega, w), &t, &s);
            let chord = 0.5 * (u(lo) + u(hi));
            prop_assert!(u(mid) >= chord - 1e-9 * chord.abs().max(1.0));
        }

        #[test]
        fn best_response_is_non_increasing((s, t) in arb_instance(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let omega = s.total_band;
            let r_lo = best_response(Player::One, lo * omega, &t, &s).band;
            let r_hi = best_response(Player::One, hi * omega, &t, &s).band;
            prop_assert!(r_hi <= r_lo);
        }

        #[test]
        fn equilibrium_satisfies_kkt((s, t) in arb_instance()) {
            let ne = nash_equilibrium(&t, &s).unwrap();
            prop_assert!(ne.allocation.within(s.total_band));
            for p in Player::BOTH {
                let w = ne.allocation.get(p);
                let d = utility_partial(p, ne.allocation, &t, &s);
                let c = t.user(p).relay_advantage();
                if w == 0.0 {
                    prop_assert!(d <= 1e-9 * c.abs().max(1.0));
                } else if w == s.total_band {
                    prop_assert!(d >= -1e-9 * c.abs().max(1.0));
                } else {
                    prop_assert!(d.abs() <= 1e-9 * c.abs().max(1.0), "partial {d}");
                }
            }
        }
    }
}
