//! Nonlinear conjugate gradient with Polak-Ribière updates and a Newton
//! step length, on a two-dimensional box.

use super::norm;

/// A twice-differentiable objective of two variables, to be minimized.
pub trait SmoothObjective {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CgMode {
    /// Both coordinates take the step.
    #[default]
    Joint,
    /// Only one coordinate takes the step per iteration, starting with the
    /// first and alternating; the other keeps its previous value.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Absolute stopping threshold on the direction norm. When `None`, the
    /// threshold is `rel_epsilon * max(1, ‖g₀‖)`.
    pub epsilon: Option<f64>,
    pub rel_epsilon: f64,
    pub max_iter: usize,
    pub mode: CgMode,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            epsilon: None,
            rel_epsilon: 1e-8,
            max_iter: 500,
            mode: CgMode::Joint,
        }
    }
}

impl CgSettings {
    pub fn epsilon_for(&self, initial_gradient_norm: f64) -> f64 {
        self.epsilon
            .unwrap_or(self.rel_epsilon * initial_gradient_norm.max(1.0))
    }
}

/// Solver state after an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgState {
    pub k: usize,
    pub iterate: [f64; 2],
    pub gradient: [f64; 2],
    pub direction: [f64; 2],
    /// Step length taken to reach `iterate`.
    pub step: f64,
    /// Polak-Ribière coefficient used to build `direction`.
    pub beta: f64,
    pub epsilon: f64,
    pub mode: CgMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub x: [f64; 2],
    pub value: f64,
    pub iterations: usize,
    pub direction_norm: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub curvature_fallbacks: usize,
    pub direction_restarts: usize,
}

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 80;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn quad_form(h: &[[f64; 2]; 2], v: [f64; 2]) -> f64 {
    v[0] * (h[0][0] * v[0] + h[0][1] * v[1]) + v[1] * (h[1][0] * v[0] + h[1][1] * v[1])
}

fn project(x: [f64; 2], bounds: [f64; 2]) -> [f64; 2] {
    x.map(|xi| xi.clamp(bounds[0], bounds[1]))
}

/// Zeroes components of a search direction that would leave the box from an
/// active bound.
fn clip_direction(x: [f64; 2], mut v: [f64; 2], bounds: [f64; 2]) -> [f64; 2] {
    for i in 0..2 {
        if (x[i] <= bounds[0] && v[i] < 0.0) || (x[i] >= bounds[1] && v[i] > 0.0) {
            v[i] = 0.0;
        }
    }
    v
}

/// Gradient with the components pushing out of an active bound removed.
fn projected_gradient(x: [f64; 2], g: [f64; 2], bounds: [f64; 2]) -> [f64; 2] {
    let d = clip_direction(x, [-g[0], -g[1]], bounds);
    [-d[0], -d[1]]
}

/// Halves `t` until the projected step does not increase the objective, or
/// with `armijo_slope` set, until it gives sufficient decrease. Keeps the
/// last trial if no halving succeeds.
fn backtrack<F: SmoothObjective>(
    objective: &F,
    bounds: [f64; 2],
    x: [f64; 2],
    v: [f64; 2],
    f0: f64,
    mut t: f64,
    armijo_slope: Option<f64>,
) -> (f64, [f64; 2]) {
    let trial = |t: f64| project([x[0] + t * v[0], x[1] + t * v[1]], bounds);
    let mut next = trial(t);
    for _ in 0..MAX_BACKTRACKS {
        let target = match armijo_slope {
            Some(slope) => f0 + ARMIJO_SLOPE * t * slope,
            // Changes below rounding of f0 do not count as an increase.
            None => f0 + 64.0 * f64::EPSILON * f0.abs(),
        };
        if objective.value(next) <= target {
            break;
        }
        t *= BACKTRACK_FACTOR;
        next = trial(t);
    }
    (t, next)
}

pub fn minimize<F: SmoothObjective>(
    objective: &F,
    bounds: [f64; 2],
    x0: [f64; 2],
    settings: &CgSettings,
) -> CgOutcome {
    minimize_observed(objective, bounds, x0, settings, |_| {})
}

/// [`minimize`] with a callback invoked after every iteration.
pub fn minimize_observed<F: SmoothObjective>(
    objective: &F,
    bounds: [f64; 2],
    x0: [f64; 2],
    settings: &CgSettings,
    mut observe: impl FnMut(&CgState),
) -> CgOutcome {
    let mut x = project(x0, bounds);
    let raw = objective.gradient(x);
    let eps = settings.epsilon_for(norm(raw));
    let mut g = projected_gradient(x, raw, bounds);
    let mut v = [-g[0], -g[1]];
    let mut k = 0;
    let mut curvature_fallbacks = 0;
    let mut direction_restarts = 0;

    while norm(v) > eps && k < settings.max_iter {
        let mut slope = dot(g, v);
        if slope >= 0.0 {
            v = [-g[0], -g[1]];
            slope = -dot(g, g);
            direction_restarts += 1;
        }
        let h = objective.hessian(x);
        let curvature = quad_form(&h, v);
        let f0 = objective.value(x);
        let mut restart = false;
        let (step, mut next) = if curvature > 0.0 {
            let t = -slope / curvature;
            backtrack(objective, bounds, x, v, f0, t, None)
        } else {
            // No positive curvature along v: steepest descent with Armijo
            // backtracking for this iteration, starting from 1/‖H‖.
            curvature_fallbacks += 1;
            restart = true;
            v = [-g[0], -g[1]];
            slope = -dot(g, g);
            let frobenius = h.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
            let t0 = if frobenius > 0.0 {
                1.0 / frobenius
            } else {
                (bounds[1] - bounds[0]) / norm(v)
            };
            backtrack(objective, bounds, x, v, f0, t0, Some(slope))
        };
        if settings.mode == CgMode::Alternating {
            let frozen = 1 - k % 2;
            next[frozen] = x[frozen];
        }

        let g_next = projected_gradient(next, objective.gradient(next), bounds);
        let gg = dot(g, g);
        let mut beta = if gg > 0.0 {
            dot(g_next, [g_next[0] - g[0], g_next[1] - g[1]]) / gg
        } else {
            0.0
        };
        if beta < 0.0 {
            beta = 0.0;
            direction_restarts += 1;
        }
        if restart {
            beta = 0.0;
        }
        v = clip_direction(
            next,
            [-g_next[0] + beta * v[0], -g_next[1] + beta * v[1]],
            bounds,
        );
        x = next;
        g = g_next;
        k += 1;
        observe(&CgState {
            k,
            iterate: x,
            gradient: g,
            direction: v,
            step,
            beta,
            epsilon: eps,
            mode: settings.mode,
        });
    }

    let direction_norm = norm(v);
    CgOutcome {
        x,
        value: objective.value(x),
        iterations: k,
        direction_norm,
        epsilon: eps,
        converged: direction_norm <= eps,
        curvature_fallbacks,
        direction_restarts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bowl {
        centre: [f64; 2],
        scale: [f64; 2],
    }

    impl SmoothObjective for Bowl {
        fn value(&self, x: [f64; 2]) -> f64 {
            self.scale[0] * (x[0] - self.centre[0]).powi(2)
                + self.scale[1] * (x[1] - self.centre[1]).powi(2)
        }
        fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
            [
                2.0 * self.scale[0] * (x[0] - self.centre[0]),
                2.0 * self.scale[1] * (x[1] - self.centre[1]),
            ]
        }
        fn hessian(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
            [[2.0 * self.scale[0], 0.0], [0.0, 2.0 * self.scale[1]]]
        }
    }

    /// Rosenbrock-like quartic with a non-convex region.
    struct Banana;

    impl SmoothObjective for Banana {
        fn value(&self, x: [f64; 2]) -> f64 {
            (1.0 - x[0]).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
            let r = x[1] - x[0] * x[0];
            [-2.0 * (1.0 - x[0]) - 40.0 * x[0] * r, 20.0 * r]
        }
        fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
            let h00 = 2.0 - 40.0 * (x[1] - x[0] * x[0]) + 80.0 * x[0] * x[0];
            [[h00, -40.0 * x[0]], [-40.0 * x[0], 20.0]]
        }
    }

    #[test]
    fn isotropic_quadratic_in_at_most_two_iterations() {
        let f = Bowl {
            centre: [3.0, -2.0],
            scale: [1.0, 1.0],
        };
        let out = minimize(&f, [-10.0, 10.0], [7.0, 5.0], &CgSettings::default());
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert!((out.x[0] - 3.0).abs() < 1e-12 && (out.x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn anisotropic_quadratic_in_two_iterations() {
        let f = Bowl {
            centre: [1.0, 4.0],
            scale: [1.0, 25.0],
        };
        let out = minimize(&f, [-10.0, 10.0], [-6.0, 0.5], &CgSettings::default());
        assert!(out.converged, "{out:?}");
        assert!(out.iterations <= 2);
        assert!((out.x[0] - 1.0).abs() < 1e-9 && (out.x[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let f = Bowl {
            centre: [1.0, 1.0],
            scale: [1.0, 1.0],
        };
        let out = minimize(&f, [-10.0, 10.0], [1.0, 1.0], &CgSettings::default());
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }

    #[test]
    fn bound_constrained_minimum() {
        let f = Bowl {
            centre: [-5.0, 3.0],
            scale: [1.0, 2.0],
        };
        let out = minimize(&f, [0.0, 10.0], [6.0, 6.0], &CgSettings::default());
        assert!(out.converged);
        assert_eq!(out.x[0], 0.0);
        assert!((out.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn nonconvex_start_uses_fallback_and_converges() {
        let settings = CgSettings {
            max_iter: 5_000,
            ..CgSettings::default()
        };
        let out = minimize(&Banana, [-2.0, 2.0], [-1.0, 1.9], &settings);
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn alternating_mode_moves_one_coordinate_per_iteration() {
        let f = Bowl {
            centre: [1.0, 2.0],
            scale: [1.0, 3.0],
        };
        let settings = CgSettings {
            mode: CgMode::Alternating,
            max_iter: 2_000,
            ..CgSettings::default()
        };
        let mut prev = [5.0, 5.0];
        let mut moved = Vec::new();
        let out = minimize_observed(&f, [-10.0, 10.0], prev, &settings, |s| {
            moved.push([s.iterate[0] != prev[0], s.iterate[1] != prev[1]]);
            prev = s.iterate;
        });
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 2.0).abs() < 1e-6);
        for (k, m) in moved.iter().enumerate() {
            let frozen = 1 - k % 2;
            assert!(!m[frozen], "iteration {k} moved the frozen coordinate");
        }
    }
}
