/// Second partial derivatives of the Nash product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Hessian2x2 {
    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }
}

/// Real eigenvalues of a symmetric 2×2 matrix, `lambda1 <= lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Discriminant of `λ² − tr λ + det`, written as a sum of squares.
    pub delta: f64,
}

impl EigenPair {
    pub fn is_negative_definite(&self) -> bool {
        self.lambda2 < 0.0
    }
}

/// Roots of the characteristic polynomial with `Δ = (a11 − a22)² + 4 a12 a21`.
pub fn eigenvalues(h: &Hessian2x2) -> EigenPair {
    let diff = h.a11 - h.a22;
    let delta = diff * diff + 4.0 * h.a12 * h.a21;
    let root = delta.max(0.0).sqrt();
    let tr = h.trace();
    // The textbook (tr ∓ √Δ)/2 loses the small root when |tr| ≈ √Δ; recover
    // it from det = λ₁λ₂ in that case.
    let (lambda1, lambda2) = if tr >= 0.0 {
        let big = 0.5 * (tr + root);
        let small = if big != 0.0 {
            h.determinant() / big
        } else {
            0.5 * (tr - root)
        };
        (small, big)
    } else {
        let big = 0.5 * (tr - root);
        let small = if big != 0.0 {
            h.determinant() / big
        } else {
            0.5 * (tr + root)
        };
        (big, small)
    };
    let (lambda1, lambda2) = if lambda1 <= lambda2 {
        (lambda1, lambda2)
    } else {
        (lambda2, lambda1)
    };
    EigenPair {
        lambda1,
        lambda2,
        delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(a11: f64, a12: f64, a22: f64) -> Hessian2x2 {
        Hessian2x2 {
            a11,
            a12,
            a21: a12,
            a22,
        }
    }

    #[test]
    fn diagonal_and_antidiagonal() {
        let e = eigenvalues(&sym(-3.0, 0.0, -3.0));
        assert_eq!((e.lambda1, e.lambda2, e.delta), (-3.0, -3.0, 0.0));
        let e = eigenvalues(&sym(0.0, -2.5, 0.0));
        assert_eq!((e.lambda1, e.lambda2), (-2.5, 2.5));
        assert!(e.delta > 0.0);
    }

    #[test]
    fn negative_definite_flag() {
        assert!(eigenvalues(&sym(-1.0, 0.0, -1.0)).is_negative_definite());
        assert!(!eigenvalues(&sym(-1.0, 2.0, -1.0)).is_negative_definite());
        assert!(!eigenvalues(&sym(0.0, 0.0, -1.0)).is_negative_definite());
    }

    #[test]
    fn small_root_is_accurate() {
        // λ = 1e8 and 1e-8.
        let e = eigenvalues(&sym(1e8, 0.0, 1e-8));
        assert_eq!(e.lambda2, 1e8);
        assert!((e.lambda1 - 1e-8).abs() < 1e-22);
    }
}
