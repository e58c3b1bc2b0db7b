//! Objective-function abstraction and standard synthetic benchmarks.

/// A minimization objective over fixed-length real vectors.
///
/// Implementations must be pure: the same input always yields the same
/// output. The optimizer aborts if an evaluation returns a non-finite value.
pub trait Objective: Sync {
    /// Objective value for one candidate; lower is better.
    fn evaluate(&self, x: &[f64]) -> f64;

    /// Evaluate several candidates, writing `out[i] = evaluate(rows[i])`.
    ///
    /// The default maps `evaluate` sequentially. Callers with expensive
    /// objectives may override this to batch or parallelize; results must
    /// not depend on evaluation order.
    fn evaluate_batch(&self, rows: &[&[f64]], out: &mut [f64]) {
        assert_eq!(rows.len(), out.len());
        for (row, slot) in rows.iter().zip(out.iter_mut()) {
            *slot = self.evaluate(row);
        }
    }
}

/// Any pure `Fn(&[f64]) -> f64` closure is usable as an objective.
impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// `f(x) = sum x_i^2`, minimum 0 at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Ellipsoid with condition number 10^6: `sum 10^{6(i-1)/(n-1)} x_i^2`.
///
/// Degenerates to the sphere for `n = 1`.
pub fn ellipsoid(x: &[f64]) -> f64 {
    let n = x.len();
    if n <= 1 {
        return sphere(x);
    }
    x.iter()
        .enumerate()
        .map(|(i, v)| 10f64.powf(6.0 * i as f64 / (n - 1) as f64) * v * v)
        .sum()
}

/// `sum 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`, minimum 0 at all-ones.
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optima_are_zero() {
        assert_eq!(sphere(&[0.0; 7]), 0.0);
        assert_eq!(ellipsoid(&[0.0; 7]), 0.0);
        assert_eq!(rosenbrock(&[1.0; 7]), 0.0);
    }

    #[test]
    fn sphere_hand_value() {
        assert_eq!(sphere(&[1.0, 2.0, 3.0]), 14.0);
    }

    #[test]
    fn ellipsoid_conditioning() {
        // Last coordinate is weighted 10^6 relative to the first.
        let n = 10;
        let mut lo = vec![0.0; n];
        lo[0] = 1.0;
        let mut hi = vec![0.0; n];
        hi[n - 1] = 1.0;
        assert_eq!(ellipsoid(&lo), 1.0);
        assert!((ellipsoid(&hi) - 1e6).abs() < 1e-6);
    }

    #[test]
    fn ellipsoid_single_variable() {
        assert_eq!(ellipsoid(&[3.0]), 9.0);
    }

    #[test]
    fn functions_nonnegative_away_from_optimum() {
        let x = [0.3, -1.2, 2.5, 0.0];
        assert!(sphere(&x) > 0.0);
        assert!(ellipsoid(&x) > 0.0);
        assert!(rosenbrock(&x) > 0.0);
    }

    #[test]
    fn closures_are_objectives() {
        let f = |x: &[f64]| x[0] + 1.0;
        let mut out = [0.0; 2];
        Objective::evaluate_batch(&f, &[&[1.0], &[2.0]], &mut out);
        assert_eq!(out, [2.0, 3.0]);
    }
}
