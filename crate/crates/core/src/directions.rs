//! Estimation of the two descent directions that steer repopulation: the
//! smoothed improvement path `P` of the best individual and the anisotropic
//! direction `C_ani`, the dominant direction of best-minus-worse difference
//! vectors with the `P` component removed.
//!
//! The dominant direction comes from a power method on the small
//! `k x k` Gram matrix of the difference vectors (`k` is the number of
//! sampled worse individuals, 4 by default), so the whole estimate costs
//! `O(k^2 * n)` time and `O(k * n)` memory with no `n x n` intermediate.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;

/// Directions below this norm are treated as zero.
const ZERO_NORM: f64 = 1e-12;
/// Power-iteration budget on the Gram matrix. The matrix is tiny, so a
/// large cap is cheap and covers eigenvalue gaps down to a fraction of a
/// percent.
const POWER_MAX_ITERS: usize = 10_000;
/// Successive-iterate change below which the power method stops.
const POWER_TOL: f64 = 1e-12;

/// Direction state carried across generations.
#[derive(Debug, Clone)]
pub struct DirectionState {
    /// Smoothed displacement of the best individual across generations.
    pub p: Array1<f64>,
    /// Smoothed anisotropic direction (unit-or-zero when fresh, arbitrary
    /// norm after blending).
    pub c_ani: Array1<f64>,
    /// Mean projection of non-best individuals onto `c_ani`.
    pub mu_ani: f64,
    /// Standard deviation of those projections.
    pub sigma_ani: f64,
}

impl DirectionState {
    pub fn zeros(n_var: usize) -> Self {
        DirectionState {
            p: Array1::zeros(n_var),
            c_ani: Array1::zeros(n_var),
            mu_ani: 0.0,
            sigma_ani: 0.0,
        }
    }
}

/// Result of one anisotropic-direction estimate.
#[derive(Debug, Clone)]
pub struct AnisotropicEstimate {
    pub c_ani: Array1<f64>,
    pub mu_ani: f64,
    pub sigma_ani: f64,
}

/// Exponential blend of the best individual's displacement:
/// `P_new = 0.1 * (x_best - x_best_prev) + 0.9 * P_prev`.
pub fn update_p(
    prev: &Array1<f64>,
    x_best: &Array1<f64>,
    x_best_prev: &Array1<f64>,
) -> Array1<f64> {
    assert_eq!(prev.len(), x_best.len());
    assert_eq!(prev.len(), x_best_prev.len());
    let mut p = Array1::zeros(prev.len());
    for (((out, &old), &cur), &before) in p
        .iter_mut()
        .zip(prev.iter())
        .zip(x_best.iter())
        .zip(x_best_prev.iter())
    {
        *out = 0.1 * (cur - before) + 0.9 * old;
    }
    p
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Remove from `v` its projection onto the unit vector `unit`.
fn deflate(v: &mut Array1<f64>, unit: &Array1<f64>) {
    let coeff = v.dot(unit);
    v.scaled_add(-coeff, unit);
}

/// Dominant direction of the rows of `diffs` after removing their
/// component along `p`, as a unit vector (zero when the deflated rows are
/// numerically null).
///
/// The power method runs on the `k x k` Gram matrix of the rows; the
/// resulting combination coefficients are lifted back to a length-`n`
/// vector, re-deflated against `p`, normalized, and sign-aligned with the
/// row sum of the deflated differences so the result points from the worse
/// individuals toward the best.
///
/// Takes `diffs` by value and deflates it in place, keeping the transient
/// footprint at one `k x n` buffer.
pub fn dominant_direction(diffs: Array2<f64>, p: &Array1<f64>) -> Array1<f64> {
    let (k, n) = (diffs.nrows(), diffs.ncols());
    assert_eq!(p.len(), n);
    let mut deflated = diffs;

    let p_norm = norm(p);
    let p_unit = if p_norm > ZERO_NORM {
        Some(p / p_norm)
    } else {
        None
    };
    if let Some(unit) = &p_unit {
        for mut row in deflated.rows_mut() {
            let coeff = row.dot(unit);
            row.scaled_add(-coeff, unit);
        }
    }

    let mut gram = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let value = deflated.row(a).dot(&deflated.row(b));
            gram[[a, b]] = value;
            gram[[b, a]] = value;
        }
    }
    if gram.iter().all(|&v| v.abs() < ZERO_NORM * ZERO_NORM) {
        return Array1::zeros(n);
    }

    // Power iteration; the Gram matrix is positive semi-definite, so the
    // iterates converge to the top eigenvector without sign flips.
    let mut w = Array1::from_elem(k, 1.0 / (k as f64).sqrt());
    for _ in 0..POWER_MAX_ITERS {
        let mut next = gram.dot(&w);
        let next_norm = norm(&next);
        if next_norm < ZERO_NORM {
            return Array1::zeros(n);
        }
        next /= next_norm;
        let delta = (&next - &w).mapv(f64::abs).sum();
        w = next;
        if delta < POWER_TOL {
            break;
        }
    }

    // Lift back to variable space: c = sum_a w_a * deflated_row_a.
    let mut c = Array1::<f64>::zeros(n);
    for (a, row) in deflated.rows().into_iter().enumerate() {
        c.scaled_add(w[a], &row);
    }
    if let Some(unit) = &p_unit {
        deflate(&mut c, unit);
    }
    let c_norm = norm(&c);
    if c_norm < ZERO_NORM {
        return Array1::zeros(n);
    }
    c /= c_norm;

    // Align with the summed descent vector of the deflated differences.
    let mut sign_dot = 0.0;
    for row in deflated.rows() {
        sign_dot += c.dot(&row);
    }
    if sign_dot < 0.0 {
        c.mapv_inplace(|v| -v);
    }
    c
}

/// Estimate the anisotropic direction from the current population.
///
/// Draws `worst_sample_count` distinct individuals among the ranked
/// non-best rows, forms the difference vectors "best minus sampled", and
/// extracts their dominant direction orthogonal to `p` (see
/// [`dominant_direction`]). The fresh estimate is blended as
/// `c_ani = 0.1 * fresh + 0.9 * prev_c`, and the projections of all
/// non-best individuals onto the blended direction give `mu_ani` and
/// `sigma_ani` (divisor `lambda - 1`).
pub fn estimate_anisotropic(
    x: &Array2<f64>,
    ix: &[usize],
    p: &Array1<f64>,
    prev_c: &Array1<f64>,
    worst_sample_count: usize,
    rng: &mut ChaCha8Rng,
) -> AnisotropicEstimate {
    let lambda = x.nrows();
    let n = x.ncols();
    assert!(lambda >= worst_sample_count + 1, "population too small");
    assert_eq!(ix.len(), lambda);

    let best = x.row(ix[0]);
    let picks = rand::seq::index::sample(rng, lambda - 1, worst_sample_count);
    let mut diffs = Array2::<f64>::zeros((worst_sample_count, n));
    for (slot, pick) in picks.iter().enumerate() {
        let worse = x.row(ix[1 + pick]);
        let mut row = diffs.row_mut(slot);
        for ((d, &b), &w) in row.iter_mut().zip(best.iter()).zip(worse.iter()) {
            *d = b - w;
        }
    }

    let fresh = dominant_direction(diffs, p);
    let mut c_ani = prev_c * 0.9;
    c_ani.scaled_add(0.1, &fresh);

    let c_norm = norm(&c_ani);
    let (mu_ani, sigma_ani) = if c_norm > ZERO_NORM {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &r in &ix[1..] {
            let row = x.row(r);
            let mut proj = 0.0;
            for ((&v, &b), &c) in row.iter().zip(best.iter()).zip(c_ani.iter()) {
                proj += (v - b) * c;
            }
            proj /= c_norm;
            sum += proj;
            sum_sq += proj * proj;
        }
        let count = (lambda - 1) as f64;
        let mean = sum / count;
        let variance = (sum_sq / count - mean * mean).max(0.0);
        (mean, variance.sqrt())
    } else {
        (0.0, 0.0)
    };

    AnisotropicEstimate {
        c_ani,
        mu_ani,
        sigma_ani,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    // ----- update_p ----------------------------------------------------------

    #[test]
    fn no_movement_keeps_p_at_zero() {
        let zero = Array1::zeros(3);
        let best = Array1::from_vec(vec![1.0, 2.0, 3.0]);
        let p = update_p(&zero, &best, &best);
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_takes_a_tenth_of_the_displacement() {
        let prev = Array1::zeros(2);
        let best = Array1::from_vec(vec![10.0, 0.0]);
        let before = Array1::zeros(2);
        assert_eq!(update_p(&prev, &best, &before).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn blend_mixes_history_and_latest_move() {
        let prev = Array1::from_vec(vec![1.0, 0.0]);
        let best = Array1::from_vec(vec![0.0, 10.0]);
        let before = Array1::zeros(2);
        let p = update_p(&prev, &best, &before);
        assert_abs_diff_eq!(p[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-15);
    }

    // ----- dominant_direction --------------------------------------------

    /// Dense-SVD oracle: top left-singular vector of the transposed
    /// difference matrix after deflating against `p`.
    fn svd_oracle(diffs: &Array2<f64>, p: &Array1<f64>) -> Option<(Array1<f64>, f64)> {
        let (k, n) = (diffs.nrows(), diffs.ncols());
        let mut deflated = diffs.to_owned();
        let p_norm = p.dot(p).sqrt();
        if p_norm > 0.0 {
            let unit = p / p_norm;
            for mut row in deflated.rows_mut() {
                let coeff = row.dot(&unit);
                row.scaled_add(-coeff, &unit);
            }
        }
        // Columns of the n x k matrix are the difference vectors.
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, k);
        for a in 0..k {
            for i in 0..n {
                m[(i, a)] = deflated[[a, i]];
            }
        }
        let svd = m.svd(true, false);
        let u = svd.u.as_ref()?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap()
        });
        let top = order[0];
        let gap = if order.len() > 1 {
            (svd.singular_values[order[0]] - svd.singular_values[order[1]])
                / svd.singular_values[order[0]].max(f64::MIN_POSITIVE)
        } else {
            1.0
        };
        let direction = Array1::from_iter((0..n).map(|i| u[(i, top)]));
        Some((direction, gap))
    }

    fn unit_distance_up_to_sign(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        let plus: f64 = (a - b).mapv(|v| v * v).sum().sqrt();
        let minus: f64 = (a + b).mapv(|v| v * v).sum().sqrt();
        plus.min(minus)
    }

    #[test]
    fn zero_differences_give_zero_direction() {
        let diffs = Array2::zeros((4, 6));
        let c = dominant_direction(diffs, &Array1::zeros(6));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_nonzero_difference_is_normalized_through() {
        let mut diffs = Array2::zeros((3, 4));
        diffs.row_mut(0).assign(&Array1::from_vec(vec![3.0, 0.0, 4.0, 0.0]));
        let c = dominant_direction(diffs.clone(), &Array1::zeros(4));
        assert_abs_diff_eq!(c[0], 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(c[2], 0.8, epsilon = 1e-10);
        // Sign matches the difference vector itself.
        assert!(c.dot(&diffs.row(0)) > 0.0);
    }

    #[test]
    fn fresh_estimate_is_orthogonal_to_p() {
        let mut r = rng(31);
        for _ in 0..50 {
            let diffs = Array2::from_shape_fn((4, 30), |_| r.gen_range(-2.0..2.0));
            let p = Array1::from_shape_fn(30, |_| r.gen_range(-1.0..1.0));
            let c = dominant_direction(diffs.clone(), &p);
            let c_norm = c.dot(&c).sqrt();
            if c_norm == 0.0 {
                continue;
            }
            let p_norm = p.dot(&p).sqrt();
            assert!(
                c.dot(&p).abs() <= 1e-8 * c_norm * p_norm,
                "fresh estimate not orthogonal to p"
            );
        }
    }

    #[test]
    fn matches_dense_svd_oracle() {
        let mut r = rng(67);
        let mut checked = 0;
        while checked < 30 {
            let diffs = Array2::from_shape_fn((4, 50), |_| r.gen_range(-1.0..1.0));
            let p = Array1::from_shape_fn(50, |_| r.gen_range(-1.0..1.0));
            let (oracle, gap) = svd_oracle(&diffs, &p).unwrap();
            if gap < 0.01 {
                continue; // oracle direction ill-conditioned, skip draw
            }
            let c = dominant_direction(diffs.clone(), &p);
            let distance = unit_distance_up_to_sign(&c, &oracle);
            assert!(
                distance < 1e-6,
                "direction deviates from SVD oracle by {distance} (gap {gap})"
            );
            checked += 1;
        }
    }

    #[test]
    fn direction_is_scale_equivariant() {
        let mut r = rng(5);
        let diffs = Array2::from_shape_fn((4, 20), |_| r.gen_range(-1.0..1.0));
        let p = Array1::from_shape_fn(20, |_| r.gen_range(-1.0..1.0));
        let base = dominant_direction(diffs.clone(), &p);
        let scaled = dominant_direction(&diffs * 7.5, &p);
        for (a, b) in base.iter().zip(scaled.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    // ----- estimate_anisotropic -------------------------------------------

    #[test]
    fn degenerate_population_decays_previous_direction() {
        let x = Array2::from_elem((6, 4), 2.5);
        let ix: Vec<usize> = (0..6).collect();
        let p = Array1::zeros(4);
        let prev = Array1::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let estimate = estimate_anisotropic(&x, &ix, &p, &prev, 4, &mut rng(3));
        assert_abs_diff_eq!(estimate.c_ani[0], 0.9, epsilon = 1e-15);
        assert!(estimate.c_ani.iter().skip(1).all(|&v| v == 0.0));
        assert_eq!(estimate.mu_ani, 0.0);
        assert_eq!(estimate.sigma_ani, 0.0);
    }

    #[test]
    fn projections_measure_spread_along_the_direction() {
        // Best at the origin, worse individuals at 1, 2, 3, 4 along e1.
        let mut x = Array2::zeros((5, 3));
        for i in 1..5 {
            x[[i, 0]] = i as f64;
        }
        let ix: Vec<usize> = (0..5).collect();
        let p = Array1::zeros(3);
        let prev = Array1::zeros(3);
        let estimate = estimate_anisotropic(&x, &ix, &p, &prev, 1, &mut rng(17));
        // The estimated direction points from the worse points toward the
        // best, i.e. along -e1; projections of worse-minus-best flip sign.
        assert_abs_diff_eq!(estimate.c_ani[0], -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(estimate.mu_ani, -2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(estimate.sigma_ani, 1.118033988749895, epsilon = 1e-12);
    }

    #[test]
    fn estimates_are_deterministic_given_the_rng() {
        let mut r = rng(10);
        let x = Array2::from_shape_fn((8, 12), |_| r.gen_range(-1.0..1.0));
        let f: Vec<f64> = (0..8).map(|_| r.gen_range(0.0..1.0)).collect();
        let (ix, _) = crate::optimizer::selection(&f, 2).unwrap();
        let p = Array1::from_shape_fn(12, |_| r.gen_range(-0.1..0.1));
        let prev = Array1::zeros(12);
        let a = estimate_anisotropic(&x, &ix, &p, &prev, 4, &mut rng(55));
        let b = estimate_anisotropic(&x, &ix, &p, &prev, 4, &mut rng(55));
        assert_eq!(a.c_ani, b.c_ani);
        assert_eq!(a.mu_ani, b.mu_ani);
        assert_eq!(a.sigma_ani, b.sigma_ani);
    }
}
