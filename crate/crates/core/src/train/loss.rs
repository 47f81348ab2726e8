//! Loss terms. All means are plain sequential sums divided by counts so a
//! fixed input ordering reproduces bit for bit.

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

/// Batch-mean loss components. `ce`, `kl`, `reg`, `fcrc` are unweighted;
/// `total` is their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub ce: T,
    pub kl: T,
    pub reg: T,
    pub fcrc: T,
    pub total: T,
}

/// Negative log-likelihood of the target period.
pub fn ce_term<T: Scalar>(log_probs: &[T], target: usize) -> Result<T> {
    if target >= log_probs.len() {
        return Err(Error::ShapeMismatch {
            context: "class target".into(),
            expected: format!("< {}", log_probs.len()),
            got: format!("{target}"),
        });
    }
    Ok(-log_probs[target])
}

/// Log of the soft target distribution: mass decays exponentially with the
/// distance from the true year to each period midpoint, scale `sigma` years.
pub fn soft_target_log<T: Scalar>(midpoints: &[T], year: T, sigma: T) -> Vec<T> {
    let raw: Vec<T> = midpoints
        .iter()
        .map(|b| -(*b - year).abs() / sigma)
        .collect();
    let max = raw.iter().cloned().fold(T::neg_infinity(), T::max);
    let sum = crate::scalar::seq_sum(raw.iter().map(|r| (*r - max).exp()));
    let log_z = max + sum.ln();
    raw.iter().map(|r| *r - log_z).collect()
}

/// The soft target distribution itself.
pub fn soft_target<T: Scalar>(midpoints: &[T], year: T, sigma: T) -> Vec<T> {
    soft_target_log(midpoints, year, sigma)
        .iter()
        .map(|l| l.exp())
        .collect()
}

/// Divergence of the predicted distribution from the soft target,
/// `sum q * (log q - log p)`.
pub fn kl_term<T: Scalar>(log_probs: &[T], midpoints: &[T], year: T, sigma: T) -> Result<T> {
    if log_probs.len() != midpoints.len() {
        return Err(Error::LengthMismatch {
            context: "soft target vs logits".into(),
            left: midpoints.len(),
            right: log_probs.len(),
        });
    }
    let log_q = soft_target_log(midpoints, year, sigma);
    Ok(crate::scalar::seq_sum(
        log_q
            .iter()
            .zip(log_probs)
            .map(|(lq, lp)| lq.exp() * (*lq - *lp)),
    ))
}

/// Absolute year error in centuries.
pub fn reg_term<T: Scalar>(year_hat: T, year: T) -> T {
    (year_hat - year).abs() / T::from_f64_lossy(100.0)
}

/// Year-distance weights over a batch for one anchor row. Weight on each
/// negative is proportional to its label distance from the anchor; the row
/// sums to one over the negatives and carries an exact zero at the anchor
/// slot. All-equal labels fall back to uniform weights.
pub fn lambda_weights<T: Scalar>(years: &[T], anchor: usize, beta: T) -> Result<Vec<T>> {
    let m = years.len();
    if anchor >= m {
        return Err(Error::ShapeMismatch {
            context: "lambda anchor".into(),
            expected: format!("< {m}"),
            got: format!("{anchor}"),
        });
    }
    let mut row = vec![T::zero(); m];
    if m < 2 {
        return Ok(row);
    }
    let dist: Vec<T> = years
        .iter()
        .map(|y| beta * (*y - years[anchor]).abs())
        .collect();
    let total = crate::scalar::seq_sum(
        dist.iter()
            .enumerate()
            .filter(|(j, _)| *j != anchor)
            .map(|(_, d)| *d),
    );
    if total == T::zero() {
        let uniform = T::one() / T::from_f64_lossy((m - 1) as f64);
        for (j, slot) in row.iter_mut().enumerate() {
            if j != anchor {
                *slot = uniform;
            }
        }
    } else {
        for (j, slot) in row.iter_mut().enumerate() {
            if j != anchor {
                *slot = dist[j] / total;
            }
        }
    }
    Ok(row)
}

/// Contrastive loss for one anchor given its cosine row against the batch's
/// target-style anchors. `cos_row[j]` is the cosine between embedding `i`
/// and the style anchor of sample `j`'s true period. Exponentials are
/// max-shifted; the shift cancels in the ratio.
pub fn fcrc_anchor_loss<T: Scalar>(cos_row: &[T], lambda_row: &[T], anchor: usize, tau: T) -> T {
    let m = cos_row.len();
    if m < 2 {
        return T::zero();
    }
    let shift = cos_row.iter().cloned().fold(T::neg_infinity(), T::max) / tau;
    let f_ii = (cos_row[anchor] / tau - shift).exp();
    let mut denom = f_ii;
    for j in 0..m {
        if j != anchor {
            denom += lambda_row[j] * (cos_row[j] / tau - shift).exp();
        }
    }
    -(f_ii / denom).ln()
}

/// Batch-mean contrastive loss from the full cosine matrix.
/// `cos[i][j] = cos(z_i, style_anchor_of(target_j))`.
pub fn fcrc_loss<T: Scalar>(cos: &[Vec<T>], years: &[T], tau: T, beta: T) -> Result<T> {
    let m = years.len();
    if cos.len() != m {
        return Err(Error::LengthMismatch {
            context: "contrastive cosine matrix".into(),
            left: cos.len(),
            right: m,
        });
    }
    if m == 0 {
        return Err(Error::Empty {
            context: "contrastive batch".into(),
        });
    }
    let mut acc = T::zero();
    for i in 0..m {
        if cos[i].len() != m {
            return Err(Error::LengthMismatch {
                context: "contrastive cosine row".into(),
                left: cos[i].len(),
                right: m,
            });
        }
        let lambda = lambda_weights(years, i, beta)?;
        acc += fcrc_anchor_loss(&cos[i], &lambda, i, tau);
    }
    Ok(acc / T::from_f64_lossy(m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ce_is_negative_target_log_prob() {
        let lp = [-0.1_f64, -2.3, -4.0];
        assert_eq!(ce_term(&lp, 1).unwrap(), 2.3);
        assert!(ce_term(&lp, 3).is_err());
    }

    #[test]
    fn soft_target_sums_to_one_and_peaks_at_nearest_midpoint() {
        let mids = [975.0_f64, 1275.0, 1500.0, 1675.0, 1800.0, 1900.0, 1987.0];
        let q = soft_target(&mids, 1910.0, 50.0);
        let sum: f64 = q.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let argmax = q
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 5);
        // Exact ratio: q5/q6 = exp((|1987-1910| - |1900-1910|)/50).
        assert!((q[5] / q[6] - ((77.0 - 10.0) / 50.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kl_vanishes_when_prediction_equals_soft_target() {
        let mids = [975.0_f64, 1275.0, 1500.0, 1675.0, 1800.0, 1900.0, 1987.0];
        let log_q = soft_target_log(&mids, 1620.0, 50.0);
        let kl = kl_term(&log_q, &mids, 1620.0, 50.0).unwrap();
        assert!(kl.abs() < 1e-14);
        // And is positive for a different prediction.
        let uniform = [(1.0_f64 / 7.0).ln(); 7];
        assert!(kl_term(&uniform, &mids, 1620.0, 50.0).unwrap() > 0.0);
    }

    #[test]
    fn reg_is_absolute_error_in_centuries() {
        assert_eq!(reg_term(1950.0_f64, 1900.0), 0.5);
        assert_eq!(reg_term(1900.0_f64, 1950.0), 0.5);
        assert_eq!(reg_term(1900.0_f64, 1900.0), 0.0);
    }

    #[test]
    fn lambda_rows_match_hand_values() {
        // Distances from anchor 0: 10 and 30.
        let row = lambda_weights(&[1900.0_f64, 1910.0, 1930.0], 0, 1.0).unwrap();
        assert_eq!(row[0], 0.0);
        assert!((row[1] - 0.25).abs() < 1e-15);
        assert!((row[2] - 0.75).abs() < 1e-15);
        // Two samples: the single negative takes all the weight.
        let row = lambda_weights(&[1900.0_f64, 1800.0], 0, 2.5).unwrap();
        assert_eq!(row, vec![0.0, 1.0]);
        // Identical years: uniform fallback.
        let row = lambda_weights(&[1900.0_f64, 1900.0, 1900.0], 1, 1.0).unwrap();
        assert_eq!(row[1], 0.0);
        assert!((row[0] - 0.5).abs() < 1e-15);
        assert!((row[2] - 0.5).abs() < 1e-15);
        // Scale cancels.
        let a = lambda_weights(&[1.0_f64, 2.0, 5.0], 0, 1.0).unwrap();
        let b = lambda_weights(&[1.0_f64, 2.0, 5.0], 0, 3.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_rows_sum_to_one_over_negatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let m = rng.random_range(2..9);
            let years: Vec<f64> = (0..m).map(|_| rng.random_range(800.0..2024.0)).collect();
            for i in 0..m {
                let row = lambda_weights(&years, i, 1.0).unwrap();
                assert_eq!(row[i], 0.0);
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_sample_contrastive_loss_is_exactly_zero() {
        let loss = fcrc_loss(&[vec![0.73_f64]], &[1900.0], 0.07, 1.0).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn two_identical_samples_at_unit_temperature_give_ln_two() {
        // Same label means the positive and the lone negative use the same
        // anchor, so each ratio is exactly one half.
        let c = 0.42_f64;
        let cos = vec![vec![c, c], vec![c, c]];
        let loss = fcrc_loss(&cos, &[1500.0, 1500.0], 1.0, 1.0).unwrap();
        assert_eq!(loss, (2.0_f64).ln());
    }

    #[test]
    fn contrastive_loss_matches_direct_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let m = rng.random_range(1..9);
            let years: Vec<f64> = (0..m).map(|_| rng.random_range(800.0..2024.0)).collect();
            let cos: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let tau = rng.random_range(0.05..1.0);
            let got = fcrc_loss(&cos, &years, tau, 1.0).unwrap();
            // Unshifted textbook form, fully independent code path.
            let mut want = 0.0;
            for i in 0..m {
                let f = |j: usize| (cos[i][j] / tau).exp();
                let mut denom = f(i);
                let total: f64 = (0..m)
                    .filter(|j| *j != i)
                    .map(|j| (years[j] - years[i]).abs())
                    .sum();
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let lam = if m < 2 {
                        0.0
                    } else if total == 0.0 {
                        1.0 / (m as f64 - 1.0)
                    } else {
                        (years[j] - years[i]).abs() / total
                    };
                    denom += lam * f(j);
                }
                want += -(f(i) / denom).ln();
            }
            want /= m as f64;
            assert!(
                (got - want).abs() <= 1e-12,
                "m={m} tau={tau} got={got} want={want}"
            );
        }
    }

    #[test]
    fn contrastive_loss_rejects_ragged_input() {
        assert!(fcrc_loss(&[vec![1.0_f64]], &[1.0, 2.0], 0.1, 1.0).is_err());
        let ragged = vec![vec![1.0_f64, 0.0], vec![0.0]];
        assert!(fcrc_loss(&ragged, &[1.0, 2.0], 0.1, 1.0).is_err());
    }
}
