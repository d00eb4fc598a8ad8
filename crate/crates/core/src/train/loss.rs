//! Weighted squared hinge loss over raw scores and ±1 targets.

use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Loss value plus its gradient with respect to the scores.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub grad: Tensor2,
}

/// `mean(w(y) * max(0, 1 - y*s)^2)` with `w(+1) = w_pos`, `w(-1) = 1`.
pub fn weighted_squared_hinge(scores: &Tensor2, targets: &Tensor2, w_pos: f64) -> Result<LossValue> {
    if scores.rows != targets.rows || scores.cols != targets.cols {
        return Err(Error::InvalidInput(format!(
            "scores are {}x{} but targets are {}x{}",
            scores.rows, scores.cols, targets.rows, targets.cols
        )));
    }
    if !(w_pos > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "positive-class weight must be positive, got {w_pos}"
        )));
    }
    let m = scores.data.len();
    if m == 0 {
        return Err(Error::InvalidInput("empty loss input".into()));
    }

    let mut grad = Tensor2::zeros(scores.rows, scores.cols);
    let mut sum = 0.0;
    for i in 0..m {
        let y = targets.data[i];
        if y != 1.0 && y != -1.0 {
            return Err(Error::InvalidInput(format!(
                "target {y} at flat index {i} is not in {{-1, +1}}"
            )));
        }
        let w = if y > 0.0 { w_pos } else { 1.0 };
        let margin = 1.0 - y * scores.data[i];
        if margin > 0.0 {
            sum += w * margin * margin;
            grad.data[i] = -2.0 * w * margin * y / m as f64;
        }
    }
    Ok(LossValue { value: sum / m as f64, grad })
}

/// Inverse-frequency weight for the positive class: negatives over
/// positives.
pub fn inverse_class_weight(labels: &[bool]) -> Result<f64> {
    let pos = labels.iter().filter(|&&b| b).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot balance classes with {pos} positive and {neg} negative labels"
        )));
    }
    Ok(neg as f64 / pos as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: usize, cols: usize, data: Vec<f64>) -> Tensor2 {
        Tensor2::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn hand_cases() {
        // At the margin: no loss.
        let l = weighted_squared_hinge(&t2(1, 1, vec![1.0]), &t2(1, 1, vec![1.0]), 1.0).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.grad.data, vec![0.0]);

        // Score 0 on a positive: squared unit margin.
        let l = weighted_squared_hinge(&t2(1, 1, vec![0.0]), &t2(1, 1, vec![1.0]), 1.0).unwrap();
        assert_eq!(l.value, 1.0);

        // Weighted miss: 3 * (1 - (-1))^2 = 12.
        let l = weighted_squared_hinge(&t2(1, 1, vec![-1.0]), &t2(1, 1, vec![1.0]), 3.0).unwrap();
        assert_eq!(l.value, 12.0);

        // Negative class carries weight 1 regardless of w_pos.
        let l = weighted_squared_hinge(&t2(1, 1, vec![1.0]), &t2(1, 1, vec![-1.0]), 3.0).unwrap();
        assert_eq!(l.value, 4.0);
    }

    #[test]
    fn zero_iff_all_scores_beyond_margin() {
        let scores = t2(2, 2, vec![1.0, 2.5, -1.0, -3.0]);
        let targets = t2(2, 2, vec![1.0, 1.0, -1.0, -1.0]);
        let l = weighted_squared_hinge(&scores, &targets, 2.0).unwrap();
        assert_eq!(l.value, 0.0);

        // One score inside the margin makes it positive.
        let scores = t2(2, 2, vec![1.0, 0.99, -1.0, -3.0]);
        let l = weighted_squared_hinge(&scores, &targets, 2.0).unwrap();
        assert!(l.value > 0.0);
    }

    #[test]
    fn rejects_bad_targets_and_shapes() {
        assert!(weighted_squared_hinge(&t2(1, 1, vec![0.0]), &t2(1, 1, vec![0.5]), 1.0).is_err());
        assert!(weighted_squared_hinge(&t2(1, 1, vec![0.0]), &t2(1, 1, vec![0.0]), 1.0).is_err());
        assert!(weighted_squared_hinge(&t2(1, 2, vec![0.0, 0.0]), &t2(2, 1, vec![1.0, 1.0]), 1.0).is_err());
        assert!(weighted_squared_hinge(&t2(1, 1, vec![0.0]), &t2(1, 1, vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences_in_smooth_region() {
        // Margins kept away from the max(0, .) kink so the loss is smooth.
        let scores = vec![0.4, -0.2, 0.7, -1.6, 2.3, 0.1];
        let targets = vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let w_pos = 2.5;
        let base = t2(2, 3, scores.clone());
        let t = t2(2, 3, targets);
        let l = weighted_squared_hinge(&base, &t, w_pos).unwrap();

        let eps = 1e-6;
        for i in 0..scores.len() {
            let mut plus = base.clone();
            plus.data[i] += eps;
            let mut minus = base.clone();
            minus.data[i] -= eps;
            let lp = weighted_squared_hinge(&plus, &t, w_pos).unwrap().value;
            let lm = weighted_squared_hinge(&minus, &t, w_pos).unwrap().value;
            let fd = (lp - lm) / (2.0 * eps);
            let g = l.grad.data[i];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
            assert!(rel <= 1e-6, "index {i}: analytic {g} vs fd {fd}");
        }
    }

    #[test]
    fn class_weight_is_inverse_frequency() {
        let labels: Vec<bool> = (0..100).map(|i| i % 10 == 0).collect();
        assert_eq!(inverse_class_weight(&labels).unwrap(), 9.0);
        assert!(inverse_class_weight(&[true, true]).is_err());
        assert!(inverse_class_weight(&[false]).is_err());
        assert!(inverse_class_weight(&[]).is_err());
    }
}
