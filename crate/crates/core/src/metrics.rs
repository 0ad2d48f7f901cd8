//! Evaluation metrics and summary statistics.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    if predictions.len() != truth.len() {
        return Err(MetricError::Length(predictions.len(), truth.len()));
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    let sse: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Fraction of labels matched by thresholding probabilities; a probability
/// equal to the threshold is classified as positive.
pub fn classification_accuracy(
    probabilities: &[f64],
    labels: &[f64],
    threshold: f64,
) -> Result<f64, MetricError> {
    if probabilities.len() != labels.len() {
        return Err(MetricError::Length(probabilities.len(), labels.len()));
    }
    if probabilities.is_empty() {
        return Err(MetricError::Empty);
    }
    let correct = probabilities
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= threshold) == (y >= 0.5))
        .count();
    Ok(correct as f64 / probabilities.len() as f64)
}

/// Sample mean and sample standard deviation (n − 1 denominator; 0 for a
/// single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - (12.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&[], &[]), Err(MetricError::Empty));
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn accuracy_boundary_rule() {
        assert_eq!(
            classification_accuracy(&[1.0, 0.0, 0.9], &[1.0, 0.0, 1.0], 0.5).unwrap(),
            1.0
        );
        let acc = classification_accuracy(&[0.5; 4], &[1.0, 0.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(acc, 0.75);
        assert!(classification_accuracy(&[], &[], 0.5).is_err());
    }

    #[test]
    fn mean_std_matches_two_pass() {
        let v = [1.0, 2.0, 4.0, 7.0];
        let (m, s) = mean_std(&v);
        assert!((m - 3.5).abs() < 1e-15);
        let var = ((2.5f64).powi(2) + 1.5f64.powi(2) + 0.25 + 3.5f64.powi(2)) / 3.0;
        assert!((s - var.sqrt()).abs() < 1e-14);
        assert_eq!(mean_std(&[2.0, 2.0]).1, 0.0);
    }
}
