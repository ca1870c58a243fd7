use super::DetectionResult;
use crate::error::{Error, Result};
use crate::so3::RotationMatrix;

/// One scored epoch: the detector output, the truth contamination labels and
/// the true attitude.
#[derive(Debug, Clone)]
pub struct ScoredEpoch<'a> {
    pub result: &'a DetectionResult,
    pub truth: &'a [bool],
    pub attitude: &'a RotationMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkMetrics {
    /// Fraction of epochs with every satellite classified correctly.
    pub success_rate: f64,
    /// Contaminated observations labeled clean over all contaminated ones.
    pub false_negative_rate: f64,
    /// Clean observations labeled contaminated over all clean ones.
    pub false_positive_rate: f64,
    /// Wrong flags over all flags.
    pub misclassification_rate: f64,
    /// Mean angle between estimated and true body axes, degrees.
    pub baseline_mae_deg: f64,
    pub epochs: usize,
    /// No contaminated observation was scored, so the false-negative rate is
    /// reported as 0.
    pub no_contaminated: bool,
    /// Likewise for clean observations and the false-positive rate.
    pub no_clean: bool,
}

/// Average angle (degrees) between the estimated and true x and y body axes.
pub fn baseline_error_deg(estimate: &RotationMatrix, truth: &RotationMatrix) -> f64 {
    let angle = |a: nalgebra::Vector3<f64>, b: nalgebra::Vector3<f64>| a.cross(&b).norm().atan2(a.dot(&b));
    let ex = angle(estimate.column(0), truth.column(0));
    let ey = angle(estimate.column(1), truth.column(1));
    0.5 * (ex + ey).to_degrees()
}

pub fn score_detection(epochs: &[ScoredEpoch<'_>]) -> Result<BenchmarkMetrics> {
    if epochs.is_empty() {
        return Err(Error::EmptyStream("no detection results to score".into()));
    }
    let (mut success, mut tp, mut fn_, mut fp, mut tn) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut mae = 0.0;
    for e in epochs {
        if e.result.flags.len() != e.truth.len() {
            return Err(Error::Schema(format!(
                "{} flags for {} truth labels",
                e.result.flags.len(),
                e.truth.len()
            )));
        }
        let mut all_right = true;
        for (&flag, &dirty) in e.result.flags.iter().zip(e.truth) {
            match (dirty, flag) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
            all_right &= flag == dirty;
        }
        success += all_right as usize;
        mae += baseline_error_deg(&e.result.rotation, e.attitude);
    }
    let n = epochs.len() as f64;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(BenchmarkMetrics {
        success_rate: success as f64 / n,
        false_negative_rate: ratio(fn_, tp + fn_),
        false_positive_rate: ratio(fp, fp + tn),
        misclassification_rate: ratio(fn_ + fp, tp + fn_ + fp + tn),
        baseline_mae_deg: mae / n,
        epochs: epochs.len(),
        no_contaminated: tp + fn_ == 0,
        no_clean: fp + tn == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(flags: &[bool]) -> DetectionResult {
        let set = flags.iter().enumerate().filter(|(_, f)| !**f).map(|(i, _)| i).collect();
        DetectionResult::from_set(flags.len(), set, RotationMatrix::identity(), 0.0)
    }

    #[test]
    fn perfect_stream() {
        let truth = [vec![false, true, false], vec![false, false, false]];
        let res: Vec<_> = truth.iter().map(|t| result(t)).collect();
        let id = RotationMatrix::identity();
        let scored: Vec<_> = res.iter().zip(&truth).map(|(r, t)| ScoredEpoch { result: r, truth: t, attitude: &id }).collect();
        let m = score_detection(&scored).unwrap();
        assert_eq!(m.success_rate, 1.0);
        assert_eq!(m.false_negative_rate, 0.0);
        assert_eq!(m.false_positive_rate, 0.0);
        assert_eq!(m.baseline_mae_deg, 0.0);
        assert!(!m.no_contaminated);
    }

    #[test]
    fn flag_everything() {
        let truth = vec![false, true, false, true];
        let r = result(&[true; 4]);
        let id = RotationMatrix::identity();
        let m = score_detection(&[ScoredEpoch { result: &r, truth: &truth, attitude: &id }]).unwrap();
        assert_eq!(m.false_positive_rate, 1.0);
        assert_eq!(m.false_negative_rate, 0.0);
        assert_eq!(m.misclassification_rate, 0.5);
        assert_eq!(m.success_rate, 0.0);
    }

    #[test]
    fn hand_counted_stream() {
        // epoch 1: tp, fn, tn, tn   epoch 2: fp, tn, tp   epoch 3: tn, tn
        let truth = [vec![true, true, false, false], vec![false, false, true], vec![false, false]];
        let flags = [vec![true, false, false, false], vec![true, false, true], vec![false, false]];
        let res: Vec<_> = flags.iter().map(|f| result(f)).collect();
        let id = RotationMatrix::identity();
        let scored: Vec<_> = res.iter().zip(&truth).map(|(r, t)| ScoredEpoch { result: r, truth: t, attitude: &id }).collect();
        let m = score_detection(&scored).unwrap();
        assert!((m.success_rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.false_negative_rate, 1.0 / 3.0);
        assert_eq!(m.false_positive_rate, 1.0 / 6.0);
        assert_eq!(m.misclassification_rate, 2.0 / 9.0);
    }

    #[test]
    fn no_contaminated_flag_and_empty() {
        let truth = vec![false; 3];
        let r = result(&truth);
        let id = RotationMatrix::identity();
        let m = score_detection(&[ScoredEpoch { result: &r, truth: &truth, attitude: &id }]).unwrap();
        assert!(m.no_contaminated);
        assert_eq!(m.false_negative_rate, 0.0);
        assert!(score_detection(&[]).is_err());
    }

    #[test]
    fn baseline_error_of_yaw_offset() {
        let e = baseline_error_deg(&RotationMatrix::rz(2f64.to_radians()), &RotationMatrix::identity());
        assert!((e - 2.0).abs() < 1e-9);
        let roll = baseline_error_deg(&RotationMatrix::rx(3f64.to_radians()), &RotationMatrix::identity());
        // roll leaves the x axis alone
        assert!((roll - 1.5).abs() < 1e-9);
    }
}
