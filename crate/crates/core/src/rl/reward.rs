use super::RewardMeanForm;

/// `acc_t` minus the windowed baseline of the last `b` accuracies.
///
/// With a full window, the baseline is `Σ/(b−1)` (as printed) or `Σ/b`
/// (true mean). While fewer than `b` accuracies exist, the baseline is the
/// mean of whatever history exists, and `0` for an empty history.
pub fn reward_measure(history: &[f64], acc_t: f64, b: usize, form: RewardMeanForm) -> f64 {
    if history.is_empty() {
        return acc_t;
    }
    if history.len() < b {
        let mean = history.iter().sum::<f64>() / history.len() as f64;
        return acc_t - mean;
    }
    let sum: f64 = history[history.len() - b..].iter().sum();
    let denom = match form {
        RewardMeanForm::AsPrinted => (b - 1) as f64,
        RewardMeanForm::TrueMean => b as f64,
    };
    acc_t - sum / denom
}

/// `+1` when the measure improved strictly, `−1` otherwise.
pub fn binary_reward(r_t: f64, r_prev: f64) -> f64 {
    if r_t > r_prev {
        1.0
    } else {
        -1.0
    }
}
