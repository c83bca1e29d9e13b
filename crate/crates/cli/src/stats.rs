//! Binomial confidence limits.

use statrs::distribution::{Beta, ContinuousCDF};

/// One-sided Clopper–Pearson upper limit for `successes` out of `trials`.
pub fn clopper_pearson_upper(successes: usize, trials: usize, confidence: f64) -> f64 {
    assert!(
        trials > 0 && successes <= trials,
        "need 0 <= successes <= trials, trials > 0"
    );
    if successes == trials {
        return 1.0;
    }
    let beta = Beta::new(successes as f64 + 1.0, (trials - successes) as f64).expect("positive shapes");
    beta.inverse_cdf(confidence).clamp(0.0, 1.0)
}
