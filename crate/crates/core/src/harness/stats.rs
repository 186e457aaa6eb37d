use serde::{Deserialize, Serialize};

/// Mean and population standard deviation over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

impl Stat {
    /// Welford's running update; empty input gives zeros.
    pub fn from_values(values: &[f64]) -> Self {
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for &x in values {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        let std = if n > 0.0 { (m2 / n).max(0.0).sqrt() } else { 0.0 };
        Self {
            mean,
            std,
            per_seed: values.to_vec(),
        }
    }
}
