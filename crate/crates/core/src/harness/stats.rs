//! Randomness battery over a stream of coins.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::public::RandomCoin;

pub const MIN_COINS: usize = 64;
pub const DEFAULT_ALPHA: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatError {
    #[error("need at least {MIN_COINS} coins, got {0}")]
    TooFewCoins(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTest {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub alpha: f64,
    pub octets: usize,
    pub tests: Vec<StatTest>,
}

impl StatReport {
    pub fn passed(&self) -> bool {
        self.tests.iter().all(|t| t.passed)
    }

    pub fn get(&self, name: &str) -> Option<&StatTest> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// One `name statistic p_value PASS|FAIL` record per test.
    pub fn to_lines(&self) -> String {
        self.tests
            .iter()
            .map(|t| {
                format!(
                    "{:<18} stat={:<12.6} p={:<10.6} {}\n",
                    t.name,
                    t.statistic,
                    t.p_value,
                    if t.passed { "PASS" } else { "FAIL" }
                )
            })
            .collect()
    }
}

/// Frequency test over individual bits.
pub fn monobit(bytes: &[u8]) -> (f64, f64) {
    let n = (bytes.len() * 8) as f64;
    let ones: u32 = bytes.iter().map(|b| b.count_ones()).sum();
    let s = 2.0 * ones as f64 - n;
    let s_obs = s.abs() / n.sqrt();
    (s_obs, erfc(s_obs / std::f64::consts::SQRT_2))
}

/// Pearson chi-square of byte frequencies, 255 degrees of freedom.
pub fn byte_chi_square(bytes: &[u8]) -> (f64, f64) {
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    let expected = bytes.len() as f64 / 256.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new(255.0).expect("positive df");
    (chi2, dist.sf(chi2))
}

/// Lag-1 autocorrelation of octet values; under independence
/// `r * sqrt(n)` is approximately standard normal.
pub fn serial_correlation(bytes: &[u8]) -> (f64, f64) {
    let n = bytes.len() as f64;
    let mean = bytes.iter().map(|&b| b as f64).sum::<f64>() / n;
    let var: f64 = bytes.iter().map(|&b| (b as f64 - mean).powi(2)).sum();
    if var == 0.0 {
        return (1.0, 0.0);
    }
    let cov: f64 = bytes
        .windows(2)
        .map(|w| (w[0] as f64 - mean) * (w[1] as f64 - mean))
        .sum();
    let r = cov / var;
    let z = r * n.sqrt();
    (r, erfc(z.abs() / std::f64::consts::SQRT_2))
}

/// Runs test on the bit stream. Fails outright if the frequency
/// prerequisite does not hold.
pub fn runs(bytes: &[u8]) -> (f64, f64) {
    let n = bytes.len() * 8;
    let bit = |i: usize| (bytes[i / 8] >> (7 - i % 8)) & 1;
    let ones: u32 = bytes.iter().map(|b| b.count_ones()).sum();
    let pi = ones as f64 / n as f64;
    let nf = n as f64;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return (0.0, 0.0);
    }
    let v = 1 + (1..n).filter(|&i| bit(i) != bit(i - 1)).count();
    let num = (v as f64 - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    (v as f64, erfc(num / den))
}

pub fn stat_battery(coins: &[RandomCoin], alpha: f64) -> Result<StatReport, StatError> {
    if coins.len() < MIN_COINS {
        return Err(StatError::TooFewCoins(coins.len()));
    }
    let stream: Vec<u8> = coins
        .iter()
        .flat_map(|c| c.as_bytes().iter().copied())
        .collect();
    Ok(battery_over(&stream, alpha))
}

pub fn battery_over(stream: &[u8], alpha: f64) -> StatReport {
    let tests = [
        ("monobit", monobit(stream)),
        ("byte_chi_square", byte_chi_square(stream)),
        ("serial_correlation", serial_correlation(stream)),
        ("runs", runs(stream)),
    ]
    .into_iter()
    .map(|(name, (statistic, p_value))| StatTest {
        name: name.into(),
        statistic,
        p_value,
        passed: p_value >= alpha,
    })
    .collect();
    StatReport {
        alpha,
        octets: stream.len(),
        tests,
    }
}
