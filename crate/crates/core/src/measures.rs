//! Set-theoretic entropy measures between two divisions of the user set.
//!
//! All four measures read a division only through its block cardinalities and
//! `|U|`, so they take a [`SizeProfile`]. Every term is a ratio of integers
//! over `|U|^2`, which lets the fast path accumulate an exact integer
//! numerator over the histogram of distinct sizes and divide once. Results are
//! therefore independent of block order, and `js_divergence(a, b)` is
//! bit-identical to `js_divergence(b, a)`.
//!
//! | measure | value |
//! |---|---|
//! | information entropy | `Σ_i s_i/|U| (1 - s_i/|U|)` over per-sample sizes |
//! | cross entropy | `Σ_i Σ_j |α_i|/|U| (1 - |β_j|/|U|)` |
//! | KL divergence | `Σ_i Σ_j | |α_i|²/|U|² - |α_i||β_j|/|U|² |` |
//! | JS divergence | `1/(4|U|²) Σ_i Σ_j (|α_i|+|β_j|) · ||α_i|-|β_j||` |
//!
//! The KL and JS forms are taken literally. In particular KL is not zero for
//! two equal divisions unless all their blocks share one size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::Cover;

/// Block cardinalities of a division plus the universe size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeProfile {
    sizes: Vec<usize>,
    universe_size: usize,
}

impl SizeProfile {
    pub fn new(sizes: Vec<usize>, universe_size: usize) -> Result<SizeProfile> {
        if universe_size == 0 {
            return Err(Error::contract("universe must be nonempty"));
        }
        if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > universe_size) {
            return Err(Error::contract(format!(
                "block size {bad} outside 1..={universe_size}"
            )));
        }
        Ok(SizeProfile {
            sizes,
            universe_size,
        })
    }

    pub fn from_cover(cover: &Cover) -> SizeProfile {
        SizeProfile {
            sizes: cover.block_sizes(),
            universe_size: cover.universe_size,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Distinct sizes with multiplicities, ascending.
    pub fn histogram(&self) -> Vec<(u128, u128)> {
        let mut h: BTreeMap<usize, u128> = BTreeMap::new();
        for &s in &self.sizes {
            *h.entry(s).or_default() += 1;
        }
        h.into_iter().map(|(s, c)| (s as u128, c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Info,
    Ce,
    Kl,
    Js,
}

/// The three divergences that can drive decision-feature selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Ce,
    Kl,
    Js,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [MeasureKind::Ce, MeasureKind::Kl, MeasureKind::Js];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Ce => "ce",
            MeasureKind::Kl => "kl",
            MeasureKind::Js => "js",
        }
    }

    pub fn evaluate(self, a: &SizeProfile, b: &SizeProfile) -> Result<f64> {
        match self {
            MeasureKind::Ce => cross_entropy(a, b),
            MeasureKind::Kl => kl_divergence(a, b),
            MeasureKind::Js => js_divergence(a, b),
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" | "cf_ce" => Ok(MeasureKind::Ce),
            "kl" | "cf_kl" => Ok(MeasureKind::Kl),
            "js" | "cf_js" => Ok(MeasureKind::Js),
            other => Err(Error::Config(format!("unknown measure {other:?}"))),
        }
    }
}

impl From<MeasureKind> for Measure {
    fn from(kind: MeasureKind) -> Measure {
        match kind {
            MeasureKind::Ce => Measure::Ce,
            MeasureKind::Kl => Measure::Kl,
            MeasureKind::Js => Measure::Js,
        }
    }
}

fn ratio(numerator: u128, denominator: u128) -> f64 {
    numerator as f64 / denominator as f64
}

fn check_pair(a: &SizeProfile, b: &SizeProfile) -> Result<u128> {
    if a.universe_size != b.universe_size {
        return Err(Error::contract(format!(
            "universe sizes differ: {} vs {}",
            a.universe_size, b.universe_size
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("measure over an empty block list"));
    }
    Ok(a.universe_size as u128)
}

/// Information entropy from per-sample neighbor-set sizes `|R(x_i)|` (one
/// entry per sample, not deduplicated). Lies in `[0, n/4]`.
pub fn info_entropy(profile: &SizeProfile) -> Result<f64> {
    let u = profile.universe_size as u128;
    Ok(ratio(info_numerator(profile), u * u))
}

/// The measures below are exact integers over `|U|²`; these return the
/// numerators.
pub(crate) fn info_numerator(profile: &SizeProfile) -> u128 {
    let u = profile.universe_size as u128;
    profile.histogram().iter().map(|&(s, c)| c * s * (u - s)).sum()
}

pub(crate) fn ce_numerator(a: &SizeProfile, b: &SizeProfile) -> Result<u128> {
    let u = check_pair(a, b)?;
    let sum_a: u128 = a.sizes.iter().map(|&s| s as u128).sum();
    let sum_b: u128 = b.sizes.iter().map(|&s| s as u128).sum();
    let m = b.len() as u128;
    Ok(sum_a * (m * u - sum_b))
}

pub(crate) fn kl_numerator(a: &SizeProfile, b: &SizeProfile) -> Result<u128> {
    check_pair(a, b)?;
    let hb = b.histogram();
    Ok(a.histogram()
        .iter()
        .flat_map(|&(sa, ca)| hb.iter().map(move |&(sb, cb)| ca * cb * sa * sa.abs_diff(sb)))
        .sum())
}

/// Cross entropy of `a` against `b`. The double sum factorizes into
/// `(Σ|α_i|) (m|U| - Σ|β_j|) / |U|²`.
pub fn cross_entropy(a: &SizeProfile, b: &SizeProfile) -> Result<f64> {
    let u = a.universe_size as u128;
    Ok(ratio(ce_numerator(a, b)?, u * u))
}

pub fn kl_divergence(a: &SizeProfile, b: &SizeProfile) -> Result<f64> {
    let u = a.universe_size as u128;
    Ok(ratio(kl_numerator(a, b)?, u * u))
}

pub fn js_divergence(a: &SizeProfile, b: &SizeProfile) -> Result<f64> {
    let u = check_pair(a, b)?;
    let hb = b.histogram();
    let numerator: u128 = a
        .histogram()
        .iter()
        .flat_map(|&(sa, ca)| hb.iter().map(move |&(sb, cb)| ca * cb * (sa + sb) * sa.abs_diff(sb)))
        .sum();
    Ok(ratio(numerator, 4 * u * u))
}

/// A measure value tagged with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub measure: Measure,
    pub value: f64,
    pub operands: Vec<crate::relation::CoverSource>,
}

impl MeasureValue {
    pub fn between(kind: MeasureKind, a: &Cover, b: &Cover) -> Result<MeasureValue> {
        let value = kind.evaluate(&SizeProfile::from_cover(a), &SizeProfile::from_cover(b))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Invariant(format!("{kind:?} produced {value}")));
        }
        Ok(MeasureValue {
            measure: kind.into(),
            value,
            operands: vec![a.source, b.source],
        })
    }
}

/// Naive double sums over raw blocks, written directly from the defining
/// formulas in floating point. Tests use it as an oracle for the exact
/// histogram path above; it shares no code with it.
pub mod oracle {
    use super::Measure;
    use crate::error::{Error, Result};

    /// For [`Measure::Info`], `a` is the list of per-sample neighbor sets and
    /// `b` is ignored. JS uses the half-and-half expansion against the mean
    /// division.
    pub fn measure_oracle(
        a: &[Vec<usize>],
        b: &[Vec<usize>],
        universe_size: usize,
        measure: Measure,
    ) -> Result<f64> {
        if universe_size == 0 {
            return Err(Error::Contract("empty universe".into()));
        }
        let u = universe_size as f64;
        if measure == Measure::Info {
            return Ok(a
                .iter()
                .map(|r| {
                    let p = r.len() as f64 / u;
                    p * (1.0 - p)
                })
                .sum());
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::Contract("measure over an empty block list".into()));
        }
        let mut total = 0.0;
        for alpha in a {
            for beta in b {
                let (x, y) = (alpha.len() as f64, beta.len() as f64);
                total += match measure {
                    Measure::Ce => (x / u) * (1.0 - y / u),
                    Measure::Kl => (x * x / (u * u) - x * y / (u * u)).abs(),
                    Measure::Js => {
                        0.5 * (x * x / (u * u) - x * (x + y) / (2.0 * u * u)).abs()
                            + 0.5 * (y * y / (u * u) - y * (y + x) / (2.0 * u * u)).abs()
                    }
                    Measure::Info => unreachable!(),
                };
            }
        }
        Ok(total)
    }
}
