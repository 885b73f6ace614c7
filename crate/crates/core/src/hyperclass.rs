//! Decision-feature selection and the hyper-class built from it.
//!
//! Every feature `k` is scored by a divergence between `U/F_k` and `U/¬F_k`;
//! the first feature reaching the minimum score becomes the decision feature,
//! and its cover is the hyper-class. New samples are assigned to the block
//! whose mean decision-feature value is nearest to theirs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MissingPolicy, RatingMatrix};
use crate::measures::{ce_numerator, info_numerator, kl_numerator, MeasureKind, SizeProfile};
use crate::relation::{ComplementIndex, Cover, CoverSource, FeatureSpace, NeighborhoodConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    pub measure: MeasureKind,
    pub scores: Vec<f64>,
    pub config: NeighborhoodConfig,
}

/// Size profiles of `U/F_k` and `U/¬F_k` for every feature.
#[derive(Debug, Clone)]
pub struct FeatureProfiles {
    config: NeighborhoodConfig,
    /// Deduplicated blocks of `U/F_k`.
    pub feature: Vec<SizeProfile>,
    /// `|R(x_i)|` on `F_k`, one per sample.
    pub per_sample: Vec<SizeProfile>,
    /// Deduplicated blocks of `U/¬F_k`.
    pub complement: Vec<SizeProfile>,
}

fn dedup_sizes(sets: Vec<Vec<usize>>, n: usize) -> Vec<usize> {
    Cover::from_neighbor_sets(sets, n, CoverSource::Explicit).block_sizes()
}

impl FeatureProfiles {
    pub fn compute(matrix: &RatingMatrix, cfg: &NeighborhoodConfig) -> Result<FeatureProfiles> {
        let (n, d) = (matrix.n_users(), matrix.n_items());
        if d < 2 {
            return Err(Error::contract(format!("scoring needs at least 2 features, got {d}")));
        }
        if n == 0 {
            return Err(Error::contract("scoring needs at least one user"));
        }
        let space = FeatureSpace::new(matrix, cfg)?;
        let index = ComplementIndex::build(&space);
        let base = SizeProfile::new(dedup_sizes(index.base_neighbor_sets().to_vec(), n), n)?;

        let per_feature: Vec<Result<(SizeProfile, SizeProfile, SizeProfile)>> = (0..d)
            .into_par_iter()
            .map(|k| {
                let (per_sample, blocks) = space.feature_sizes(k);
                let per_sample = SizeProfile::new(per_sample, n)?;
                let feature = SizeProfile::new(blocks, n)?;
                let complement = if index.has_extra(k) {
                    SizeProfile::new(dedup_sizes(index.neighbor_sets(k), n), n)?
                } else {
                    base.clone()
                };
                Ok((feature, per_sample, complement))
            })
            .collect();

        let mut out = FeatureProfiles {
            config: *cfg,
            feature: Vec::with_capacity(d),
            per_sample: Vec::with_capacity(d),
            complement: Vec::with_capacity(d),
        };
        for r in per_feature {
            let (f, s, c) = r?;
            out.feature.push(f);
            out.per_sample.push(s);
            out.complement.push(c);
        }
        Ok(out)
    }

    pub fn n_features(&self) -> usize {
        self.feature.len()
    }

    pub fn scores(&self, measure: MeasureKind) -> Result<FeatureScores> {
        let scores = self
            .feature
            .par_iter()
            .zip(&self.complement)
            .map(|(a, b)| measure.evaluate(a, b))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Invariant(format!("feature score {bad}")));
        }
        Ok(FeatureScores {
            measure,
            scores,
            config: self.config,
        })
    }

    /// `| KL - |CE - E_{F_k}| |` for feature `k`; zero whenever the
    /// KL = |CE - information entropy| identity happens to hold.
    pub fn property3_gap(&self, k: usize) -> Result<f64> {
        if k >= self.n_features() {
            return Err(Error::contract(format!("feature {k} out of range")));
        }
        property3_gap_profiles(&self.per_sample[k], &self.feature[k], &self.complement[k])
    }
}

/// `| KL(a, b) - |CE(a, b) - E(per_sample)| |` from explicit profiles.
pub fn property3_gap_profiles(
    per_sample: &SizeProfile,
    a: &SizeProfile,
    b: &SizeProfile,
) -> Result<f64> {
    if per_sample.universe_size() != a.universe_size() {
        return Err(Error::contract("per-sample profile over a different universe"));
    }
    let kl = kl_numerator(a, b)? as i128;
    let ce = ce_numerator(a, b)? as i128;
    let info = info_numerator(per_sample) as i128;
    let u = a.universe_size() as f64;
    Ok((kl - (ce - info).abs()).unsigned_abs() as f64 / (u * u))
}

pub fn score_features(
    matrix: &RatingMatrix,
    measure: MeasureKind,
    cfg: &NeighborhoodConfig,
) -> Result<FeatureScores> {
    FeatureProfiles::compute(matrix, cfg)?.scores(measure)
}

/// Smallest index attaining the minimum score.
pub fn select_decision_feature(scores: &FeatureScores) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &s) in scores.scores.iter().enumerate() {
        if best.map_or(true, |(_, b)| s < b) {
            best = Some((k, s));
        }
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| Error::contract("no feature scores to select from"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperClass {
    pub measure: MeasureKind,
    pub decision_feature: usize,
    pub score: f64,
    pub blocks: Cover,
    /// Mean raw decision-feature value per block; `None` when no member has
    /// an observed value under the active missing policy.
    pub representatives: Vec<Option<f64>>,
    /// Raw `(min, max)` used to normalize the decision feature.
    pub feature_range: Option<(f64, f64)>,
    pub config: NeighborhoodConfig,
}

impl HyperClass {
    /// Hyper-class over a given feature, skipping selection.
    pub fn for_feature(
        matrix: &RatingMatrix,
        k: usize,
        cfg: &NeighborhoodConfig,
        measure: MeasureKind,
        score: f64,
    ) -> Result<HyperClass> {
        if k >= matrix.n_items() {
            return Err(Error::contract(format!("feature {k} out of range")));
        }
        let space = FeatureSpace::new(matrix, cfg)?;
        let blocks = Cover::from_neighbor_sets(
            space.feature_neighbor_sets(k),
            matrix.n_users(),
            CoverSource::Feature(k),
        );
        let representatives = blocks
            .blocks
            .iter()
            .map(|members| {
                let values: Vec<f64> = members
                    .iter()
                    .filter_map(|&u| policy_value(matrix, u, k, cfg.missing))
                    .collect();
                (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
            })
            .collect();
        Ok(HyperClass {
            measure,
            decision_feature: k,
            score,
            blocks,
            representatives,
            feature_range: space.range(k),
            config: *cfg,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// The decision-feature value of `user` under the build-time missing
    /// policy.
    pub fn sample_value(&self, matrix: &RatingMatrix, user: usize) -> Option<f64> {
        policy_value(matrix, user, self.decision_feature, self.config.missing)
    }

    fn normalized(&self, v: f64) -> f64 {
        if !self.config.normalize {
            return v;
        }
        match self.feature_range {
            Some((lo, hi)) if hi > lo => (v - lo) / (hi - lo),
            _ => 0.0,
        }
    }

    /// Block for a sample with the given decision-feature value: the nearest
    /// representative, the lowest index on ties, the largest block when the
    /// value is missing.
    pub fn assign(&self, value: Option<f64>) -> usize {
        let nearest = value.and_then(|v| {
            let v = self.normalized(v);
            let mut best: Option<(usize, f64)> = None;
            for (b, rep) in self.representatives.iter().enumerate() {
                if let Some(rep) = rep {
                    let d = (self.normalized(*rep) - v).abs();
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((b, d));
                    }
                }
            }
            best.map(|(b, _)| b)
        });
        nearest.unwrap_or_else(|| {
            log::debug!("no decision-feature value; using largest block");
            self.largest_block()
        })
    }

    fn largest_block(&self) -> usize {
        let mut best = 0;
        for (b, members) in self.blocks.blocks.iter().enumerate() {
            if members.len() > self.blocks.blocks[best].len() {
                best = b;
            }
        }
        best
    }
}

fn policy_value(matrix: &RatingMatrix, user: usize, k: usize, policy: MissingPolicy) -> Option<f64> {
    match (matrix.get(user, k), policy) {
        (Some(v), _) => Some(v),
        (None, MissingPolicy::Zero) => Some(0.0),
        (None, MissingPolicy::Skip) => None,
    }
}

/// Score all features, pick the first minimum, build its hyper-class.
pub fn build_hyperclass(
    matrix: &RatingMatrix,
    measure: MeasureKind,
    cfg: &NeighborhoodConfig,
) -> Result<HyperClass> {
    let profiles = FeatureProfiles::compute(matrix, cfg)?;
    hyperclass_from_profiles(matrix, &profiles, measure)
}

/// [`build_hyperclass`] reusing already computed profiles.
pub fn hyperclass_from_profiles(
    matrix: &RatingMatrix,
    profiles: &FeatureProfiles,
    measure: MeasureKind,
) -> Result<HyperClass> {
    let scores = profiles.scores(measure)?;
    let k = select_decision_feature(&scores)?;
    let hc = HyperClass::for_feature(matrix, k, &profiles.config, measure, scores.scores[k])?;
    if hc.representatives.len() != hc.blocks.len() {
        return Err(Error::Invariant("representatives/blocks length mismatch".into()));
    }
    Ok(hc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Scale;

    fn scores(v: &[f64]) -> FeatureScores {
        FeatureScores {
            measure: MeasureKind::Ce,
            scores: v.to_vec(),
            config: NeighborhoodConfig::default(),
        }
    }

    #[test]
    fn first_minimum() {
        assert_eq!(select_decision_feature(&scores(&[0.5, 0.2, 0.2])).unwrap(), 1);
        assert_eq!(select_decision_feature(&scores(&[0.0, 0.0])).unwrap(), 0);
        assert!(select_decision_feature(&scores(&[])).is_err());
    }

    #[test]
    fn identical_columns_score_equally() {
        let m = RatingMatrix::from_dense(
            &[
                vec![Some(1.0), Some(1.0)],
                vec![Some(3.0), Some(3.0)],
                vec![Some(3.0), Some(3.0)],
                vec![Some(5.0), Some(5.0)],
            ],
            Scale::MOVIELENS,
        )
        .unwrap();
        for kind in MeasureKind::ALL {
            let s = score_features(&m, kind, &NeighborhoodConfig::default()).unwrap();
            assert_eq!(s.scores[0], s.scores[1]);
        }
    }

    #[test]
    fn single_feature_rejected() {
        let m = RatingMatrix::from_dense(&[vec![Some(1.0)], vec![Some(2.0)]], Scale::MOVIELENS)
            .unwrap();
        assert!(matches!(
            build_hyperclass(&m, MeasureKind::Ce, &NeighborhoodConfig::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn single_user_single_block() {
        let m = RatingMatrix::from_dense(&[vec![Some(1.0), Some(4.0), None]], Scale::MOVIELENS)
            .unwrap();
        for kind in MeasureKind::ALL {
            let hc = build_hyperclass(&m, kind, &NeighborhoodConfig::default()).unwrap();
            assert_eq!(hc.blocks.blocks, vec![vec![0]]);
            assert!(hc.decision_feature < 3);
        }
    }

    fn with_reps(reps: &[Option<f64>], sizes: &[usize]) -> HyperClass {
        let mut next = 0;
        let blocks = sizes
            .iter()
            .map(|&s| {
                let b: Vec<usize> = (next..next + s).collect();
                next += s;
                b
            })
            .collect();
        HyperClass {
            measure: MeasureKind::Ce,
            decision_feature: 0,
            score: 0.0,
            blocks: Cover {
                source: CoverSource::Feature(0),
                universe_size: next,
                blocks,
            },
            representatives: reps.to_vec(),
            feature_range: Some((0.0, 5.0)),
            config: NeighborhoodConfig::default(),
        }
    }

    #[test]
    fn assignment_rules() {
        let hc = with_reps(&[Some(1.0), Some(4.5)], &[1, 1]);
        assert_eq!(hc.assign(Some(4.0)), 1);
        let hc = with_reps(&[Some(1.0), Some(4.5)], &[10, 3]);
        assert_eq!(hc.assign(None), 0);
        let hc = with_reps(&[Some(2.0), Some(2.0)], &[1, 1]);
        assert_eq!(hc.assign(Some(2.0)), 0);
        let hc = with_reps(&[None, None], &[1, 4]);
        assert_eq!(hc.assign(Some(2.0)), 1);
    }

    #[test]
    fn hyperclass_json_fields() {
        let hc = with_reps(&[Some(1.0)], &[2]);
        let v: serde_json::Value = serde_json::to_value(&hc).unwrap();
        for key in ["measure", "decision_feature", "score", "blocks", "representatives", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: HyperClass = serde_json::from_value(v).unwrap();
        assert_eq!(back, hc);
    }
}
