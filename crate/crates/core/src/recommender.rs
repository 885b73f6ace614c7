//! Neighborhood collaborative filtering: user-based, item-based, and
//! user-based restricted to the target's hyper-class block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperclass::HyperClass;
use crate::ingest::RatingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    #[default]
    Cosine,
    Pearson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityFn {
    pub kind: SimilarityKind,
    /// Co-rated entries required for a nonzero similarity.
    pub min_overlap: usize,
}

impl Default for SimilarityFn {
    fn default() -> Self {
        SimilarityFn {
            kind: SimilarityKind::Cosine,
            min_overlap: 1,
        }
    }
}

impl SimilarityFn {
    /// Similarity of two sparse vectors sorted by index, over their common
    /// indices.
    pub fn between(&self, a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
        match self.kind {
            SimilarityKind::Cosine => {
                let (mut n, mut dot, mut na, mut nb) = (0usize, 0.0, 0.0, 0.0);
                co_rated(a, b, |x, y| {
                    n += 1;
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                });
                self.finish(n, dot, na, nb)
            }
            SimilarityKind::Pearson => {
                let mut common: Vec<(f64, f64)> = Vec::new();
                co_rated(a, b, |x, y| common.push((x, y)));
                let n = common.len().max(1) as f64;
                let ma = common.iter().map(|c| c.0).sum::<f64>() / n;
                let mb = common.iter().map(|c| c.1).sum::<f64>() / n;
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for &(x, y) in &common {
                    let (x, y) = (x - ma, y - mb);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                self.finish(common.len(), dot, na, nb)
            }
        }
    }

    /// Cosine against a target given densely, `NaN` marking unrated items.
    /// Sums run in item order, so the result equals [`Self::between`].
    fn cosine_dense(&self, target: &[f64], b: &[(usize, f64)]) -> f64 {
        let (mut n, mut dot, mut na, mut nb) = (0usize, 0.0, 0.0, 0.0);
        for &(i, y) in b {
            let x = target[i];
            if !x.is_nan() {
                n += 1;
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
        }
        self.finish(n, dot, na, nb)
    }

    fn finish(&self, n: usize, dot: f64, na: f64, nb: f64) -> f64 {
        if n < self.min_overlap.max(1) || na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Calls `f` on the value pairs at indices present in both sorted vectors.
fn co_rated(a: &[(usize, f64)], b: &[(usize, f64)], mut f: impl FnMut(f64, f64)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(a[i].1, b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
}

pub fn user_similarity(matrix: &RatingMatrix, u: usize, v: usize, sim: &SimilarityFn) -> f64 {
    sim.between(matrix.row(u), matrix.row(v))
}

pub fn item_similarity(matrix: &RatingMatrix, i: usize, j: usize, sim: &SimilarityFn) -> f64 {
    sim.between(matrix.col(i), matrix.col(j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackLevel {
    Neighbors,
    UserMean,
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub user: usize,
    pub item: usize,
    pub value: f64,
    /// Neighbors that contributed to `value`.
    pub support: usize,
    pub fallback_level: FallbackLevel,
    /// Similarity computations performed for this query.
    pub similarity_evaluations: usize,
}

/// Neighborhood size, similarity and weighting shared by all predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfParams {
    pub k: usize,
    pub similarity: SimilarityFn,
    /// Predict `mean_u + Σ s (r_v - mean_v) / Σ|s|` instead of `Σ s r_v / Σ|s|`.
    pub mean_centered: bool,
}

impl CfParams {
    pub fn new(k: usize, similarity: SimilarityFn) -> Self {
        CfParams {
            k,
            similarity,
            mean_centered: false,
        }
    }
}

impl Default for CfParams {
    fn default() -> Self {
        CfParams::new(10, SimilarityFn::default())
    }
}

/// Which predictor to run.
#[derive(Debug, Clone, Copy)]
pub enum Algorithm<'a> {
    UserCf,
    ItemCf,
    HyperClass(&'a HyperClass),
}

impl Algorithm<'_> {
    pub fn predict(&self, matrix: &RatingMatrix, user: usize, item: usize, params: &CfParams) -> Prediction {
        match self {
            Algorithm::UserCf => predict_usercf_with(matrix, user, item, params),
            Algorithm::ItemCf => predict_itemcf_with(matrix, user, item, params),
            Algorithm::HyperClass(hc) => predict_hyperclass_with(matrix, hc, user, item, params),
        }
    }
}

fn fallback(matrix: &RatingMatrix, user: usize, item: usize, evaluations: usize) -> Prediction {
    let scale = matrix.scale();
    let (value, level) = match matrix.user_mean(user) {
        Some(m) => (m, FallbackLevel::UserMean),
        None => (
            matrix.global_mean().unwrap_or((scale.min + scale.max) / 2.0),
            FallbackLevel::GlobalMean,
        ),
    };
    Prediction {
        user,
        item,
        value: scale.clamp(value),
        support: 0,
        fallback_level: level,
        similarity_evaluations: evaluations,
    }
}

/// `(similarity, neighbor, neighbor's rating)` candidates, best first: higher
/// similarity, then lower index.
fn top_k(mut scored: Vec<(f64, usize, f64)>, k: usize) -> Vec<(f64, usize, f64)> {
    let order = |a: &(f64, usize, f64), b: &(f64, usize, f64)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored
}

/// User-based prediction over an explicit candidate pool.
fn predict_from_users(
    matrix: &RatingMatrix,
    user: usize,
    item: usize,
    params: &CfParams,
    candidates: impl Iterator<Item = (usize, f64)>,
) -> Prediction {
    let target = matrix.row(user);
    let dense = match params.similarity.kind {
        SimilarityKind::Cosine => {
            let mut d = vec![f64::NAN; matrix.n_items()];
            for &(i, r) in target {
                d[i] = r;
            }
            Some(d)
        }
        SimilarityKind::Pearson => None,
    };
    let mut evaluations = 0;
    let scored: Vec<(f64, usize, f64)> = candidates
        .filter(|&(v, _)| v != user)
        .map(|(v, r)| {
            evaluations += 1;
            let s = match &dense {
                Some(d) => params.similarity.cosine_dense(d, matrix.row(v)),
                None => params.similarity.between(target, matrix.row(v)),
            };
            (s, v, r)
        })
        .collect();
    let neighbors = top_k(scored, params.k);

    let (mut num, mut den, mut support) = (0.0, 0.0, 0);
    for &(s, v, r) in &neighbors {
        if s <= 0.0 {
            continue;
        }
        let r = if params.mean_centered {
            r - matrix.user_mean(v).unwrap_or(r)
        } else {
            r
        };
        num += s * r;
        den += s.abs();
        support += 1;
    }
    if support == 0 {
        return fallback(matrix, user, item, evaluations);
    }
    let mut value = num / den;
    if params.mean_centered {
        value += matrix.user_mean(user).or(matrix.global_mean()).unwrap_or(0.0);
    }
    Prediction {
        user,
        item,
        value: matrix.scale().clamp(value),
        support,
        fallback_level: FallbackLevel::Neighbors,
        similarity_evaluations: evaluations,
    }
}

pub fn predict_usercf(
    matrix: &RatingMatrix,
    user: usize,
    item: usize,
    k: usize,
    sim: &SimilarityFn,
) -> Prediction {
    predict_usercf_with(matrix, user, item, &CfParams::new(k, *sim))
}

pub fn predict_usercf_with(matrix: &RatingMatrix, user: usize, item: usize, params: &CfParams) -> Prediction {
    predict_from_users(matrix, user, item, params, matrix.col(item).iter().copied())
}

/// User-based prediction whose neighbors are limited to the hyper-class block
/// the target user is assigned to.
pub fn predict_hyperclass(
    matrix: &RatingMatrix,
    hc: &HyperClass,
    user: usize,
    item: usize,
    k: usize,
    sim: &SimilarityFn,
) -> Prediction {
    predict_hyperclass_with(matrix, hc, user, item, &CfParams::new(k, *sim))
}

pub fn predict_hyperclass_with(
    matrix: &RatingMatrix,
    hc: &HyperClass,
    user: usize,
    item: usize,
    params: &CfParams,
) -> Prediction {
    let block = &hc.blocks.blocks[hc.assign(hc.sample_value(matrix, user))];
    // Both lists are sorted by user index.
    let col = matrix.col(item);
    let mut b = 0;
    let pool = col.iter().copied().filter(move |&(v, _)| {
        while b < block.len() && block[b] < v {
            b += 1;
        }
        b < block.len() && block[b] == v
    });
    predict_from_users(matrix, user, item, params, pool)
}

pub fn predict_itemcf(
    matrix: &RatingMatrix,
    user: usize,
    item: usize,
    k: usize,
    sim: &SimilarityFn,
) -> Prediction {
    predict_itemcf_with(matrix, user, item, &CfParams::new(k, *sim))
}

/// Item-based prediction: neighbors are the items `user` rated, weighted by
/// their similarity to `item`.
pub fn predict_itemcf_with(matrix: &RatingMatrix, user: usize, item: usize, params: &CfParams) -> Prediction {
    let target = matrix.col(item);
    let mut evaluations = 0;
    let scored: Vec<(f64, usize, f64)> = matrix
        .row(user)
        .iter()
        .filter(|&&(j, _)| j != item)
        .map(|&(j, r)| {
            evaluations += 1;
            (params.similarity.between(target, matrix.col(j)), j, r)
        })
        .collect();
    let neighbors = top_k(scored, params.k);

    let (mut num, mut den, mut support) = (0.0, 0.0, 0);
    for &(s, j, r) in &neighbors {
        if s <= 0.0 {
            continue;
        }
        let r = if params.mean_centered {
            r - matrix.item_mean(j).unwrap_or(r)
        } else {
            r
        };
        num += s * r;
        den += s.abs();
        support += 1;
    }
    if support == 0 {
        return fallback(matrix, user, item, evaluations);
    }
    let mut value = num / den;
    if params.mean_centered {
        value += matrix.item_mean(item).or(matrix.global_mean()).unwrap_or(0.0);
    }
    Prediction {
        user,
        item,
        value: matrix.scale().clamp(value),
        support,
        fallback_level: FallbackLevel::Neighbors,
        similarity_evaluations: evaluations,
    }
}

/// The `n` items `user` has not rated with the highest predictions, best
/// first, lower item index on ties.
pub fn top_n(
    matrix: &RatingMatrix,
    algorithm: Algorithm<'_>,
    user: usize,
    n: usize,
    params: &CfParams,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::contract("top_n needs n >= 1"));
    }
    if user >= matrix.n_users() {
        return Err(Error::contract(format!("user {user} out of range")));
    }
    let mut predicted: Vec<(f64, usize)> = (0..matrix.n_items())
        .filter(|&i| matrix.get(user, i).is_none())
        .map(|i| (algorithm.predict(matrix, user, i, params).value, i))
        .collect();
    predicted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(predicted.into_iter().take(n).map(|(_, i)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Scale;

    fn m(rows: &[&[Option<f64>]]) -> RatingMatrix {
        let rows: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.to_vec()).collect();
        RatingMatrix::from_dense(&rows, Scale::MOVIELENS).unwrap()
    }

    #[test]
    fn cosine_basics() {
        let x = m(&[
            &[Some(5.0), Some(3.0), None],
            &[Some(5.0), Some(3.0), None],
            &[Some(4.0), None, Some(2.0)],
            &[None, None, Some(1.0)],
        ]);
        let sim = SimilarityFn::default();
        assert_eq!(user_similarity(&x, 0, 1, &sim), 1.0);
        assert_eq!(user_similarity(&x, 0, 2, &sim), 1.0);
        assert_eq!(user_similarity(&x, 0, 3, &sim), 0.0);
        let strict = SimilarityFn {
            min_overlap: 2,
            ..sim
        };
        assert_eq!(user_similarity(&x, 0, 2, &strict), 0.0);
    }

    #[test]
    fn pearson_range() {
        let x = m(&[&[Some(1.0), Some(2.0), Some(3.0)], &[Some(3.0), Some(2.0), Some(1.0)]]);
        let sim = SimilarityFn {
            kind: SimilarityKind::Pearson,
            min_overlap: 1,
        };
        assert!((user_similarity(&x, 0, 1, &sim) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_neighbor_prediction() {
        let x = m(&[&[Some(3.0), None], &[Some(3.0), Some(4.0)]]);
        let p = predict_usercf(&x, 0, 1, 10, &SimilarityFn::default());
        assert_eq!((p.value, p.support, p.fallback_level), (4.0, 1, FallbackLevel::Neighbors));
    }

    #[test]
    fn unrated_item_falls_back_to_user_mean() {
        let x = m(&[&[Some(2.0), Some(4.0), None], &[Some(3.0), None, None]]);
        let p = predict_usercf(&x, 0, 2, 10, &SimilarityFn::default());
        assert_eq!((p.value, p.fallback_level), (3.0, FallbackLevel::UserMean));
    }

    #[test]
    fn itemcf_single_rated_item() {
        let x = m(&[&[Some(3.0), None], &[Some(2.0), Some(2.0)]]);
        let p = predict_itemcf(&x, 0, 1, 10, &SimilarityFn::default());
        assert_eq!((p.value, p.support), (3.0, 1));
    }

    #[test]
    fn itemcf_empty_user_uses_global_mean() {
        let x = m(&[&[None, None], &[Some(2.0), Some(4.0)]]);
        let p = predict_itemcf(&x, 0, 1, 10, &SimilarityFn::default());
        assert_eq!((p.value, p.fallback_level), (3.0, FallbackLevel::GlobalMean));
    }

    #[test]
    fn top_n_edges() {
        let full = m(&[&[Some(3.0), Some(2.0)], &[Some(2.0), Some(2.0)]]);
        let params = CfParams::default();
        assert!(top_n(&full, Algorithm::UserCf, 0, 3, &params).unwrap().is_empty());
        let one = m(&[&[Some(3.0), None], &[Some(2.0), Some(2.0)]]);
        assert_eq!(top_n(&one, Algorithm::UserCf, 0, 5, &params).unwrap(), vec![1]);
        assert!(top_n(&one, Algorithm::UserCf, 0, 0, &params).is_err());
    }

    #[test]
    fn k_zero_falls_back() {
        let x = m(&[&[Some(3.0), None], &[Some(3.0), Some(4.0)]]);
        let p = predict_usercf(&x, 0, 1, 0, &SimilarityFn::default());
        assert_eq!(p.fallback_level, FallbackLevel::UserMean);
    }
}
