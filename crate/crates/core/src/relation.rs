//! Neighborhood relations on the user set and the covers they induce.
//!
//! Two users are related on a feature set when their distance over those
//! features is at most `delta`. Each user's neighbor set `R(x_i)` always
//! contains the user itself, so deduplicating the neighbor sets of all users
//! yields a cover of the universe. With `delta = 0` the relation is an
//! equivalence and the cover is a partition.
//!
//! Missing ratings follow [`MissingPolicy`]: under `Zero` an absent rating is
//! the value `0` (normalized together with the observed values), under `Skip`
//! a coordinate missing on either side is left out of the distance, so a user
//! with no observed coordinates is related to everybody.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MissingPolicy, RatingMatrix};

/// Slack added to `delta` so that values on a regular grid (e.g. ratings
/// normalized to multiples of 0.2) compare the same from either side.
const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Maximum coordinate difference.
    #[default]
    Chebyshev,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodConfig {
    pub delta: f64,
    pub norm: Norm,
    /// Min-max scale every feature to `[0, 1]` before measuring distances.
    pub normalize: bool,
    pub missing: MissingPolicy,
}

impl Default for NeighborhoodConfig {
    fn default() -> Self {
        NeighborhoodConfig {
            delta: 0.0,
            norm: Norm::Chebyshev,
            normalize: true,
            missing: MissingPolicy::Zero,
        }
    }
}

impl NeighborhoodConfig {
    pub fn with_delta(delta: f64) -> Self {
        NeighborhoodConfig {
            delta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        Ok(())
    }

    fn within(&self, distance: f64) -> bool {
        distance <= self.delta + TOLERANCE
    }

    fn within_squared(&self, squared: f64) -> bool {
        squared <= self.delta * self.delta + TOLERANCE
    }
}

/// What a cover was induced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverSource {
    /// `U/F_k`: the single feature `k`.
    Feature(usize),
    /// `U/¬F_k`: every feature except `k`.
    Complement(usize),
    /// Built directly from blocks.
    Explicit,
}

/// Deduplicated family of nonempty blocks whose union is the universe.
///
/// Blocks are sorted member lists, ordered by smallest member, then size,
/// then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub source: CoverSource,
    pub universe_size: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl Cover {
    /// Validate and canonicalize explicit blocks.
    pub fn new(blocks: Vec<Vec<usize>>, universe_size: usize, source: CoverSource) -> Result<Cover> {
        let mut seen = vec![false; universe_size];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::contract("cover blocks must be nonempty"));
            }
            for &m in block {
                if m >= universe_size {
                    return Err(Error::contract(format!(
                        "block member {m} outside universe of size {universe_size}"
                    )));
                }
                seen[m] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::contract(format!("sample {missing} is not covered")));
        }
        Ok(Cover::from_neighbor_sets(blocks, universe_size, source))
    }

    /// Deduplicate per-sample neighbor sets into canonical blocks. Callers
    /// guarantee the sets are nonempty, in range and jointly cover the universe.
    pub(crate) fn from_neighbor_sets(
        mut sets: Vec<Vec<usize>>,
        universe_size: usize,
        source: CoverSource,
    ) -> Cover {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        sets.sort_unstable_by(|a, b| (a[0], a.len(), a).cmp(&(b[0], b.len(), b)));
        sets.dedup();
        Cover {
            source,
            universe_size,
            blocks: sets,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// True when blocks are pairwise disjoint.
    pub fn is_partition(&self) -> bool {
        self.blocks.iter().map(Vec::len).sum::<usize>() == self.universe_size
    }
}

/// Feature values prepared for distance computations: optionally normalized
/// per feature, stored sparsely per user.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    cfg: NeighborhoodConfig,
    n_users: usize,
    n_items: usize,
    rows: Vec<Vec<(usize, f64)>>,
    /// Value an absent rating takes under `MissingPolicy::Zero`.
    missing_value: Vec<f64>,
    /// Per-feature `(min, max)` over post-policy values, raw units.
    ranges: Vec<Option<(f64, f64)>>,
}

impl FeatureSpace {
    pub fn new(matrix: &RatingMatrix, cfg: &NeighborhoodConfig) -> Result<FeatureSpace> {
        cfg.validate()?;
        let (n_users, n_items) = (matrix.n_users(), matrix.n_items());
        let mut ranges = Vec::with_capacity(n_items);
        let mut missing_value = Vec::with_capacity(n_items);
        for k in 0..n_items {
            let col = matrix.col(k);
            let mut range = col.iter().fold(None, |acc: Option<(f64, f64)>, &(_, v)| {
                Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
            });
            if cfg.missing == MissingPolicy::Zero && col.len() < n_users {
                range = Some(range.map_or((0.0, 0.0), |(lo, hi)| (lo.min(0.0), hi.max(0.0))));
            }
            ranges.push(range);
            missing_value.push(scale_value(cfg.normalize, range, 0.0));
        }
        let rows = (0..n_users)
            .map(|u| {
                matrix
                    .row(u)
                    .iter()
                    .map(|&(k, v)| (k, scale_value(cfg.normalize, ranges[k], v)))
                    .collect()
            })
            .collect();
        Ok(FeatureSpace {
            cfg: *cfg,
            n_users,
            n_items,
            rows,
            missing_value,
            ranges,
        })
    }

    pub fn config(&self) -> &NeighborhoodConfig {
        &self.cfg
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Raw-unit `(min, max)` used to normalize feature `k`.
    pub fn range(&self, k: usize) -> Option<(f64, f64)> {
        self.ranges[k]
    }

    /// Scale a raw value of feature `k` the same way stored values were.
    pub fn scale(&self, k: usize, raw: f64) -> f64 {
        scale_value(self.cfg.normalize, self.ranges[k], raw)
    }

    /// Post-policy, post-normalization value; `None` means the coordinate is
    /// skipped.
    pub fn value(&self, user: usize, k: usize) -> Option<f64> {
        let row = &self.rows[user];
        match row.binary_search_by_key(&k, |&(i, _)| i) {
            Ok(pos) => Some(row[pos].1),
            Err(_) => match self.cfg.missing {
                MissingPolicy::Zero => Some(self.missing_value[k]),
                MissingPolicy::Skip => None,
            },
        }
    }

    /// Distance between two users over `features`, by direct evaluation.
    pub fn distance(&self, a: usize, b: usize, features: &[usize]) -> f64 {
        let diffs = features.iter().filter_map(|&k| match (self.value(a, k), self.value(b, k)) {
            (Some(x), Some(y)) => Some((x - y).abs()),
            _ => None,
        });
        match self.cfg.norm {
            Norm::Chebyshev => diffs.fold(0.0, f64::max),
            Norm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }

    fn related(&self, a: usize, b: usize, features: &[usize]) -> bool {
        match self.cfg.norm {
            Norm::Chebyshev => self.cfg.within(self.distance(a, b, features)),
            Norm::Euclidean => {
                let sq: f64 = features
                    .iter()
                    .filter_map(|&k| match (self.value(a, k), self.value(b, k)) {
                        (Some(x), Some(y)) => Some((x - y) * (x - y)),
                        _ => None,
                    })
                    .sum();
                self.cfg.within_squared(sq)
            }
        }
    }

    /// Per-coordinate differences of a user pair over all features, in item
    /// order, skipping coordinates that are equal by construction (both
    /// missing).
    fn pair_diffs(&self, a: usize, b: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (ra, rb) = (&self.rows[a], &self.rows[b]);
        let (mut i, mut j) = (0, 0);
        let zero = self.cfg.missing == MissingPolicy::Zero;
        while i < ra.len() || j < rb.len() {
            let ka = ra.get(i).map_or(usize::MAX, |e| e.0);
            let kb = rb.get(j).map_or(usize::MAX, |e| e.0);
            if ka == kb {
                out.push((ka, (ra[i].1 - rb[j].1).abs()));
                i += 1;
                j += 1;
            } else if ka < kb {
                if zero {
                    out.push((ka, (ra[i].1 - self.missing_value[ka]).abs()));
                }
                i += 1;
            } else {
                if zero {
                    out.push((kb, (rb[j].1 - self.missing_value[kb]).abs()));
                }
                j += 1;
            }
        }
    }

    /// Users with an observed value on `k` sorted by value, users without
    /// one, and the window `observed[lo..hi]` each observed user relates to.
    #[allow(clippy::type_complexity)]
    fn feature_windows(&self, k: usize) -> (Vec<(f64, usize)>, Vec<usize>, Vec<(usize, usize)>) {
        let mut observed: Vec<(f64, usize)> = Vec::with_capacity(self.n_users);
        let mut missing: Vec<usize> = Vec::new();
        for u in 0..self.n_users {
            match self.value(u, k) {
                Some(v) => observed.push((v, u)),
                None => missing.push(u),
            }
        }
        observed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let windows = observed
            .iter()
            .map(|&(v, _)| {
                let lo = observed.partition_point(|&(w, _)| !self.cfg.within((v - w).abs()) && w < v);
                let hi = observed.partition_point(|&(w, _)| w <= v || self.cfg.within((w - v).abs()));
                (lo, hi)
            })
            .collect();
        (observed, missing, windows)
    }

    /// `|R(x_i)|` per user on feature `k`, and the sizes of the distinct
    /// neighbor sets, without building the sets.
    pub fn feature_sizes(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let (observed, missing, windows) = self.feature_windows(k);
        let n = self.n_users;
        let mut per_sample = vec![n; n];
        let mut distinct: Vec<(usize, usize)> = windows.clone();
        for (&(_, u), &(lo, hi)) in observed.iter().zip(&windows) {
            per_sample[u] = hi - lo + missing.len();
        }
        if !missing.is_empty() {
            distinct.push((0, observed.len()));
        }
        distinct.sort_unstable();
        distinct.dedup();
        let blocks = distinct.iter().map(|&(lo, hi)| hi - lo + missing.len()).collect();
        (per_sample, blocks)
    }

    /// Neighbor sets of every user on the single feature `k`.
    pub fn feature_neighbor_sets(&self, k: usize) -> Vec<Vec<usize>> {
        let (observed, missing, windows) = self.feature_windows(k);
        let everyone: Vec<usize> = (0..self.n_users).collect();

        let mut sets = vec![Vec::new(); self.n_users];
        let mut by_window: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (&(_, u), &(lo, hi)) in observed.iter().zip(&windows) {
            let set = by_window.entry((lo, hi)).or_insert_with(|| {
                let mut s: Vec<usize> = observed[lo..hi].iter().map(|&(_, m)| m).collect();
                s.extend_from_slice(&missing);
                s.sort_unstable();
                s
            });
            sets[u] = set.clone();
        }
        for &u in &missing {
            sets[u] = everyone.clone();
        }
        sets
    }

    /// `|R(x_i)|` for every user on the single feature `k`.
    pub fn feature_neighbor_sizes(&self, k: usize) -> Vec<usize> {
        self.feature_sizes(k).0
    }
}

fn scale_value(normalize: bool, range: Option<(f64, f64)>, v: f64) -> f64 {
    if !normalize {
        return v;
    }
    match range {
        Some((lo, hi)) if hi > lo => (v - lo) / (hi - lo),
        _ => 0.0,
    }
}

fn check_sample(matrix: &RatingMatrix, sample: usize) -> Result<()> {
    if sample >= matrix.n_users() {
        return Err(Error::contract(format!(
            "sample {sample} out of range for {} users",
            matrix.n_users()
        )));
    }
    Ok(())
}

fn check_feature(matrix: &RatingMatrix, k: usize) -> Result<()> {
    if k >= matrix.n_items() {
        return Err(Error::contract(format!(
            "feature {k} out of range for {} items",
            matrix.n_items()
        )));
    }
    Ok(())
}

/// `R(x_i)` restricted to `features`, by pairwise evaluation.
pub fn relation_set(
    matrix: &RatingMatrix,
    features: &[usize],
    sample: usize,
    cfg: &NeighborhoodConfig,
) -> Result<Vec<usize>> {
    if features.is_empty() {
        return Err(Error::contract("relation over an empty feature set"));
    }
    check_sample(matrix, sample)?;
    for &k in features {
        check_feature(matrix, k)?;
    }
    let space = FeatureSpace::new(matrix, cfg)?;
    Ok((0..matrix.n_users())
        .filter(|&j| j == sample || space.related(sample, j, features))
        .collect())
}

/// `U/F_k`.
pub fn cover_of_feature(matrix: &RatingMatrix, k: usize, cfg: &NeighborhoodConfig) -> Result<Cover> {
    check_feature(matrix, k)?;
    let space = FeatureSpace::new(matrix, cfg)?;
    Ok(Cover::from_neighbor_sets(
        space.feature_neighbor_sets(k),
        matrix.n_users(),
        CoverSource::Feature(k),
    ))
}

/// `U/¬F_k`.
pub fn cover_of_complement(
    matrix: &RatingMatrix,
    k: usize,
    cfg: &NeighborhoodConfig,
) -> Result<Cover> {
    if matrix.n_items() < 2 {
        return Err(Error::contract("complement of a feature needs at least 2 features"));
    }
    check_feature(matrix, k)?;
    let space = FeatureSpace::new(matrix, cfg)?;
    Ok(ComplementIndex::build(&space).cover(k))
}

/// Neighbor structure over all features, plus for every feature `k` the user
/// pairs that become related once `k` is dropped.
///
/// Dropping a feature never increases a distance, so the relation on `¬F_k`
/// is the full relation plus those extra pairs. One pairwise pass therefore
/// serves all `d` complement covers.
#[derive(Debug, Clone)]
pub struct ComplementIndex {
    n_users: usize,
    n_items: usize,
    base: Vec<Vec<usize>>,
    extra: HashMap<usize, Vec<(usize, usize)>>,
}

impl ComplementIndex {
    pub fn build(space: &FeatureSpace) -> ComplementIndex {
        let n = space.n_users;
        let cfg = space.cfg;
        let per_user: Vec<(Vec<usize>, Vec<(usize, usize)>)> = (0..n)
            .into_par_iter()
            .map_init(Vec::new, |diffs, i| {
                let mut neighbors = Vec::new();
                let mut exceptions = Vec::new();
                for j in i + 1..n {
                    space.pair_diffs(i, j, diffs);
                    match cfg.norm {
                        Norm::Chebyshev => {
                            let (mut max1, mut arg1, mut max2) = (0.0f64, usize::MAX, 0.0f64);
                            for &(k, d) in diffs.iter() {
                                if d > max1 {
                                    max2 = max1;
                                    max1 = d;
                                    arg1 = k;
                                } else if d > max2 {
                                    max2 = d;
                                }
                            }
                            if cfg.within(max1) {
                                neighbors.push(j);
                            } else if cfg.within(max2) {
                                exceptions.push((arg1, j));
                            }
                        }
                        Norm::Euclidean => {
                            let total: f64 = diffs.iter().map(|&(_, d)| d * d).sum();
                            if cfg.within_squared(total) {
                                neighbors.push(j);
                                continue;
                            }
                            let slack = total - cfg.delta * cfg.delta - TOLERANCE;
                            for &(k, d) in diffs.iter() {
                                // Cheap filter, then the exact sum without k.
                                if d * d + 1e-9 * total.max(1.0) < slack {
                                    continue;
                                }
                                let without: f64 = diffs
                                    .iter()
                                    .filter(|&&(f, _)| f != k)
                                    .map(|&(_, d)| d * d)
                                    .sum();
                                if cfg.within_squared(without) {
                                    exceptions.push((k, j));
                                }
                            }
                        }
                    }
                }
                (neighbors, exceptions)
            })
            .collect();

        let mut base: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut extra: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for (i, (neighbors, exceptions)) in per_user.into_iter().enumerate() {
            for j in neighbors {
                base[i].push(j);
                base[j].push(i);
            }
            for (k, j) in exceptions {
                extra.entry(k).or_default().push((i, j));
            }
        }
        for set in &mut base {
            set.sort_unstable();
        }
        ComplementIndex {
            n_users: n,
            n_items: space.n_items,
            base,
            extra,
        }
    }

    /// Neighbor sets on `¬F_k`.
    pub fn neighbor_sets(&self, k: usize) -> Vec<Vec<usize>> {
        let mut sets = self.base.clone();
        if let Some(pairs) = self.extra.get(&k) {
            for &(i, j) in pairs {
                sets[i].push(j);
                sets[j].push(i);
            }
            for s in &mut sets {
                s.sort_unstable();
            }
        }
        sets
    }

    /// Neighbor sets over all features.
    pub fn base_neighbor_sets(&self) -> &[Vec<usize>] {
        &self.base
    }

    /// True when dropping `k` changes the relation.
    pub fn has_extra(&self, k: usize) -> bool {
        self.extra.contains_key(&k)
    }

    pub fn cover(&self, k: usize) -> Cover {
        debug_assert!(k < self.n_items);
        Cover::from_neighbor_sets(self.neighbor_sets(k), self.n_users, CoverSource::Complement(k))
    }
}
