//! Seeded generator for MovieLens-shaped rating data.
//!
//! Used when the real `u.data` file is not on disk. Item popularity follows a
//! power law, every user rates at least `min_per_user` items, and ratings come
//! from a low-rank bias + factor model rounded onto the 1-5 scale.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{RatingMatrix, RatingMatrixBuilder, RatingRecord, Scale};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    pub min_per_user: usize,
    pub latent_dim: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Same shape as MovieLens-100k: 943 users, 1682 items, 100000 ratings.
    pub fn movielens_100k(seed: u64) -> Self {
        SyntheticSpec {
            n_users: 943,
            n_items: 1682,
            n_ratings: 100_000,
            min_per_user: 20,
            latent_dim: 5,
            seed,
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<Vec<RatingRecord>> {
    let SyntheticSpec {
        n_users,
        n_items,
        n_ratings,
        min_per_user,
        latent_dim,
        seed,
    } = *spec;
    if n_users == 0 || n_items == 0 || min_per_user > n_items {
        return Err(Error::Config(format!("degenerate synthetic spec {spec:?}")));
    }
    if n_ratings < n_users * min_per_user || n_ratings > n_users * n_items {
        return Err(Error::Config(format!(
            "n_ratings {n_ratings} incompatible with {n_users} users x {n_items} items"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Per-user activity: the floor plus a log-normal share of the remainder.
    let activity = LogNormal::new(0.0, 1.0).unwrap();
    let weights: Vec<f64> = (0..n_users).map(|_| activity.sample(&mut rng)).collect();
    let total: f64 = weights.iter().sum();
    let extra = n_ratings - n_users * min_per_user;
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| (min_per_user + (extra as f64 * w / total) as usize).min(n_items))
        .collect();
    let mut assigned: usize = counts.iter().sum();
    let mut u = 0;
    while assigned < n_ratings {
        if counts[u] < n_items {
            counts[u] += 1;
            assigned += 1;
        }
        u = (u + 1) % n_users;
    }

    // Power-law popularity over a shuffled id order.
    let mut popularity: Vec<f64> = (0..n_items).map(|r| 1.0 / (r as f64 + 1.0).powf(0.9)).collect();
    popularity.shuffle(&mut rng);

    let factor = Normal::new(0.0, 0.5 / (latent_dim.max(1) as f64).sqrt()).unwrap();
    let user_bias = Normal::new(0.0, 0.45).unwrap();
    let item_bias = Normal::new(0.0, 0.5).unwrap();
    let noise = Normal::new(0.0, 0.8).unwrap();
    let users: Vec<(f64, Vec<f64>)> = (0..n_users)
        .map(|_| (user_bias.sample(&mut rng), (0..latent_dim).map(|_| factor.sample(&mut rng)).collect()))
        .collect();
    let items: Vec<(f64, Vec<f64>)> = (0..n_items)
        .map(|_| (item_bias.sample(&mut rng), (0..latent_dim).map(|_| factor.sample(&mut rng)).collect()))
        .collect();

    let mut records = Vec::with_capacity(n_ratings);
    for (u, &count) in counts.iter().enumerate() {
        // Weighted sampling without replacement (exponential keys).
        let mut keyed: Vec<(f64, usize)> = (0..n_items)
            .map(|i| {
                let e: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                (-e.ln() / popularity[i], i)
            })
            .collect();
        keyed.select_nth_unstable_by(count - 1, |a, b| a.0.total_cmp(&b.0));
        for &(_, i) in &keyed[..count] {
            let (bu, pu) = &users[u];
            let (bi, qi) = &items[i];
            let dot: f64 = pu.iter().zip(qi).map(|(a, b)| a * b).sum();
            let raw = 3.53 + bu + bi + 8.0 * dot + noise.sample(&mut rng);
            records.push(RatingRecord {
                user_id: (u + 1).to_string(),
                item_id: (i + 1).to_string(),
                rating: raw.round().clamp(1.0, 5.0),
                timestamp: None,
            });
        }
    }
    records.shuffle(&mut rng);
    for (t, r) in records.iter_mut().enumerate() {
        r.timestamp = Some(874_724_710 + t as i64 * 60);
    }
    Ok(records)
}

pub fn to_matrix(records: &[RatingRecord]) -> Result<RatingMatrix> {
    let mut builder = RatingMatrixBuilder::new(Scale::MOVIELENS);
    for r in records {
        builder.push(&r.user_id, &r.item_id, r.rating)?;
    }
    Ok(builder.finish())
}

/// Write records in MovieLens `u.data` layout.
pub fn write_movielens(records: &[RatingRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.user_id,
            r.item_id,
            r.rating,
            r.timestamp.unwrap_or(0)
        )?;
    }
    out.flush()?;
    Ok(())
}
