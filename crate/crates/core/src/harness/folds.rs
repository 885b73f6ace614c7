use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RatingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Ratings are dealt into folds; each fold hides its own ratings.
    #[default]
    ByRating,
    /// Users are dealt into folds; a test user keeps a revealed share of
    /// their ratings for training and the rest is predicted.
    ByUser,
}

/// Train and test masks over [`RatingMatrix::entries`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<bool>,
    pub test: Vec<bool>,
}

impl Fold {
    pub fn test_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.test.iter().enumerate().filter(|(_, t)| **t).map(|(p, _)| p)
    }

    pub fn n_test(&self) -> usize {
        self.test.iter().filter(|t| **t).count()
    }
}

pub fn make_folds(
    matrix: &RatingMatrix,
    n_folds: usize,
    seed: u64,
    mode: SplitMode,
    reveal_fraction: f64,
) -> Result<Vec<Fold>> {
    if n_folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {n_folds}")));
    }
    if !(0.0..1.0).contains(&reveal_fraction) {
        return Err(Error::Config(format!("reveal fraction {reveal_fraction} not in [0, 1)")));
    }
    let n = matrix.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of: Vec<Option<usize>> = vec![None; n];
    match mode {
        SplitMode::ByRating => {
            if n < n_folds {
                return Err(Error::contract(format!("{n} ratings cannot fill {n_folds} folds")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (p, &e) in order.iter().enumerate() {
                fold_of[e] = Some(p % n_folds);
            }
        }
        SplitMode::ByUser => {
            let users = matrix.n_users();
            if users < n_folds {
                return Err(Error::contract(format!("{users} users cannot fill {n_folds} folds")));
            }
            let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); users];
            for (p, e) in matrix.entries().iter().enumerate() {
                by_user[e.user].push(p);
            }
            let mut order: Vec<usize> = (0..users).collect();
            order.shuffle(&mut rng);
            for (p, &u) in order.iter().enumerate() {
                let mut own = by_user[u].clone();
                own.shuffle(&mut rng);
                let revealed = (own.len() as f64 * reveal_fraction).floor() as usize;
                for &e in &own[revealed..] {
                    fold_of[e] = Some(p % n_folds);
                }
            }
        }
    }
    Ok((0..n_folds)
        .map(|f| Fold {
            index: f,
            test: fold_of.iter().map(|x| *x == Some(f)).collect(),
            train: fold_of.iter().map(|x| *x != Some(f)).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Scale;

    fn ten_ratings() -> RatingMatrix {
        let rows: Vec<Vec<Option<f64>>> = (0..5).map(|_| vec![Some(3.0), Some(4.0)]).collect();
        RatingMatrix::from_dense(&rows, Scale::MOVIELENS).unwrap()
    }

    #[test]
    fn one_rating_per_fold() {
        let folds = make_folds(&ten_ratings(), 10, 1, SplitMode::ByRating, 0.5).unwrap();
        assert!(folds.iter().all(|f| f.n_test() == 1));
        let mut covered = vec![0; 10];
        for f in &folds {
            for p in f.test_positions() {
                covered[p] += 1;
                assert!(!f.train[p]);
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn seeded() {
        let m = ten_ratings();
        assert_eq!(
            make_folds(&m, 3, 9, SplitMode::ByUser, 0.5).unwrap(),
            make_folds(&m, 3, 9, SplitMode::ByUser, 0.5).unwrap()
        );
    }

    #[test]
    fn by_user_reveals_half() {
        let m = ten_ratings();
        let folds = make_folds(&m, 5, 3, SplitMode::ByUser, 0.5).unwrap();
        for f in &folds {
            // One user per fold, one of two ratings hidden.
            assert_eq!(f.n_test(), 1);
        }
    }

    #[test]
    fn too_few_units() {
        let m = ten_ratings();
        assert!(matches!(
            make_folds(&m, 11, 0, SplitMode::ByRating, 0.5),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            make_folds(&m, 6, 0, SplitMode::ByUser, 0.5),
            Err(Error::Contract(_))
        ));
    }
}
