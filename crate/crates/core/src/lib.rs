//! Hyper-class representation of rating data.
//!
//! A rating matrix is read as an information system whose samples are users
//! and whose features are items. Each item induces a neighborhood cover of the
//! users; an information-theoretic measure between the cover of an item and
//! the cover of all remaining items picks one decision item, and its cover
//! (the hyper-class) narrows the candidate neighbors of user-based
//! collaborative filtering.
//!
//! ```
//! use hcrep::{build_hyperclass, fixtures, predict_hyperclass, MeasureKind, NeighborhoodConfig, SimilarityFn};
//!
//! let matrix = fixtures::toy3x3();
//! let hc = build_hyperclass(&matrix, MeasureKind::Ce, &NeighborhoodConfig::default()).unwrap();
//! assert_eq!(hc.decision_feature, 0);
//! let p = predict_hyperclass(&matrix, &hc, 0, 2, 10, &SimilarityFn::default());
//! assert!((1.0..=5.0).contains(&p.value));
//! ```

pub mod error;
pub mod harness;
pub mod hyperclass;
pub mod ingest;
pub mod measures;
pub mod recommender;
pub mod relation;

pub use error::{Error, Result};
pub use hyperclass::{
    build_hyperclass, hyperclass_from_profiles, select_decision_feature, FeatureProfiles, FeatureScores, HyperClass,
};
pub use ingest::{
    load_csv, load_movielens, read_cache, write_cache, CsvSchema, MissingPolicy, Rating, RatingMatrix,
    RatingMatrixBuilder, Scale,
};
pub use measures::{cross_entropy, info_entropy, js_divergence, kl_divergence, Measure, MeasureKind, SizeProfile};
pub use recommender::{
    predict_hyperclass, predict_itemcf, predict_usercf, top_n, Algorithm, CfParams, FallbackLevel, Prediction,
    SimilarityFn, SimilarityKind,
};
pub use relation::{cover_of_complement, cover_of_feature, Cover, CoverSource, NeighborhoodConfig, Norm};

/// Small matrices used by tests, examples and the Python smoke test.
pub mod fixtures {
    use crate::ingest::{RatingMatrix, Scale};

    /// Three users, three items, fully observed on a 1 to 5 scale.
    pub fn toy3x3() -> RatingMatrix {
        let rows = [[1.0, 1.0, 2.0], [1.0, 2.0, 2.0], [3.0, 2.0, 2.0]];
        let rows: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        RatingMatrix::from_dense(&rows, Scale::MOVIELENS).expect("valid fixture")
    }

    /// Three users, four items; user 0 has not rated items 2 and 3.
    pub fn cf3() -> RatingMatrix {
        let rows = vec![
            vec![Some(4.0), Some(2.0), None, None],
            vec![Some(5.0), Some(1.0), Some(5.0), Some(2.0)],
            vec![Some(1.0), Some(4.0), Some(1.0), Some(5.0)],
        ];
        RatingMatrix::from_dense(&rows, Scale::MOVIELENS).expect("valid fixture")
    }
}
