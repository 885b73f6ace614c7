//! Published reference results, reprinted next to measured ones in reports.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedResult {
    pub dataset: &'static str,
    pub algorithm: &'static str,
    pub rmse: f64,
    pub mae: f64,
    pub seconds: f64,
}

const fn row(dataset: &'static str, algorithm: &'static str, rmse: f64, mae: f64, seconds: f64) -> PublishedResult {
    PublishedResult {
        dataset,
        algorithm,
        rmse,
        mae,
        seconds,
    }
}

pub const PUBLISHED: &[PublishedResult] = &[
    row("movielens-100k", "usercf", 0.9942, 0.9937, 40.00),
    row("movielens-100k", "itemcf", 0.8791, 1.1261, 1515.24),
    row("movielens-100k", "llae", 0.8361, 1.0292, 32.82),
    row("movielens-100k", "jca", 0.7508, 0.7260, 45.19),
    row("movielens-100k", "xpl_cf", 0.3458, 1.4883, 29.91),
    row("movielens-100k", "cf_ce", 0.1218, 0.1594, 14.74),
    row("movielens-100k", "cf_kl", 0.1971, 0.2593, 13.60),
    row("movielens-100k", "cf_js", 0.1824, 0.2312, 9.97),
    row("jester", "usercf", 0.9992, 0.9992, 8238.22),
    row("jester", "itemcf", 4.4262, 3.1380, 1597.31),
    row("jester", "llae", 1.8508, 1.4732, 1522.64),
    row("jester", "jca", 1.8490, 1.4719, 776.23),
    row("jester", "xpl_cf", 0.0863, 0.2334, 341.47),
    row("jester", "cf_ce", 0.0274, 0.0231, 145.79),
    row("jester", "cf_kl", 0.0467, 0.0476, 135.49),
    row("jester", "cf_js", 0.0501, 0.0540, 135.69),
    row("rating", "usercf", 4.2110, 3.7891, 499.14),
    row("rating", "itemcf", 4.2950, 4.2815, 3490.61),
    row("rating", "llae", 1.4770, 1.1748, 3490.61),
    row("rating", "jca", 0.8021, 0.6016, 146.63),
    row("rating", "xpl_cf", 0.7384, 0.6798, 567.42),
    row("rating", "cf_ce", 0.4132, 0.3388, 208.39),
    row("rating", "cf_kl", 0.4304, 0.3703, 212.94),
    row("rating", "cf_js", 0.4274, 0.3996, 207.50),
    row("book", "usercf", 3.9498, 3.4418, 22.24),
    row("book", "itemcf", 0.3894, 0.0608, 33.88),
    row("book", "llae", 0.5726, 0.4521, 9.47),
    row("book", "jca", 0.4183, 0.6089, 4.98),
    row("book", "xpl_cf", 0.8087, 2.1733, 20.19),
    row("book", "cf_ce", 0.2413, 0.2639, 0.37),
    row("book", "cf_kl", 0.3135, 0.3607, 0.37),
    row("book", "cf_js", 0.3534, 0.4562, 0.37),
];

/// Published rows for a dataset label such as `movielens-100k`.
pub fn published_for(dataset: &str) -> Vec<PublishedResult> {
    PUBLISHED.iter().filter(|r| r.dataset == dataset).copied().collect()
}
