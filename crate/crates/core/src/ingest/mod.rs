//! Rating data ingestion.
//!
//! Every loader funnels records through [`RatingMatrixBuilder`], which assigns
//! user and item indices by first appearance and resolves repeated
//! `(user, item)` pairs by keeping the last rating seen.

mod cache;
pub mod synthetic;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};

/// Closed rating interval declared by a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

impl Scale {
    pub const MOVIELENS: Scale = Scale { min: 1.0, max: 5.0 };
    pub const JESTER: Scale = Scale {
        min: -10.0,
        max: 10.0,
    };

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(Error::Config(format!("invalid rating scale ({min}, {max})")));
        }
        Ok(Scale { min, max })
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

/// How absent ratings enter feature-space computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Missing ratings read as `0.0`; every user takes part in every feature.
    #[default]
    Zero,
    /// Missing ratings are left out.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

/// One stored rating, addressed by dense indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Sparse users x items rating matrix.
///
/// Users are the samples of the dataset and items its features. Entries keep
/// the order in which their `(user, item)` pair was first ingested, which is
/// also the order used for fold assignment and the canonical CSV.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    scale: Scale,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    entries: Vec<Rating>,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    duplicates: usize,
}

impl PartialEq for RatingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.scale == other.scale
            && self.user_ids == other.user_ids
            && self.item_ids == other.item_ids
            && self.entries == other.entries
    }
}

impl RatingMatrix {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    /// Number of stored ratings.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Records dropped because a later record rated the same pair.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    /// Entries in ingestion order.
    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    /// Ratings of `user`, sorted by item index.
    pub fn row(&self, user: usize) -> &[(usize, f64)] {
        &self.rows[user]
    }

    /// Ratings of `item`, sorted by user index.
    pub fn col(&self, item: usize) -> &[(usize, f64)] {
        &self.cols[item]
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        let row = self.rows.get(user)?;
        row.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| row[pos].1)
    }

    pub fn user_mean(&self, user: usize) -> Option<f64> {
        mean(self.rows[user].iter().map(|&(_, r)| r))
    }

    pub fn item_mean(&self, item: usize) -> Option<f64> {
        mean(self.cols[item].iter().map(|&(_, r)| r))
    }

    pub fn global_mean(&self) -> Option<f64> {
        mean(self.entries.iter().map(|e| e.value))
    }

    /// A matrix over the same users, items and indices holding only the
    /// entries whose position in [`entries`](Self::entries) passes `keep`.
    pub fn retain(&self, mut keep: impl FnMut(usize, &Rating) -> bool) -> RatingMatrix {
        let entries: Vec<Rating> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(idx, e)| keep(*idx, e))
            .map(|(_, e)| *e)
            .collect();
        RatingMatrix::from_parts(
            self.scale,
            self.user_ids.clone(),
            self.item_ids.clone(),
            entries,
            0,
        )
    }

    /// Replace the value of the entry at `position`, keeping indices intact.
    /// Used by leakage tests; the value is not validated against the scale.
    pub fn with_value_at(&self, position: usize, value: f64) -> RatingMatrix {
        let mut entries = self.entries.clone();
        entries[position].value = value;
        RatingMatrix::from_parts(
            self.scale,
            self.user_ids.clone(),
            self.item_ids.clone(),
            entries,
            self.duplicates,
        )
    }

    pub(crate) fn from_parts(
        scale: Scale,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        entries: Vec<Rating>,
        duplicates: usize,
    ) -> RatingMatrix {
        let mut rows = vec![Vec::new(); user_ids.len()];
        let mut cols = vec![Vec::new(); item_ids.len()];
        for e in &entries {
            rows[e.user].push((e.item, e.value));
            cols[e.item].push((e.user, e.value));
        }
        for r in &mut rows {
            r.sort_unstable_by_key(|&(i, _)| i);
        }
        for c in &mut cols {
            c.sort_unstable_by_key(|&(u, _)| u);
        }
        let user_index = user_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let item_index = item_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        RatingMatrix {
            scale,
            user_ids,
            item_ids,
            user_index,
            item_index,
            entries,
            rows,
            cols,
            duplicates,
        }
    }

    /// Dense matrix from rows of optional ratings; ids are the row and column
    /// positions rendered as decimal strings. Handy for fixtures.
    pub fn from_dense(rows: &[Vec<Option<f64>>], scale: Scale) -> Result<RatingMatrix> {
        let n_items = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut builder = RatingMatrixBuilder::new(scale);
        builder.reserve_ids(rows.len(), n_items);
        for (u, row) in rows.iter().enumerate() {
            for (i, value) in row.iter().enumerate() {
                if let Some(v) = value {
                    builder.push(&u.to_string(), &i.to_string(), *v)?;
                }
            }
        }
        Ok(builder.finish())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Incremental construction with first-appearance indexing and
/// last-write-wins deduplication.
#[derive(Debug)]
pub struct RatingMatrixBuilder {
    scale: Scale,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    positions: HashMap<(usize, usize), usize>,
    entries: Vec<Rating>,
    duplicates: usize,
}

impl RatingMatrixBuilder {
    pub fn new(scale: Scale) -> Self {
        RatingMatrixBuilder {
            scale,
            user_ids: Vec::new(),
            item_ids: Vec::new(),
            user_index: HashMap::new(),
            item_index: HashMap::new(),
            positions: HashMap::new(),
            entries: Vec::new(),
            duplicates: 0,
        }
    }

    /// Pre-register ids "0".."n_users-1" and "0".."n_items-1" so that dense
    /// fixtures keep positional indices even for empty rows or columns.
    pub fn reserve_ids(&mut self, n_users: usize, n_items: usize) {
        for u in 0..n_users {
            intern(&mut self.user_ids, &mut self.user_index, &u.to_string());
        }
        for i in 0..n_items {
            intern(&mut self.item_ids, &mut self.item_index, &i.to_string());
        }
    }

    pub fn push(&mut self, user_id: &str, item_id: &str, rating: f64) -> Result<()> {
        if !rating.is_finite() || !self.scale.contains(rating) {
            return Err(Error::Validation(format!(
                "rating {rating} for ({user_id}, {item_id}) outside scale [{}, {}]",
                self.scale.min, self.scale.max
            )));
        }
        let user = intern(&mut self.user_ids, &mut self.user_index, user_id);
        let item = intern(&mut self.item_ids, &mut self.item_index, item_id);
        match self.positions.get(&(user, item)) {
            Some(&pos) => {
                self.entries[pos].value = rating;
                self.duplicates += 1;
            }
            None => {
                self.positions.insert((user, item), self.entries.len());
                self.entries.push(Rating {
                    user,
                    item,
                    value: rating,
                });
            }
        }
        Ok(())
    }

    pub fn finish(self) -> RatingMatrix {
        if self.duplicates > 0 {
            log::warn!(
                "{} duplicate (user, item) records resolved by last write",
                self.duplicates
            );
        }
        RatingMatrix::from_parts(
            self.scale,
            self.user_ids,
            self.item_ids,
            self.entries,
            self.duplicates,
        )
    }
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, id: &str) -> usize {
    if let Some(&i) = index.get(id) {
        return i;
    }
    let i = ids.len();
    ids.push(id.to_owned());
    index.insert(id.to_owned(), i);
    i
}

/// Load a MovieLens `u.data` style file: `user \t item \t rating \t timestamp`,
/// no header, ratings on the 1-5 scale.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<RatingMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut builder = RatingMatrixBuilder::new(Scale::MOVIELENS);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_movielens_line(&line).map_err(|message| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            message,
        })?;
        builder.push(&record.user_id, &record.item_id, record.rating)?;
    }
    Ok(builder.finish())
}

fn parse_movielens_line(line: &str) -> std::result::Result<RatingRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let rating = fields[2]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad rating {:?}: {e}", fields[2]))?;
    let timestamp = fields[3]
        .trim()
        .parse::<i64>()
        .map_err(|e| format!("bad timestamp {:?}: {e}", fields[3]))?;
    Ok(RatingRecord {
        user_id: fields[0].trim().to_owned(),
        item_id: fields[1].trim().to_owned(),
        rating,
        timestamp: Some(timestamp),
    })
}

/// Column names used by [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub user: String,
    pub item: String,
    pub rating: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            user: "user".into(),
            item: "item".into(),
            rating: "rating".into(),
        }
    }
}

/// Load a headed CSV file with named user, item and rating columns.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema, scale: Scale) -> Result<RatingMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column {name:?} not found in {}", path.display())))
    };
    let (uc, ic, rc) = (column(&schema.user)?, column(&schema.item)?, column(&schema.rating)?);

    let mut builder = RatingMatrixBuilder::new(scale);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| record.get(c).unwrap_or("");
        let rating = field(rc).parse::<f64>().map_err(|e| Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("bad rating {:?}: {e}", field(rc)),
        })?;
        builder.push(field(uc), field(ic), rating)?;
    }
    Ok(builder.finish())
}

/// Write the canonical CSV (`user,item,rating`, LF endings) in entry order,
/// so that [`load_csv`] with the default schema rebuilds identical indices.
pub fn write_canonical_csv(matrix: &RatingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    out.write_record(["user", "item", "rating"])?;
    for e in matrix.entries() {
        out.write_record([
            matrix.user_ids[e.user].as_str(),
            matrix.item_ids[e.item].as_str(),
            &e.value.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// The values of one item column as `(user, value)` pairs.
///
/// [`MissingPolicy::Zero`] yields every user, reading missing ratings as 0;
/// [`MissingPolicy::Skip`] yields only users who rated the item.
pub fn densify_feature(
    matrix: &RatingMatrix,
    feature: usize,
    policy: MissingPolicy,
) -> Result<Vec<(usize, f64)>> {
    if feature >= matrix.n_items() {
        return Err(Error::contract(format!(
            "feature {feature} out of range for {} items",
            matrix.n_items()
        )));
    }
    let col = matrix.col(feature);
    Ok(match policy {
        MissingPolicy::Skip => col.to_vec(),
        MissingPolicy::Zero => {
            let mut out: Vec<(usize, f64)> = (0..matrix.n_users()).map(|u| (u, 0.0)).collect();
            for &(u, r) in col {
                out[u].1 = r;
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_movielens_file() {
        let f = write_tmp("");
        let m = load_movielens(f.path()).unwrap();
        assert_eq!((m.n_users(), m.n_items(), m.len()), (0, 0, 0));
    }

    #[test]
    fn duplicate_pair_last_write_wins() {
        let f = write_tmp("1\t10\t3\t0\n1\t10\t5\t1\n");
        let m = load_movielens(f.path()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), Some(5.0));
        assert_eq!(m.duplicates(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("1\t10\t3\t0\n1\t10\n");
        match load_movielens(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_scale_rating_rejected() {
        let f = write_tmp("1\t10\t6\t0\n");
        assert!(matches!(load_movielens(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_three_rows() {
        let f = write_tmp("user,item,rating\na,x,1\nb,x,2\na,y,3\n");
        let m = load_csv(f.path(), &CsvSchema::default(), Scale::MOVIELENS).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!((m.n_users(), m.n_items()), (2, 2));
        assert_eq!(m.get(0, 1), Some(3.0));
    }

    #[test]
    fn csv_rating_out_of_scale() {
        let f = write_tmp("user,item,rating\na,x,7\n");
        let err = load_csv(f.path(), &CsvSchema::default(), Scale::MOVIELENS).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn csv_missing_column_and_bad_number() {
        let f = write_tmp("uid,item,rating\na,x,1\n");
        let err = load_csv(f.path(), &CsvSchema::default(), Scale::MOVIELENS).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));

        let f = write_tmp("user,item,rating\na,x,1\na,y,good\n");
        match load_csv(f.path(), &CsvSchema::default(), Scale::MOVIELENS) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_custom_schema_and_jester_scale() {
        let f = write_tmp("joke,rater,score\nj1,u1,-9.5\nj2,u1,10\n");
        let schema = CsvSchema {
            user: "rater".into(),
            item: "joke".into(),
            rating: "score".into(),
        };
        let m = load_csv(f.path(), &schema, Scale::JESTER).unwrap();
        assert_eq!((m.n_users(), m.n_items()), (1, 2));
        assert_eq!(m.get(0, 0), Some(-9.5));
    }

    fn three_users() -> RatingMatrix {
        RatingMatrix::from_dense(
            &[vec![None], vec![Some(4.0)], vec![None]],
            Scale::MOVIELENS,
        )
        .unwrap()
    }

    #[test]
    fn densify_policies() {
        let m = three_users();
        assert_eq!(
            densify_feature(&m, 0, MissingPolicy::Zero).unwrap(),
            vec![(0, 0.0), (1, 4.0), (2, 0.0)]
        );
        assert_eq!(densify_feature(&m, 0, MissingPolicy::Skip).unwrap(), vec![(1, 4.0)]);
        assert!(matches!(
            densify_feature(&m, 1, MissingPolicy::Zero),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn densify_fully_rated_column_policies_agree() {
        let m = RatingMatrix::from_dense(
            &[vec![Some(1.0)], vec![Some(2.0)], vec![Some(5.0)]],
            Scale::MOVIELENS,
        )
        .unwrap();
        assert_eq!(
            densify_feature(&m, 0, MissingPolicy::Zero).unwrap(),
            densify_feature(&m, 0, MissingPolicy::Skip).unwrap()
        );
    }

    #[test]
    fn canonical_csv_round_trip_preserves_indices() {
        // Item "c" first appears after user "v", so row-major output would
        // reorder item indices; entry order must not.
        let f = write_tmp("u\ta\t1\t0\nv\tb\t2\t0\nu\tc\t3\t0\nv\ta\t4\t0\n");
        let m = load_movielens(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_canonical_csv(&m, out.path()).unwrap();
        let back = load_csv(out.path(), &CsvSchema::default(), m.scale()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn retain_keeps_index_space() {
        let m = RatingMatrix::from_dense(
            &[vec![Some(1.0), Some(2.0)], vec![None, Some(3.0)]],
            Scale::MOVIELENS,
        )
        .unwrap();
        let sub = m.retain(|idx, _| idx != 1);
        assert_eq!((sub.n_users(), sub.n_items(), sub.len()), (2, 2, 2));
        assert_eq!(sub.get(0, 1), None);
        assert_eq!(sub.get(1, 1), Some(3.0));
    }
}
