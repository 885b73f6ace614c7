//! Binary matrix cache written by `hcrep ingest`.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes   "HCREPMX\0"
//! version    u32       currently 1
//! scale      f64 f64   min, max
//! n_users    u64
//! n_items    u64
//! n_entries  u64
//! user ids   n_users  x (u32 byte length, UTF-8 bytes)
//! item ids   n_items  x (u32 byte length, UTF-8 bytes)
//! entries    n_entries x (u32 user, u32 item, f64 rating), ingestion order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Rating, RatingMatrix, Scale};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: [u8; 8] = *b"HCREPMX\0";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache(matrix: &RatingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&matrix.scale().min.to_le_bytes())?;
    w.write_all(&matrix.scale().max.to_le_bytes())?;
    w.write_all(&(matrix.n_users() as u64).to_le_bytes())?;
    w.write_all(&(matrix.n_items() as u64).to_le_bytes())?;
    w.write_all(&(matrix.len() as u64).to_le_bytes())?;
    for id in matrix.user_ids().iter().chain(matrix.item_ids()) {
        let len = u32::try_from(id.len()).map_err(|_| Error::Format("identifier too long".into()))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    for e in matrix.entries() {
        w.write_all(&(e.user as u32).to_le_bytes())?;
        w.write_all(&(e.item as u32).to_le_bytes())?;
        w.write_all(&e.value.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("unexpected end of file".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.bytes()?))
            .map_err(|_| Error::Format("count does not fit in memory".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("unexpected end of file".into()))?;
        String::from_utf8(buf).map_err(|_| Error::Format("identifier is not UTF-8".into()))
    }
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<RatingMatrix> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    if r.bytes::<8>()? != CACHE_MAGIC {
        return Err(Error::Format("bad magic header".into()));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let scale = Scale::new(r.f64()?, r.f64()?).map_err(|e| Error::Format(e.to_string()))?;
    let (n_users, n_items, n_entries) = (r.u64()?, r.u64()?, r.u64()?);
    let user_ids = (0..n_users).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let item_ids = (0..n_items).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(n_entries.min(1 << 24));
    for _ in 0..n_entries {
        let (user, item, value) = (r.u32()? as usize, r.u32()? as usize, r.f64()?);
        if user >= n_users || item >= n_items {
            return Err(Error::Format(format!("entry ({user}, {item}) out of range")));
        }
        entries.push(Rating { user, item, value });
    }
    Ok(RatingMatrix::from_parts(scale, user_ids, item_ids, entries, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_empty_rows() {
        let m = RatingMatrix::from_dense(
            &[vec![Some(1.0), None], vec![None, None], vec![None, Some(4.5)]],
            Scale::MOVIELENS,
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_cache(&m, f.path()).unwrap();
        let back = read_cache(f.path()).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.n_users(), 3);
    }

    #[test]
    fn rejects_foreign_files() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), b"user,item,rating\n").unwrap();
        assert!(matches!(read_cache(f.path()), Err(Error::Format(_))));
    }
}
