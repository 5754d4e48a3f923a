//! Möbius function tables.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Magic prefix of the on-disk table format.
pub const CACHE_MAGIC: [u8; 8] = *b"MOBIUS\x00\x01";
pub const CACHE_HEADER_LEN: usize = 16;

const DEFAULT_SEGMENT: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SieveMethod {
    #[default]
    Linear,
    /// Segmented sieve over blocks of the given length, blocks processed in parallel.
    Segmented { segment: usize },
}

impl SieveMethod {
    pub fn segmented() -> Self {
        SieveMethod::Segmented { segment: DEFAULT_SEGMENT }
    }
}

/// μ(n) for `1 <= n <= n_max`. Read-only once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobiusTable {
    // values[n - 1] = μ(n)
    values: Vec<i8>,
}

fn alloc_i8(len: usize, fill: i8) -> Result<Vec<i8>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| Error::Allocation(len as u64))?;
    v.resize(len, fill);
    Ok(v)
}

fn small_primes(limit: usize) -> Vec<u32> {
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u32);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

impl MobiusTable {
    pub fn new(n_max: u64) -> Result<Self> {
        Self::with_method(n_max, SieveMethod::Linear)
    }

    pub fn with_method(n_max: u64, method: SieveMethod) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidArgument("sieve bound must be at least 1".into()));
        }
        if n_max > 1_000_000_000 {
            return Err(Error::InvalidArgument(format!(
                "sieve bound {n_max} exceeds the supported maximum 10^9"
            )));
        }
        let n = n_max as usize;
        let values = match method {
            SieveMethod::Linear => linear_sieve(n)?,
            SieveMethod::Segmented { segment } => segmented_sieve(n, segment.max(64))?,
        };
        Ok(MobiusTable { values })
    }

    pub fn n_max(&self) -> u64 {
        self.values.len() as u64
    }

    /// μ(n). Panics if `n == 0` or `n > n_max`.
    #[inline]
    pub fn mu(&self, n: u64) -> i8 {
        self.values[(n - 1) as usize]
    }

    pub fn get(&self, n: u64) -> Option<i8> {
        if n == 0 {
            return None;
        }
        self.values.get((n - 1) as usize).copied()
    }

    /// Values μ(1), μ(2), … as a slice.
    pub fn as_slice(&self) -> &[i8] {
        &self.values
    }

    pub fn require(&self, n: u64) -> Result<()> {
        if n > self.n_max() {
            Err(Error::SieveTooSmall { have: self.n_max(), need: n })
        } else {
            Ok(())
        }
    }

    /// Mertens function M(n) = Σ_{k≤n} μ(k).
    pub fn mertens(&self, n: u64) -> Result<i64> {
        self.require(n)?;
        Ok(self.values[..n as usize].iter().map(|&v| v as i64).sum())
    }

    /// Number of squarefree integers in `[1, n]`.
    pub fn squarefree_count(&self, n: u64) -> Result<u64> {
        self.require(n)?;
        Ok(self.values[..n as usize].iter().filter(|&&v| v != 0).count() as u64)
    }

    /// Serialize as a 16-byte header (magic, little-endian `n_max`) followed
    /// by one signed byte per value, μ(1) first.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&self.n_max().to_le_bytes())?;
        let bytes: Vec<u8> = self.values.iter().map(|&v| v as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; CACHE_HEADER_LEN];
        r.read_exact(&mut header)?;
        if header[..8] != CACHE_MAGIC {
            return Err(Error::Parse("not a Möbius table file (bad magic)".into()));
        }
        let n_max = u64::from_le_bytes(header[8..16].try_into().expect("8 header bytes"));
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() as u64 != n_max {
            return Err(Error::Parse(format!(
                "table header says {n_max} entries, file holds {}",
                bytes.len()
            )));
        }
        let values: Vec<i8> = bytes.into_iter().map(|b| b as i8).collect();
        if values.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::Parse("table contains values outside {-1, 0, 1}".into()));
        }
        Ok(MobiusTable { values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn linear_sieve(n: usize) -> Result<Vec<i8>> {
    // index i holds μ(i); shifted down by one at the end
    let mut mu = alloc_i8(n + 1, 0)?;
    let mut composite = vec![0u64; n / 64 + 1];
    let mut primes: Vec<u32> = Vec::new();
    mu[1] = 1;
    for i in 2..=n {
        if composite[i / 64] >> (i % 64) & 1 == 0 {
            primes.push(i as u32);
            mu[i] = -1;
        }
        for &p in &primes {
            let m = i * p as usize;
            if m > n {
                break;
            }
            composite[m / 64] |= 1 << (m % 64);
            if i % p as usize == 0 {
                mu[m] = 0;
                break;
            }
            mu[m] = -mu[i];
        }
    }
    mu.remove(0);
    Ok(mu)
}

fn segmented_sieve(n: usize, segment: usize) -> Result<Vec<i8>> {
    let root = (n as f64).sqrt() as usize + 1;
    let primes = small_primes(root);
    let mut out = alloc_i8(n, 1)?;
    out.par_chunks_mut(segment).enumerate().for_each(|(block, chunk)| {
        let lo = block * segment + 1;
        let mut rest: Vec<u64> = (lo..lo + chunk.len()).map(|v| v as u64).collect();
        let hi = lo + chunk.len();
        for &p in &primes {
            let p = p as usize;
            if p * p > hi {
                break;
            }
            let start = lo.div_ceil(p) * p;
            let mut m = start;
            while m < hi {
                let i = m - lo;
                chunk[i] = -chunk[i];
                rest[i] /= p as u64;
                m += p;
            }
            let sq = p * p;
            let mut m = lo.div_ceil(sq) * sq;
            while m < hi {
                chunk[m - lo] = 0;
                m += sq;
            }
        }
        for (v, r) in chunk.iter_mut().zip(&rest) {
            if *r > 1 && *v != 0 {
                *v = -*v;
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu_by_factoring(mut n: u64) -> i8 {
        let mut sign = 1i8;
        let mut p = 2;
        while p * p <= n {
            if n.is_multiple_of(p) {
                n /= p;
                if n.is_multiple_of(p) {
                    return 0;
                }
                sign = -sign;
            }
            p += 1;
        }
        if n > 1 {
            sign = -sign;
        }
        sign
    }

    #[test]
    fn small_values() {
        let t = MobiusTable::new(30).unwrap();
        assert_eq!(t.mu(1), 1);
        assert_eq!(t.mu(2), -1);
        assert_eq!(t.mu(12), 0);
        assert_eq!(t.mu(30), -1);
        assert_eq!(t.mertens(10).unwrap(), -1);
    }

    #[test]
    fn matches_trial_division() {
        let t = MobiusTable::new(5000).unwrap();
        for n in 1..=5000 {
            assert_eq!(t.mu(n), mu_by_factoring(n), "n = {n}");
        }
    }

    #[test]
    fn segmented_matches_linear() {
        for &n in &[1u64, 2, 97, 1000, 123_457] {
            let a = MobiusTable::new(n).unwrap();
            let b = MobiusTable::with_method(n, SieveMethod::Segmented { segment: 1000 }).unwrap();
            assert_eq!(a, b, "n = {n}");
        }
    }

    #[test]
    fn rejects_zero_bound() {
        assert!(matches!(MobiusTable::new(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn too_small_is_reported() {
        let t = MobiusTable::new(10).unwrap();
        assert_eq!(t.mertens(11), Err(Error::SieveTooSmall { have: 10, need: 11 }));
    }

    #[test]
    fn file_round_trip_and_layout() {
        let t = MobiusTable::new(100).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), CACHE_HEADER_LEN + 100);
        assert_eq!(&buf[..8], &CACHE_MAGIC);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 100);
        assert_eq!(buf[16] as i8, 1);
        assert_eq!(buf[17] as i8, -1);
        assert_eq!(MobiusTable::read_from(&buf[..]).unwrap(), t);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(MobiusTable::read_from(&bad[..]).is_err());
        assert!(MobiusTable::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
