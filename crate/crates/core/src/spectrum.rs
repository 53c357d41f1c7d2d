//! Landau levels of the magnetic Laplacian below the critical energy:
//! `λ_{k,m} = kB(m + ½) − m(m + 1)/2` for `m = 0, …, ⌊kB⌋ − 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub k: u64,
    pub m: u64,
    pub lambda: f64,
    pub scaled: f64,
}

fn check(k: u64, b: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidConfig(format!("B must be positive, got {b}")));
    }
    Ok(())
}

/// `kB(m + ½) − m(m + 1)/2`.
///
/// The product `kB` is carried as an unevaluated sum `p + e` (exact by
/// `fma`) and the triangular number is an exact integer, so the only
/// roundings are in the final two operations.
pub fn level(k: u64, b: f64, m: u64) -> f64 {
    let kf = k as f64;
    let p = kf * b;
    let e = kf.mul_add(b, -p);
    let half = m as f64 + 0.5;
    let tri = (m * (m + 1) / 2) as f64;
    p.mul_add(half, -tri) + e * half
}

/// `N_k = ⌊kB⌋`. Products within a relative `1e-12` of an integer are
/// snapped to it, so that `B = 0.29, k = 100` gives `29` although the
/// stored double is slightly below `0.29`.
pub fn level_count(k: u64, b: f64) -> u64 {
    let p = k as f64 * b;
    let n = p.round();
    if (p - n).abs() <= 1e-12 * p.max(1.0) {
        n as u64
    } else {
        p.floor() as u64
    }
}

pub fn entry(k: u64, b: f64, m: u64) -> SpectrumEntry {
    let lambda = level(k, b, m);
    let kf = k as f64;
    SpectrumEntry {
        k,
        m,
        lambda,
        scaled: lambda / (kf * kf),
    }
}

pub fn ladder(k: u64, b: f64) -> Result<Vec<SpectrumEntry>> {
    check(k, b)?;
    Ok((0..level_count(k, b)).map(|m| entry(k, b, m)).collect())
}

/// The level whose scaled value `λ/k²` is nearest `E`, ties to smaller `m`.
///
/// The ladder is strictly increasing in `m`, so this is a binary search.
pub fn select_level(k: u64, b: f64, e: f64) -> Result<SpectrumEntry> {
    check(k, b)?;
    let critical = 0.5 * b * b;
    if !(e >= 0.0) {
        return Err(Error::InvalidArgument(format!("E must be nonnegative, got {e}")));
    }
    if e >= critical {
        return Err(Error::AboveLadder {
            energy: e,
            critical,
        });
    }
    let n = level_count(k, b);
    if n == 0 {
        return Err(Error::InvalidArgument(format!(
            "empty ladder: kB = {} < 1",
            k as f64 * b
        )));
    }
    // First m with scaled(m) >= E.
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if entry(k, b, mid).scaled < e {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let above = (lo < n).then(|| entry(k, b, lo));
    let below = (lo > 0).then(|| entry(k, b, lo - 1));
    Ok(match (below, above) {
        (Some(x), Some(y)) => {
            if (x.scaled - e).abs() <= (y.scaled - e).abs() {
                x
            } else {
                y
            }
        }
        (Some(x), None) => x,
        (None, Some(y)) => y,
        (None, None) => unreachable!("ladder is nonempty"),
    })
}

/// Distance of the scaled top of the ladder from `E_c`, at both candidate
/// top indices `m = N_k − 1` (the last listed level) and `m = N_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalGap {
    pub k: u64,
    pub n_k: u64,
    /// `|λ_{k,N_k−1}/k² − E_c|`; `None` when the ladder is empty.
    pub last_level: Option<f64>,
    /// `|λ_{k,N_k}/k² − E_c|`.
    pub next_level: f64,
}

impl CriticalGap {
    /// Larger of the two gaps.
    pub fn max(&self) -> f64 {
        self.last_level.unwrap_or(0.0).max(self.next_level)
    }
}

pub fn critical_gap(k: u64, b: f64) -> Result<CriticalGap> {
    check(k, b)?;
    let critical = 0.5 * b * b;
    let n_k = level_count(k, b);
    let gap = |m| (entry(k, b, m).scaled - critical).abs();
    Ok(CriticalGap {
        k,
        n_k,
        last_level: (n_k > 0).then(|| gap(n_k - 1)),
        next_level: gap(n_k),
    })
}

/// CSV with columns `k, m, lambda, scaled`.
pub fn write_ladder_csv<W: Write>(out: W, entries: &[SpectrumEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "m", "lambda", "scaled"])?;
    for e in entries {
        w.write_record([
            e.k.to_string(),
            e.m.to_string(),
            fmt_f64(e.lambda),
            fmt_f64(e.scaled),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_landmarks() {
        let l = ladder(10, 1.0).unwrap();
        assert_eq!(l.len(), 10);
        assert_eq!(l[0].lambda, 5.0);
        assert_eq!(l[9].lambda, 50.0);
        assert_eq!(l[9].scaled, 0.5);
        for k in [1, 7, 123] {
            assert_eq!(level(k, 1.5, 0), 0.75 * k as f64);
        }
    }

    #[test]
    fn level_count_snaps_near_integers() {
        assert_eq!(level_count(100, 0.29), 29);
        assert_eq!(level_count(7, 1.5), 10);
        assert_eq!(level_count(3, 0.2), 0);
    }

    #[test]
    fn select_landmarks() {
        assert_eq!(select_level(37, 1.0, 0.0).unwrap().m, 0);
        let s = select_level(100, 1.0, 0.25).unwrap();
        assert_eq!(s.m, 29);
        assert!((s.scaled - 0.2515).abs() < 1e-15);
        assert!(matches!(
            select_level(10, 1.0, 0.5),
            Err(Error::AboveLadder { .. })
        ));
    }

    #[test]
    fn ties_go_to_smaller_m() {
        // k = 2, B = 1: scaled levels 0.25 and 0.5; 0.375 is equidistant.
        let s = select_level(2, 1.0, 0.375).unwrap();
        assert_eq!(s.m, 0);
    }

    #[test]
    fn critical_gaps() {
        let g = critical_gap(10, 1.0).unwrap();
        assert_eq!(g.last_level, Some(0.0));
        assert_eq!(g.next_level, 0.0);

        let g = critical_gap(7, 1.5).unwrap();
        assert_eq!(g.n_k, 10);
        assert!(g.last_level.unwrap() > 0.0 && g.next_level > 0.0);
    }
}
