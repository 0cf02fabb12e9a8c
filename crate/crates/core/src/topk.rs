//! Exact top-k selection over label scores.
//!
//! Ordering contract used everywhere in this crate: higher score wins, and
//! equal scores resolve in favour of the *smaller label index*. That makes
//! every downstream rule deterministic, which in turn makes reports
//! reproducible byte for byte.

use crate::dataset::KHot;
use crate::error::{Error, Result};

/// Comparator for `(score, label)` candidates: score descending, then label
/// index ascending.
#[inline]
fn better(a: (f64, u32), b: (f64, u32)) -> std::cmp::Ordering {
    b.0.partial_cmp(&a.0)
        .expect("scores must be finite")
        .then(a.1.cmp(&b.1))
}

/// Selects the `k` best `(score, label)` pairs from `cands` and returns
/// their labels sorted by index. `cands` is consumed as scratch space.
pub(crate) fn topk_pairs(cands: &mut Vec<(f64, u32)>, k: usize) -> Vec<u32> {
    debug_assert!(k >= 1 && k <= cands.len());
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, |&a, &b| better(a, b));
        cands.truncate(k);
    }
    let mut ones: Vec<u32> = cands.iter().map(|&(_, j)| j).collect();
    ones.sort_unstable();
    ones
}

/// Returns the k-hot vector marking the `k` largest scores, ties broken by
/// smaller index.
///
/// Errors if `k` is outside `[1, len]` or any score is NaN.
pub fn topk_select(scores: &[f64], k: usize) -> Result<KHot> {
    let m = scores.len();
    if k < 1 || k > m {
        return Err(Error::InvalidBudget { k, m });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score in top-k selection".into()));
    }
    let mut cands: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .map(|(j, &s)| (s, j as u32))
        .collect();
    let ones = topk_pairs(&mut cands, k);
    KHot::new(m, ones)
}
