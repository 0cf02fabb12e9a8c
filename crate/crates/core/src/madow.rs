//! Systematic sampling of exactly-k label sets with prescribed marginals.
//!
//! Given inclusion probabilities `pi` summing to an integer `k`, one uniform
//! draw `U` picks the `k` cut points `U, U+1, ..., U+k-1` on the cumulative
//! profile of `pi`; the labels whose cumulative intervals contain the cut
//! points are selected. Every draw has exactly `k` distinct labels and label
//! `j` is included with probability `pi[j]`, in O(m) time per sample.

use crate::dataset::KHot;
use crate::error::{Error, Result};
use rand::Rng;

/// How far the sum of `pi` may stray from an integer before the input is
/// rejected instead of renormalized.
const SUM_TOL: f64 = 1e-6;

/// Draws one exact-k label set with marginal inclusion probabilities `pi`.
///
/// The budget is `k = round(sum(pi))`; inputs whose sum is further than
/// `1e-6` from an integer in `[1, m]` are rejected, closer ones are
/// renormalized. Entries must lie in `[0, 1]` (a hair of float overshoot is
/// clamped).
pub fn madow_sample<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<KHot> {
    let m = pi.len();
    let mut p = Vec::with_capacity(m);
    let mut sum = 0.0;
    for &v in pi {
        if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(Error::InvalidMarginals(format!(
                "inclusion probability {v} outside [0, 1]"
            )));
        }
        let v = v.clamp(0.0, 1.0);
        p.push(v);
        sum += v;
    }
    let k = sum.round();
    if (sum - k).abs() > SUM_TOL || k < 1.0 || k > m as f64 {
        return Err(Error::InvalidMarginals(format!(
            "inclusion probabilities sum to {sum}, expected an integer in [1, {m}]"
        )));
    }
    let k_usize = k as usize;

    // Renormalize so the cumulative profile ends exactly at k while keeping
    // every entry within [0, 1]: scale, clamp, then push any residual into
    // entries with headroom. Interval widths <= 1 guarantee distinct picks.
    if sum != k {
        let scale = k / sum;
        let mut clamped_sum = 0.0;
        for v in p.iter_mut() {
            *v = (*v * scale).min(1.0);
            clamped_sum += *v;
        }
        let deficit = k - clamped_sum;
        if deficit > 0.0 {
            let headroom: f64 = p.iter().map(|&v| 1.0 - v).sum();
            if headroom > 0.0 {
                for v in p.iter_mut() {
                    *v = (*v + deficit * (1.0 - *v) / headroom).min(1.0);
                }
            }
        }
    }

    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for &v in &p {
        acc += v;
        cum.push(acc);
    }
    // Force the exact endpoint so every cut point U + i <= k lands inside.
    cum[m] = k;

    // U in (0, 1]: cut points are U, U+1, ..., U+k-1.
    let u = 1.0 - rng.random::<f64>();
    let mut ones = Vec::with_capacity(k_usize);
    let mut j = 0usize;
    for i in 0..k_usize {
        let target = u + i as f64;
        while j < m - 1 && cum[j + 1] < target {
            j += 1;
        }
        ones.push(j as u32);
        // Advance past the selected label: picks are strictly increasing.
        j += 1;
        if j >= m {
            j = m - 1; // only reachable on the final cut point
        }
    }
    KHot::new(m, ones)
}
