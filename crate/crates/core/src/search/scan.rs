//! Phase 1: slide a window of length `ceil(|p| / k)` over the document and
//! keep every position within the distance threshold of the pattern.

use super::{Phase, Scored, SearchContext, SearchError, SearchParams};
use crate::corpus::Document;
use crate::distance;

/// Window advance after a window at distance `current_d`.
///
/// Moving a fixed-length window by `δ` symbols changes its distance to the
/// pattern by at most `2δ`, so positions closer than `(d - k_di) / 2` cannot
/// qualify.
pub fn phase1_skip(current_d: usize, k_di: usize) -> usize {
    if current_d > k_di + 1 {
        (current_d - k_di) / 2
    } else {
        1
    }
}

/// Windows start at `0 ..= len - L_w`; a document shorter than the window
/// is scanned as a single window.
pub fn phase1_scan(
    doc: &Document,
    pattern: &[char],
    params: &SearchParams,
    ctx: &SearchContext,
) -> Result<Vec<Scored>, SearchError> {
    params.validate()?;
    let text = doc.symbols();
    let (n, m) = (text.len(), pattern.len());
    if m == 0 {
        return Err(SearchError::EmptyPattern);
    }
    if m > n {
        return Ok(Vec::new());
    }
    let lw = params.window_len();
    let thr = params.threshold();
    let last = n.saturating_sub(lw);
    let opts = params.optimizations;

    let mut out = Vec::new();
    let mut a = 0;
    loop {
        if let Err(e) = ctx.control.check(Phase::Scan) {
            return Err(e.with_partial(out.len()));
        }
        let end = (a + lw).min(n);
        let window = &text[a..end];
        let dist = if opts.reuse_and_parallelize {
            ctx.cache.d_cached(window, pattern)
        } else {
            distance::d(window, pattern)
        };
        ctx.stats.windows.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        if dist <= thr {
            out.push(Scored::new(doc, a, end - 1, dist));
        }
        a += if opts.scan_skip { phase1_skip(dist, thr) } else { 1 };
        if a > last {
            break;
        }
    }
    Ok(out)
}
