//! Phase 3: turn the shrunk candidates into the final result set.

use super::{Phase, Scored, SearchContext, SearchError, SearchParams};
use crate::corpus::{interval_overlap, Document};
use crate::distance;

/// Drops interval-identical elements and elements nested in another one.
/// Output is sorted by `(b, e)`.
pub fn unique_maximal(mut items: Vec<Scored>) -> Vec<Scored> {
    items.sort_by(|x, y| {
        (x.fragment.b, std::cmp::Reverse(x.fragment.e), x.distance).cmp(&(
            y.fragment.b,
            std::cmp::Reverse(y.fragment.e),
            y.distance,
        ))
    });
    let mut out: Vec<Scored> = Vec::with_capacity(items.len());
    let mut max_e: Option<usize> = None;
    for it in items {
        if max_e.is_some_and(|m| m >= it.fragment.e) {
            continue;
        }
        max_e = Some(it.fragment.e);
        out.push(it);
    }
    out
}

/// Groups elements (sorted by `b`) whose intervals overlap transitively.
///
/// On sorted intervals the transitive closure of overlap is a union-find
/// where each element only ever joins the running component.
fn overlap_clusters(items: &[Scored]) -> Vec<std::ops::Range<usize>> {
    let mut parent: Vec<usize> = (0..items.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut reach: Option<(usize, usize)> = None; // (root, max e)
    for (i, it) in items.iter().enumerate() {
        match reach {
            Some((root, e)) if it.fragment.b <= e => {
                let r = find(&mut parent, root);
                parent[i] = r;
                reach = Some((r, e.max(it.fragment.e)));
            }
            _ => reach = Some((i, it.fragment.e)),
        }
    }
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    for i in 0..items.len() {
        let r = find(&mut parent, i);
        match out.last_mut() {
            Some(range) if range.start == r => range.end = i + 1,
            _ => out.push(r..i + 1),
        }
    }
    out
}

/// One representative per overlap cluster: smallest distance, then the
/// longest, then the leftmost.
pub fn cluster_representatives(items: Vec<Scored>) -> Vec<Scored> {
    let mut items = items;
    items.sort_by_key(|s| (s.fragment.b, s.fragment.e));
    overlap_clusters(&items)
        .into_iter()
        .map(|range| {
            items[range]
                .iter()
                .min_by_key(|s| (s.distance, std::cmp::Reverse(s.fragment.len()), s.fragment.b))
                .unwrap()
                .clone()
        })
        .collect()
}

pub fn phase3_filter(
    doc: &Document,
    pattern: &[char],
    w2: &[Scored],
    params: &SearchParams,
    pattern_interval: Option<(usize, usize)>,
    ctx: &SearchContext,
) -> Result<Vec<Scored>, SearchError> {
    ctx.control.check(Phase::Filter)?;
    let opts = params.optimizations;
    let mut w3 = unique_maximal(w2.to_vec());
    if opts.cluster_overlaps {
        w3 = cluster_representatives(w3);
    }
    if opts.extend_to_words {
        ctx.control.check(Phase::Filter)?;
        for s in &mut w3 {
            let (b, e) = doc.extend_to_tokens(s.fragment.b, s.fragment.e);
            if (b, e) != (s.fragment.b, s.fragment.e) {
                *s = Scored::new(doc, b, e, distance::d(&doc.symbols()[b..=e], pattern));
            }
        }
        w3 = unique_maximal(w3);
        if opts.cluster_overlaps {
            w3 = cluster_representatives(w3);
        }
    }
    if params.exclude_self {
        // Word extension and shrinking can move the self match off the
        // exact pattern interval, so anything overlapping it goes.
        if let Some(own) = pattern_interval {
            w3.retain(|s| interval_overlap((s.fragment.b, s.fragment.e), own) == 0);
        }
    }
    assert_antichain(&w3);
    Ok(w3)
}

/// Panics if two elements share an interval or one contains another.
pub fn assert_antichain(items: &[Scored]) {
    let mut sorted: Vec<(usize, usize)> = items.iter().map(|s| (s.fragment.b, s.fragment.e)).collect();
    sorted.sort_by_key(|&(b, e)| (b, std::cmp::Reverse(e)));
    for pair in sorted.windows(2) {
        let ((b0, e0), (b1, e1)) = (pair[0], pair[1]);
        assert!(
            !(b0 <= b1 && e1 <= e0),
            "result [{b1}, {e1}] is identical to or nested in [{b0}, {e0}]"
        );
    }
}
