//! Token-based exact clone detection and the duplicate heat map.
//!
//! Each distinct token string is mapped to an integer, and maximal repeats
//! of the token sequence are read off the lcp-interval tree of its suffix
//! array. A repeat is reported once, with all of its occurrences, when it
//! cannot be extended by one token on either side without losing at least
//! one occurrence.

mod heat;
pub mod suffix;

use std::collections::HashMap;

use crate::corpus::{Document, TextFragment};

pub use heat::{build_heatmap, heat_color, HeatMap, HeatToken, HeatmapJson, RED, WHITE};

/// Clone groups shorter than this many tokens are ignored by default.
pub const DEFAULT_MIN_TOKENS: usize = 5;

/// Identical token-aligned fragments of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCloneGroup {
    /// Members in document order.
    pub members: Vec<TextFragment>,
    /// Index of each member's first token, parallel to `members`.
    pub token_starts: Vec<usize>,
    pub token_length: usize,
}

impl ExactCloneGroup {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }

    /// True when one of the members covers token number `token_index`.
    pub fn covers_token(&self, token_index: usize) -> bool {
        let i = self
            .token_starts
            .partition_point(|&s| s + self.token_length <= token_index);
        self.token_starts.get(i).is_some_and(|&s| s <= token_index)
    }
}

/// A maximal repeat in an integer sequence: its length and every start.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Repeat {
    pub length: usize,
    pub starts: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Left {
    Empty,
    Single(u32),
    Diverse,
}

impl Left {
    fn merge(self, other: Left) -> Left {
        match (self, other) {
            (Left::Empty, x) | (x, Left::Empty) => x,
            (Left::Single(a), Left::Single(b)) if a == b => Left::Single(a),
            _ => Left::Diverse,
        }
    }
}

struct Open {
    lcp: usize,
    lb: usize,
    left: Left,
}

/// All maximal repeats of length at least `min_length` (at least 1).
pub fn maximal_repeats(seq: &[u32], min_length: usize) -> Vec<Repeat> {
    let min_length = min_length.max(1);
    let n = seq.len();
    if n < 2 {
        return Vec::new();
    }
    let sa = suffix::suffix_array(seq);
    let lcp = suffix::lcp_array(seq, &sa);
    // A suffix starting at 0 has a unique "start of text" left context.
    let leaf_left = |pos: usize| {
        if pos == 0 {
            Left::Diverse
        } else {
            Left::Single(seq[pos - 1])
        }
    };

    let mut out = Vec::new();
    let mut stack = vec![Open {
        lcp: 0,
        lb: 0,
        left: Left::Empty,
    }];
    for i in 1..=n {
        let h = if i < n { lcp[i] } else { 0 };
        let mut pending = leaf_left(sa[i - 1]);
        let mut lb = i - 1;
        while h < stack.last().unwrap().lcp {
            let mut node = stack.pop().unwrap();
            node.left = node.left.merge(pending);
            if node.lcp >= min_length && node.left == Left::Diverse {
                let mut starts = sa[node.lb..i].to_vec();
                starts.sort_unstable();
                out.push(Repeat {
                    length: node.lcp,
                    starts,
                });
            }
            pending = node.left;
            lb = node.lb;
        }
        let top = stack.last_mut().unwrap();
        if h > top.lcp {
            stack.push(Open {
                lcp: h,
                lb,
                left: pending,
            });
        } else {
            top.left = top.left.merge(pending);
        }
    }
    out.sort_unstable_by(|a, b| (a.starts[0], a.length).cmp(&(b.starts[0], b.length)));
    out
}

/// Maps each token string to a dense integer id, in order of first use.
pub fn token_ids(doc: &Document) -> Vec<u32> {
    let mut ids: HashMap<&[char], u32> = HashMap::new();
    doc.tokens()
        .iter()
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(doc.slice(&t.fragment)).or_insert(next)
        })
        .collect()
}

/// Exact clone groups of at least `min_tokens` tokens.
pub fn find_exact_groups(doc: &Document, min_tokens: usize) -> Vec<ExactCloneGroup> {
    let tokens = doc.tokens();
    maximal_repeats(&token_ids(doc), min_tokens)
        .into_iter()
        .map(|rep| ExactCloneGroup {
            members: rep
                .starts
                .iter()
                .map(|&s| TextFragment {
                    doc: doc.id().clone(),
                    b: tokens[s].b(),
                    e: tokens[s + rep.length - 1].e(),
                })
                .collect(),
            token_starts: rep.starts,
            token_length: rep.length,
        })
        .collect()
}

/// Maximum cardinality among groups covering the token; 0 if none does.
pub fn token_temperature(token_index: usize, groups: &[ExactCloneGroup]) -> usize {
    groups
        .iter()
        .filter(|g| g.covers_token(token_index))
        .map(ExactCloneGroup::cardinality)
        .max()
        .unwrap_or(0)
}

/// Temperatures of all tokens at once: groups are applied hottest first and
/// each token is painted only once.
pub fn token_temperatures(token_count: usize, groups: &[ExactCloneGroup]) -> Vec<usize> {
    let mut temps = vec![0usize; token_count];
    // next_unpainted[i]: smallest unpainted index >= i (path-compressed)
    let mut next_unpainted: Vec<usize> = (0..=token_count).collect();
    fn find(next: &mut [usize], mut i: usize) -> usize {
        let mut root = i;
        while next[root] != root {
            root = next[root];
        }
        while next[i] != root {
            let up = next[i];
            next[i] = root;
            i = up;
        }
        root
    }
    let mut order: Vec<&ExactCloneGroup> = groups.iter().collect();
    order.sort_by_key(|g| std::cmp::Reverse(g.cardinality()));
    for g in order {
        for &s in &g.token_starts {
            let end = s + g.token_length;
            let mut i = find(&mut next_unpainted, s);
            while i < end {
                temps[i] = g.cardinality();
                next_unpainted[i] = i + 1;
                i = find(&mut next_unpainted, i + 1);
            }
        }
    }
    temps
}
