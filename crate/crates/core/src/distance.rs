//! Insert/delete edit distance via longest common subsequence.
//!
//! `d(s1, s2) = |s1| + |s2| - 2 * lcs(s1, s2)`, the minimum number of
//! single-symbol insertions and deletions turning one string into the other.
//! It is a metric, which the search relies on.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use lru::LruCache;

pub const DEFAULT_CACHE_CAPACITY: usize = 1_000_000;

/// Length of a longest common subsequence.
pub fn lcs_length(s1: &[char], s2: &[char]) -> usize {
    let (outer, inner) = if s1.len() >= s2.len() { (s1, s2) } else { (s2, s1) };
    if inner.is_empty() {
        return 0;
    }
    let mut row = vec![0u32; inner.len() + 1];
    for &c in outer {
        advance_row(&mut row, inner, c);
    }
    row[inner.len()] as usize
}

/// LCS edit distance.
pub fn d(s1: &[char], s2: &[char]) -> usize {
    s1.len() + s2.len() - 2 * lcs_length(s1, s2)
}

/// Convenience wrapper over `&str`.
pub fn d_str(s1: &str, s2: &str) -> usize {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    d(&a, &b)
}

/// `lcs(pattern, text[..l])` for every `l` in `1..=text.len()`, in one DP
/// sweep over `text`. Entry `l - 1` holds the value for prefix length `l`.
pub fn prefix_lcs_row(pattern: &[char], text: &[char]) -> Vec<u32> {
    let mut out = Vec::with_capacity(text.len());
    if pattern.is_empty() {
        out.resize(text.len(), 0);
        return out;
    }
    let mut row = vec![0u32; pattern.len() + 1];
    for &c in text {
        advance_row(&mut row, pattern, c);
        out.push(row[pattern.len()]);
    }
    out
}

// One DP step: `row[j]` holds lcs(consumed text, pattern[..j]); feeding the
// next text symbol `c` updates it in place.
#[inline]
fn advance_row(row: &mut [u32], pattern: &[char], c: char) {
    let mut diag = 0u32;
    let mut left = 0u32;
    for (j, &pc) in pattern.iter().enumerate() {
        let up = row[j + 1];
        let v = if pc == c { diag + 1 } else { up.max(left) };
        row[j + 1] = v;
        diag = up;
        left = v;
    }
}

struct Entry {
    short: Box<str>,
    long: Box<str>,
    distance: u32,
}

/// Concurrent memo of `d`, symmetric in its arguments, bounded with LRU
/// eviction.
///
/// Entries are bucketed by a content hash of the (shorter, longer) pair and
/// confirmed by full string comparison.
pub struct DistanceCache {
    map: Mutex<LruCache<u64, Vec<Entry>>>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl Default for DistanceCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}

impl std::fmt::Debug for DistanceCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistanceCache")
            .field("len", &self.len())
            .field("hits", &self.hits())
            .field("misses", &self.misses())
            .finish()
    }
}

impl DistanceCache {
    pub fn new(capacity: usize) -> Self {
        // Unbounded map with manual eviction: `LruCache::new` preallocates
        // the full capacity up front.
        DistanceCache {
            map: Mutex::new(LruCache::unbounded()),
            capacity: capacity.max(1),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    /// Number of hash buckets currently held.
    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `d(s1, s2)`, served from the cache when the pair was seen before.
    pub fn d_cached(&self, s1: &[char], s2: &[char]) -> usize {
        let (short, long) = order_pair(s1, s2);
        let key = pair_hash(short, long);
        {
            let mut map = self.map.lock().unwrap();
            if let Some(bucket) = map.get(&key) {
                if let Some(hit) = bucket.iter().find(|en| same(&en.short, short) && same(&en.long, long)) {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return hit.distance as usize;
                }
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let distance = d(short, long);
        let entry = Entry {
            short: short.iter().collect::<String>().into_boxed_str(),
            long: long.iter().collect::<String>().into_boxed_str(),
            distance: distance as u32,
        };
        let mut map = self.map.lock().unwrap();
        match map.get_mut(&key) {
            Some(bucket) => {
                if !bucket.iter().any(|en| same(&en.short, short) && same(&en.long, long)) {
                    bucket.push(entry);
                }
            }
            None => {
                map.put(key, vec![entry]);
                while map.len() > self.capacity {
                    map.pop_lru();
                }
            }
        }
        distance
    }
}

fn order_pair<'a>(a: &'a [char], b: &'a [char]) -> (&'a [char], &'a [char]) {
    if (a.len(), a) <= (b.len(), b) {
        (a, b)
    } else {
        (b, a)
    }
}

fn pair_hash(short: &[char], long: &[char]) -> u64 {
    let mut h = DefaultHasher::new();
    short.hash(&mut h);
    long.hash(&mut h);
    h.finish()
}

fn same(stored: &str, s: &[char]) -> bool {
    stored.chars().eq(s.iter().copied())
}
