//! Suffix array and LCP array over integer sequences.

/// Suffix array by prefix doubling. `O(n log^2 n)`, but natural-language
/// token streams usually resolve in a handful of rounds.
pub fn suffix_array(seq: &[u32]) -> Vec<usize> {
    let n = seq.len();
    let mut sa: Vec<usize> = (0..n).collect();
    if n <= 1 {
        return sa;
    }
    let mut rank: Vec<usize> = seq.iter().map(|&t| t as usize).collect();
    let mut next = vec![0usize; n];
    let mut k = 1;
    loop {
        // Ranks are shifted by one so that "past the end" (0) sorts first.
        let key = |i: usize, rank: &[usize]| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i, &rank));
        next[sa[0]] = 0;
        for w in 1..n {
            let bump = key(sa[w - 1], &rank) != key(sa[w], &rank);
            next[sa[w]] = next[sa[w - 1]] + usize::from(bump);
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// Kasai's algorithm. `lcp[i]` is the common prefix length of suffixes
/// `sa[i - 1]` and `sa[i]`; `lcp[0] = 0`.
pub fn lcp_array(seq: &[u32], sa: &[usize]) -> Vec<usize> {
    let n = seq.len();
    let mut rank = vec![0usize; n];
    for (i, &s) in sa.iter().enumerate() {
        rank[s] = i;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && seq[i + h] == seq[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}
