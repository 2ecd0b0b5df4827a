/// Length of the longest common subsequence of all `seqs`, or `None` when
/// the table would exceed `cell_budget` cells.
///
/// Cost is the product of `len + 1` over all sequences; only two layers
/// along the longest sequence are kept.
pub fn multi_lcs_length(seqs: &[&[char]], cell_budget: u128) -> Option<usize> {
    match seqs.len() {
        0 => return Some(0),
        1 => return Some(seqs[0].len()),
        _ => {}
    }
    let cells: u128 = seqs.iter().map(|s| s.len() as u128 + 1).product();
    if cells > cell_budget {
        return None;
    }
    if seqs.iter().any(|s| s.is_empty()) {
        return Some(0);
    }
    let mut order: Vec<&[char]> = seqs.to_vec();
    order.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let (first, rest) = (order[0], &order[1..]);

    let dims: Vec<usize> = rest.iter().map(|s| s.len() + 1).collect();
    let mut strides = vec![1usize; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * dims[j + 1];
    }
    let layer = strides[0] * dims[0];
    let diag: usize = strides.iter().sum();

    let mut prev = vec![0u32; layer];
    let mut cur = vec![0u32; layer];
    let mut idx = vec![0usize; dims.len()];
    for &c in first {
        cur.iter_mut().for_each(|x| *x = 0);
        idx.iter_mut().for_each(|x| *x = 0);
        for pos in 0..layer {
            if pos > 0 {
                // odometer increment of the multi-index
                let mut j = dims.len() - 1;
                loop {
                    idx[j] += 1;
                    if idx[j] < dims[j] {
                        break;
                    }
                    idx[j] = 0;
                    j -= 1;
                }
            }
            if idx.contains(&0) {
                continue;
            }
            let all_match = rest.iter().zip(&idx).all(|(s, &i)| s[i - 1] == c);
            cur[pos] = if all_match {
                prev[pos - diag] + 1
            } else {
                let mut best = prev[pos];
                for &st in &strides {
                    best = best.max(cur[pos - st]);
                }
                best
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Some(prev[layer - 1] as usize)
}
