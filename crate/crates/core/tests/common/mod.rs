//! Independent oracles shared by the integration suites.
//!
//! Nothing here reuses the library's alignment path: costs come from a
//! plain recursive edit-distance definition, and mask-match counts from an
//! exhaustive walk over *all* minimal-cost alignments.

use std::collections::{HashMap, HashSet};

/// Word-level Levenshtein distance by naive recursion over suffixes.
pub fn brute_edit_distance<T: PartialEq>(r: &[T], h: &[T]) -> usize {
    match (r.split_first(), h.split_first()) {
        (None, None) => 0,
        (None, Some(_)) => h.len(),
        (Some(_), None) => r.len(),
        (Some((rf, rr)), Some((hf, hr))) => {
            let sub = brute_edit_distance(rr, hr) + usize::from(rf != hf);
            let del = brute_edit_distance(rr, h) + 1;
            let ins = brute_edit_distance(r, hr) + 1;
            sub.min(del).min(ins)
        }
    }
}

/// Over every minimal-cost alignment of `r` and `h`, the (min, max) count of
/// reference positions in `mask_positions` aligned as a match.
///
/// When min == max the mask-match count is alignment-independent and can be
/// asserted against any tie-breaking implementation.
#[allow(dead_code)]
pub fn brute_mask_match_range(
    r: &[String],
    h: &[String],
    mask_positions: &HashSet<usize>,
) -> (usize, usize) {
    fn go(
        i: usize,
        j: usize,
        r: &[String],
        h: &[String],
        masks: &HashSet<usize>,
        memo: &mut HashMap<(usize, usize), (usize, usize, usize)>,
    ) -> (usize, usize, usize) {
        if let Some(&hit) = memo.get(&(i, j)) {
            return hit;
        }
        let result = if i == r.len() && j == h.len() {
            (0, 0, 0)
        } else if i == r.len() {
            (h.len() - j, 0, 0)
        } else if j == h.len() {
            (r.len() - i, 0, 0)
        } else {
            let eq = r[i] == h[j];
            let bonus = usize::from(eq && masks.contains(&i));
            let (dc, dlo, dhi) = go(i + 1, j + 1, r, h, masks, memo);
            let diag = (dc + usize::from(!eq), dlo + bonus, dhi + bonus);
            let (xc, xlo, xhi) = go(i + 1, j, r, h, masks, memo);
            let del = (xc + 1, xlo, xhi);
            let (yc, ylo, yhi) = go(i, j + 1, r, h, masks, memo);
            let ins = (yc + 1, ylo, yhi);

            let best = diag.0.min(del.0).min(ins.0);
            let mut lo = usize::MAX;
            let mut hi = 0;
            for (c, l, u) in [diag, del, ins] {
                if c == best {
                    lo = lo.min(l);
                    hi = hi.max(u);
                }
            }
            (best, lo, hi)
        };
        memo.insert((i, j), result);
        result
    }

    let mut memo = HashMap::new();
    let (_, lo, hi) = go(0, 0, r, h, mask_positions, &mut memo);
    (lo, hi)
}

#[allow(dead_code)]
/// All token sequences of length 0..=max_len over `alphabet`.
pub fn all_sequences(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for seq in &frontier {
            for sym in alphabet {
                let mut extended = seq.clone();
                extended.push(sym.to_string());
                next.push(extended);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
