//! Distance metrics: Levenshtein edit distance (bit-parallel), a banded
//! variant for cheap "within budget?" checks, Hamming distance, density, and
//! the partition-mismatch witness plus its exhaustive oracle.

use crate::bits::{Bits, BitsError, Partition};

const WORD_BITS: usize = 64;

/// Exact edit distance (insertions, deletions, substitutions all cost 1).
///
/// Bit-parallel over 64-bit blocks, so cost is `|a| * |b| / 64` word ops with
/// O(min/64) words of state.
pub fn edit_distance(a: &Bits, b: &Bits) -> usize {
    // the shorter string is the pattern: block count follows it
    if a.len() <= b.len() {
        myers_distance(a, b)
    } else {
        myers_distance(b, a)
    }
}

/// Global Levenshtein distance via the block-based Myers/Hyyrö recurrence.
/// `pattern` is the vertical string; score is tracked at its last row.
fn myers_distance(pattern: &Bits, text: &Bits) -> usize {
    let m = pattern.len();
    let n = text.len();
    if m == 0 {
        return n;
    }
    if n == 0 {
        return m;
    }
    let blocks = m.div_ceil(WORD_BITS);
    let last = blocks - 1;
    let last_bit = (m - 1) % WORD_BITS;

    // match masks per symbol; garbage above row m-1 is harmless because the
    // only cross-bit dependency (the addition carry) moves low to high
    let peq_one: Vec<u64> = pattern.words().to_vec();
    let peq_zero: Vec<u64> = pattern.words().iter().map(|w| !w).collect();

    let mut vp = vec![u64::MAX; blocks];
    let mut vn = vec![0u64; blocks];
    let mut score = m as i64;

    for tb in text.iter() {
        let peq = if tb { &peq_one } else { &peq_zero };
        let mut hin: i32 = 1; // D[0][j] - D[0][j-1] = +1 in global alignment
        for blk in 0..blocks {
            let eq_raw = peq[blk];
            let pv = vp[blk];
            let mv = vn[blk];
            let hin_neg = (hin < 0) as u64;

            let xv = eq_raw | mv;
            let eq = eq_raw | hin_neg;
            let xh = (((eq & pv).wrapping_add(pv)) ^ pv) | eq;
            let ph = mv | !(xh | pv);
            let mh = pv & xh;

            if blk == last {
                score += ((ph >> last_bit) & 1) as i64;
                score -= ((mh >> last_bit) & 1) as i64;
            }
            let hout = ((ph >> (WORD_BITS - 1)) & 1) as i32 - ((mh >> (WORD_BITS - 1)) & 1) as i32;

            let ph_s = (ph << 1) | (hin > 0) as u64;
            let mh_s = (mh << 1) | hin_neg;
            vp[blk] = mh_s | !(xv | ph_s);
            vn[blk] = ph_s & xv;
            hin = hout;
        }
    }
    score as usize
}

/// Plain row-rolling DP; reference kernel for tests and the banded fallback.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn edit_distance_rowdp(a: &Bits, b: &Bits) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    let mut row: Vec<u32> = (0..=m as u32).collect();
    for (j, tb) in long.iter().enumerate() {
        let mut prev_diag = row[0];
        row[0] = j as u32 + 1;
        for (i, pb) in short.iter().enumerate() {
            let cost = (pb != tb) as u32;
            let val = (prev_diag + cost).min(row[i] + 1).min(row[i + 1] + 1);
            prev_diag = row[i + 1];
            row[i + 1] = val;
        }
    }
    row[m] as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandedDistance {
    /// The exact distance; reported only when it is <= the requested band.
    Exact(usize),
    ExceedsBand,
}

impl BandedDistance {
    pub fn within(self) -> Option<usize> {
        match self {
            BandedDistance::Exact(d) => Some(d),
            BandedDistance::ExceedsBand => None,
        }
    }
}

/// Reports the exact distance whenever `d_E(a, b) <= band`, else
/// [`BandedDistance::ExceedsBand`].
///
/// Internally doubles a diagonal band until it certifies the distance or the
/// band is no cheaper than the full bit-parallel kernel, which then decides.
pub fn edit_distance_banded(a: &Bits, b: &Bits, band: usize) -> BandedDistance {
    let band = band.max(1);
    if a.len().abs_diff(b.len()) > band {
        return BandedDistance::ExceedsBand;
    }
    let full_kernel_cols = a.len().max(b.len()).div_ceil(WORD_BITS).max(1);
    let mut width = 16usize.min(band);
    loop {
        if 2 * width + 1 >= full_kernel_cols {
            let d = edit_distance(a, b);
            return if d <= band { BandedDistance::Exact(d) } else { BandedDistance::ExceedsBand };
        }
        if let Some(d) = banded_within(a, b, width) {
            // certified exact; d <= width <= band
            return BandedDistance::Exact(d);
        }
        if width >= band {
            return BandedDistance::ExceedsBand;
        }
        width = (width * 2).min(band);
    }
}

/// Exact distance if it is <= `width`, else None. Classic band around the
/// main diagonal: row i only visits columns within `width` of the diagonal.
fn banded_within(a: &Bits, b: &Bits, width: usize) -> Option<usize> {
    let m = a.len();
    let n = b.len();
    if m.abs_diff(n) > width {
        return None;
    }
    const INF: u32 = u32::MAX / 2;
    let span = 2 * width + 1;
    // cur[k] holds row i, column j = i + k - width
    let mut cur = vec![INF; span];
    let mut next = vec![INF; span];
    for (k, v) in cur.iter_mut().enumerate().skip(width) {
        let j = k - width;
        if j > n {
            break;
        }
        *v = j as u32; // row 0
    }
    let b_bits: Vec<bool> = b.iter().collect();
    for (i, ab) in a.iter().enumerate() {
        next.fill(INF);
        let lo = (i + 1).saturating_sub(width);
        let hi = (i + 1 + width).min(n);
        for j in lo..=hi {
            let k = j + width - (i + 1);
            let mut best = INF;
            // deletion from a: predecessor (i, j), in band iff |j - i| <= width
            if j + width >= i && j <= i + width {
                best = best.min(cur[j + width - i].saturating_add(1));
            }
            if j > 0 {
                // diagonal: predecessor (i, j-1)
                if j - 1 + width >= i && j - 1 <= i + width {
                    let cost = (ab != b_bits[j - 1]) as u32;
                    best = best.min(cur[j - 1 + width - i].saturating_add(cost));
                }
                // insertion into a: predecessor (i+1, j-1)
                if k > 0 {
                    best = best.min(next[k - 1].saturating_add(1));
                }
            }
            next[k] = best;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let k = n + width - m; // column n at row m
    let d = cur[k];
    if d as usize <= width {
        Some(d as usize)
    } else {
        None
    }
}

/// Number of differing positions between equal-length strings.
pub fn hamming_distance(a: &Bits, b: &Bits) -> Result<usize, BitsError> {
    if a.len() != b.len() {
        return Err(BitsError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Fraction of positions equal to `value`; errors on the empty string.
pub fn density(x: &Bits, value: bool) -> Result<f64, BitsError> {
    if x.is_empty() {
        return Err(BitsError::EmptyInput);
    }
    Ok(x.count(value) as f64 / x.len() as f64)
}

/// Given a partition of `v` into `b` parts, produces a partition of `u` into
/// `b` parts along an optimal alignment, together with the number of parts
/// where the aligned substrings differ. That mismatch count never exceeds
/// `d_E(u, v)`.
pub fn partition_edit_witness(
    u: &Bits,
    v: &Bits,
    pv: &Partition,
) -> Result<(Partition, usize), BitsError> {
    if pv.len() != v.len() {
        return Err(BitsError::BadPartition("partition does not span v"));
    }
    let m = u.len();
    let n = v.len();
    // full DP with traceback; for each column the cut in u is the row where an
    // optimal path first reaches that column
    let width = n + 1;
    let mut dp = vec![0u32; (m + 1) * width];
    for j in 0..=n {
        dp[j] = j as u32;
    }
    let v_bits: Vec<bool> = v.iter().collect();
    for (i, ub) in u.iter().enumerate() {
        let (prev_rows, row_pair) = dp.split_at_mut((i + 1) * width);
        let prev = &prev_rows[i * width..];
        let row = &mut row_pair[..width];
        row[0] = i as u32 + 1;
        for j in 1..=n {
            let cost = (ub != v_bits[j - 1]) as u32;
            row[j] = (prev[j - 1] + cost).min(prev[j] + 1).min(row[j - 1] + 1);
        }
    }
    // walk back from (m, n); first_row[j] = smallest row an optimal path
    // touches at column j
    let mut first_row = vec![m; n + 1];
    let mut i = m;
    let mut j = n;
    loop {
        if first_row[j] > i {
            first_row[j] = i;
        }
        if i == 0 && j == 0 {
            break;
        }
        let here = dp[i * width + j];
        if i > 0 && j > 0 {
            let cost = (u.get(i - 1) != v_bits[j - 1]) as u32;
            if dp[(i - 1) * width + (j - 1)] + cost == here {
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * width + j] + 1 == here {
            i -= 1;
            continue;
        }
        j -= 1;
    }
    let mut cuts: Vec<usize> = pv.boundaries().iter().map(|&c| first_row[c]).collect();
    // the last cut must close the partition of u even if the optimal path
    // reaches column n early (trailing deletions)
    *cuts.last_mut().unwrap() = m;
    cuts[0] = 0;
    let pu = Partition::new(cuts)?;
    let mut mismatches = 0usize;
    for part in 0..pv.parts() {
        if u.slice(pu.part(part)) != v.slice(pv.part(part)) {
            mismatches += 1;
        }
    }
    Ok((pu, mismatches))
}

pub const BRUTEFORCE_MAX_LEN: usize = 16;
pub const BRUTEFORCE_MAX_PARTS: usize = 6;

/// Minimum over all partitions of `u` into `pv.parts()` parts of the number of
/// parts differing from the corresponding part of `v`. Exhaustive; the
/// independent oracle for [`partition_edit_witness`].
pub fn min_partition_mismatch_bruteforce(
    u: &Bits,
    v: &Bits,
    pv: &Partition,
) -> Result<usize, BitsError> {
    if pv.len() != v.len() {
        return Err(BitsError::BadPartition("partition does not span v"));
    }
    let b = pv.parts();
    if u.len() > BRUTEFORCE_MAX_LEN || b > BRUTEFORCE_MAX_PARTS {
        return Err(BitsError::BudgetExceeded {
            max_len: BRUTEFORCE_MAX_LEN,
            max_parts: BRUTEFORCE_MAX_PARTS,
        });
    }
    if b == 0 {
        return Ok(0);
    }
    let v_parts: Vec<Bits> = (0..b).map(|i| v.slice(pv.part(i))).collect();
    let mut best = b;
    let mut cuts = vec![0usize; b + 1];
    cuts[b] = u.len();
    search_partitions(u, &v_parts, &mut cuts, 1, &mut best);
    Ok(best)
}

fn search_partitions(u: &Bits, v_parts: &[Bits], cuts: &mut [usize], level: usize, best: &mut usize) {
    let b = v_parts.len();
    if level == b {
        let mismatches = (0..b)
            .filter(|&i| u.slice(cuts[i]..cuts[i + 1]) != v_parts[i])
            .count();
        *best = (*best).min(mismatches);
        return;
    }
    for c in cuts[level - 1]..=u.len() {
        cuts[level] = c;
        search_partitions(u, v_parts, cuts, level + 1, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::RunSeq;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    /// Exponential-recursion oracle, no memoization. Only for tiny inputs.
    fn edit_distance_exponential(a: &[bool], b: &[bool]) -> usize {
        match (a.split_last(), b.split_last()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((&x, ra)), Some((&y, rb))) => {
                let sub = edit_distance_exponential(ra, rb) + (x != y) as usize;
                let del = edit_distance_exponential(ra, b) + 1;
                let ins = edit_distance_exponential(a, rb) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance(&bits("0011"), &bits("0101")), 2);
        let x = bits("1101001");
        assert_eq!(edit_distance(&x, &x), 0);
        assert_eq!(edit_distance(&Bits::new(), &bits("101")), 3);
        assert_eq!(edit_distance(&bits("0000"), &bits("1111")), 4);
    }

    #[test]
    fn myers_matches_rowdp_across_block_boundaries() {
        let mut rng = crate::seed::test_rng(11);
        for _ in 0..200 {
            let la = rng.next_range(0..=200);
            let lb = rng.next_range(0..=200);
            let a: Bits = (0..la).map(|_| rng.next_bool()).collect();
            let b: Bits = (0..lb).map(|_| rng.next_bool()).collect();
            assert_eq!(edit_distance(&a, &b), edit_distance_rowdp(&a, &b), "a={a} b={b}");
        }
        // exercise multi-block patterns specifically
        for (la, lb) in [(63, 64), (64, 64), (65, 70), (128, 129), (200, 40)] {
            let a: Bits = (0..la).map(|_| rng.next_bool()).collect();
            let b: Bits = (0..lb).map(|_| rng.next_bool()).collect();
            assert_eq!(edit_distance(&a, &b), edit_distance_rowdp(&a, &b));
        }
    }

    #[test]
    fn matches_exponential_oracle_on_tiny_inputs() {
        let mut rng = crate::seed::test_rng(7);
        for _ in 0..500 {
            let la = rng.next_range(0..=10);
            let lb = rng.next_range(0..=10);
            let a: Vec<bool> = (0..la).map(|_| rng.next_bool()).collect();
            let b: Vec<bool> = (0..lb).map(|_| rng.next_bool()).collect();
            let ba: Bits = a.iter().copied().collect();
            let bb: Bits = b.iter().copied().collect();
            assert_eq!(edit_distance(&ba, &bb), edit_distance_exponential(&a, &b));
        }
    }

    #[test]
    fn banded_examples() {
        assert_eq!(edit_distance_banded(&bits("0011"), &bits("0101"), 5), BandedDistance::Exact(2));
        let x = bits("110010");
        assert_eq!(edit_distance_banded(&x, &x, 1), BandedDistance::Exact(0));
        assert_eq!(
            edit_distance_banded(&bits("0000"), &bits("1111"), 2),
            BandedDistance::ExceedsBand
        );
    }

    #[test]
    fn banded_agrees_with_exact_within_band() {
        let mut rng = crate::seed::test_rng(23);
        for _ in 0..300 {
            let la = rng.next_range(0..=120);
            let lb = rng.next_range(0..=120);
            let a: Bits = (0..la).map(|_| rng.next_bool()).collect();
            let b: Bits = (0..lb).map(|_| rng.next_bool()).collect();
            let d = edit_distance(&a, &b);
            let band = rng.next_range(1..=60);
            match edit_distance_banded(&a, &b, band) {
                BandedDistance::Exact(got) => {
                    assert_eq!(got, d);
                    assert!(d <= band);
                }
                BandedDistance::ExceedsBand => assert!(d > band, "d={d} band={band}"),
            }
        }
    }

    #[test]
    fn band_window_kernel_is_exact_for_close_pairs() {
        // long strings, few edits: exercises the diagonal-window path directly
        let mut rng = crate::seed::test_rng(29);
        for _ in 0..20 {
            let len = rng.next_range(2500..=4000);
            let a: Bits = (0..len).map(|_| rng.next_bool()).collect();
            let mut b = a.clone();
            let edits = rng.next_range(0..=12);
            for _ in 0..edits {
                b.flip(rng.next_range(0..=len - 1));
            }
            let d = edit_distance_rowdp(&a, &b);
            assert_eq!(banded_within(&a, &b, 40), Some(d));
            assert_eq!(edit_distance_banded(&a, &b, 40), BandedDistance::Exact(d));
        }
        // and a pair whose distance genuinely exceeds the window
        let a = Bits::zeros(3000);
        let b = Bits::ones(3000);
        assert_eq!(banded_within(&a, &b, 40), None);
        assert_eq!(edit_distance_banded(&a, &b, 40), BandedDistance::ExceedsBand);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(&bits("00100"), &bits("00010")).unwrap(), 2);
        let x = bits("0110");
        assert_eq!(hamming_distance(&x, &x).unwrap(), 0);
        assert_eq!(hamming_distance(&bits("01"), &bits("10")).unwrap(), 2);
        assert!(hamming_distance(&bits("01"), &bits("100")).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&bits("0001"), false).unwrap(), 0.75);
        assert_eq!(density(&bits("1111"), true).unwrap(), 1.0);
        assert_eq!(density(&bits("01"), false).unwrap(), 0.5);
        assert!(density(&Bits::new(), false).is_err());
    }

    #[test]
    fn witness_equal_strings_has_zero_mismatch() {
        let v = bits("0110100");
        let pv = Partition::new(vec![0, 3, 3, 7]).unwrap();
        let (pu, mism) = partition_edit_witness(&v, &v, &pv).unwrap();
        assert_eq!(mism, 0);
        assert_eq!(pu.parts(), 3);
        assert_eq!(pu.len(), v.len());
    }

    #[test]
    fn witness_bounded_by_edit_distance() {
        let u = bits("10001");
        let v = bits("01100");
        let pv = Partition::single(v.len());
        let (_, mism) = partition_edit_witness(&u, &v, &pv).unwrap();
        assert!(mism <= edit_distance(&u, &v));
    }

    #[test]
    fn witness_on_hard_pair_blocks() {
        // two 7-bit blocks differing in exactly one position of one block
        let u = bits("01101010101101");
        let v = bits("01101010110101");
        let pv = Partition::new(vec![0, 7, 14]).unwrap();
        let (_, mism) = partition_edit_witness(&u, &v, &pv).unwrap();
        let d = edit_distance(&u, &v);
        assert!(d >= 1);
        assert!(mism <= d);
        assert_eq!(mism, 1);
    }

    #[test]
    fn bruteforce_examples() {
        let v = bits("10");
        let pv = Partition::new(vec![0, 1, 2]).unwrap();
        let u = bits("01");
        let min = min_partition_mismatch_bruteforce(&u, &v, &pv).unwrap();
        // splits of "01" into two parts: ("","01"), ("0","1"), ("01","")
        assert_eq!(min, 2);
        assert_eq!(min_partition_mismatch_bruteforce(&v, &v, &pv).unwrap(), 0);
        let too_long = Bits::zeros(17);
        assert!(matches!(
            min_partition_mismatch_bruteforce(&too_long, &v, &pv),
            Err(BitsError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn bruteforce_never_exceeds_edit_distance() {
        let mut rng = crate::seed::test_rng(31);
        for _ in 0..300 {
            let lu = rng.next_range(0..=12);
            let lv = rng.next_range(1..=12);
            let u: Bits = (0..lu).map(|_| rng.next_bool()).collect();
            let v: Bits = (0..lv).map(|_| rng.next_bool()).collect();
            let parts = rng.next_range(1..=4.min(lv));
            let mut cuts: Vec<usize> = (0..parts - 1).map(|_| rng.next_range(0..=lv)).collect();
            cuts.sort_unstable();
            let mut boundaries = vec![0];
            boundaries.extend(cuts);
            boundaries.push(lv);
            let pv = Partition::new(boundaries).unwrap();
            let d = edit_distance(&u, &v);
            let bf = min_partition_mismatch_bruteforce(&u, &v, &pv).unwrap();
            let (_, wit) = partition_edit_witness(&u, &v, &pv).unwrap();
            assert!(bf <= wit, "oracle min must not exceed the witness sum");
            assert!(wit <= d, "witness sum {wit} exceeds edit distance {d}");
        }
    }

    #[test]
    fn additivity_over_concatenated_blocks() {
        // d_E(X, X-hat) <= sum of per-block edit distances
        let mut rng = crate::seed::test_rng(41);
        for _ in 0..100 {
            let blocks = rng.next_range(1..=5);
            let mut x = Bits::new();
            let mut xh = Bits::new();
            let mut sum = 0;
            for _ in 0..blocks {
                let lb = rng.next_range(0..=20);
                let lh = rng.next_range(0..=20);
                let xb: Bits = (0..lb).map(|_| rng.next_bool()).collect();
                let hb: Bits = (0..lh).map(|_| rng.next_bool()).collect();
                sum += edit_distance(&xb, &hb);
                x.extend_from(&xb);
                xh.extend_from(&hb);
            }
            assert!(edit_distance(&x, &xh) <= sum);
        }
    }

    #[test]
    fn metric_axioms_hold() {
        let mut rng = crate::seed::test_rng(53);
        for _ in 0..150 {
            let gen = |rng: &mut crate::seed::TestRng| -> Bits {
                let l = rng.next_range(0..=64);
                (0..l).map(|_| rng.next_bool()).collect()
            };
            let a = gen(&mut rng);
            let b = gen(&mut rng);
            let c = gen(&mut rng);
            let dab = edit_distance(&a, &b);
            assert_eq!(dab, edit_distance(&b, &a));
            assert_eq!(edit_distance(&a, &a), 0);
            assert!((dab == 0) == (a == b));
            assert!(dab <= a.len().max(b.len()));
            assert!(edit_distance(&a, &c) <= dab + edit_distance(&b, &c));
        }
    }

    #[test]
    fn long_runs_round_trip_through_runseq() {
        let r = RunSeq { first_value: true, lengths: vec![100, 3, 500, 1, 64] };
        let b = crate::bits::from_runs(&r).unwrap();
        assert_eq!(b.runs(), r);
    }
}
