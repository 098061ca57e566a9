//! Canonicity of game tables under per-sub-agent action renaming.
//!
//! A table indexed mixed-radix over sub-agent alphabets is canonical when it
//! is lexicographically minimal in its orbit under the product of symmetric
//! groups acting on each sub-agent's action indices. Witness existence is
//! invariant under these renamings, so search layers enumerate canonical
//! representatives only.

use crate::cgm::decode_into;

/// All permutations of `0..n`, in a fixed (lexicographic) order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

/// Applies one permutation per dimension to the cell positions of `table`
/// and writes the result into `out`.
pub(crate) fn permute_table(table: &[usize], dims: &[usize], perms: &[&Vec<usize>], out: &mut [usize]) {
    let mut digits = vec![0usize; dims.len()];
    for (code, &v) in table.iter().enumerate() {
        decode_into(code, dims, &mut digits);
        let mut new_code = 0usize;
        for (k, &d) in digits.iter().enumerate() {
            new_code = new_code * dims[k] + perms[k][d];
        }
        out[new_code] = v;
    }
}

/// True iff `table` is lexicographically minimal under every combination of
/// per-dimension action renamings.
pub(crate) fn is_canonical(table: &[usize], dims: &[usize]) -> bool {
    let per_dim: Vec<Vec<Vec<usize>>> = dims.iter().map(|&n| permutations(n)).collect();
    let mut choice: Vec<usize> = vec![0; dims.len()];
    let mut scratch = vec![0usize; table.len()];
    loop {
        {
            let perms: Vec<&Vec<usize>> = choice
                .iter()
                .enumerate()
                .map(|(k, &c)| &per_dim[k][c])
                .collect();
            if perms.iter().any(|p| !p.iter().enumerate().all(|(i, &x)| i == x)) {
                permute_table(table, dims, &perms, &mut scratch);
                if scratch[..] < table[..] {
                    return false;
                }
            }
        }
        // odometer over permutation choices
        let mut k = dims.len();
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < per_dim[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(1).len(), 1);
        assert_eq!(permutations(2).len(), 2);
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn canonicity_picks_orbit_minimum() {
        // 2x2 table over labels {0,1}: swapping dim-0 actions maps
        // [0,1,1,0] to itself (rows swap then cells permute), while
        // [1,0,0,1] maps to [0,1,1,0] which is smaller.
        let dims = [2, 2];
        assert!(is_canonical(&[0, 1, 1, 0], &dims));
        assert!(!is_canonical(&[1, 0, 0, 1], &dims));
        // constant tables are canonical
        assert!(is_canonical(&[0, 0, 0, 0], &dims));
    }

    #[test]
    fn orbits_partition_all_tables() {
        // every orbit of 2-cell tables over 2 labels has exactly one
        // canonical representative
        let dims = [2usize];
        let mut canon = 0;
        for t0 in 0..2 {
            for t1 in 0..2 {
                if is_canonical(&[t0, t1], &dims) {
                    canon += 1;
                }
            }
        }
        // orbits: {00}, {11}≅{11}, {01,10} -> canonical 00, 01, 11
        assert_eq!(canon, 3);
    }
}
