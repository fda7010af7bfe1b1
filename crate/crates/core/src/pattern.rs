//! Indicator-product patterns: bipartite edge sets over distinct control and
//! treated indices, with canonicalization and an exact null-expectation
//! oracle (brute-force over orderings of the distinct variables).

use num_bigint::BigInt;
use num_rational::BigRational;

/// Edges (x_index, y_index) of an indicator product; an edge (a, b) stands
/// for the event X_a < Y_b. Index labels within a side are interchangeable.
pub type Edges = Vec<(u8, u8)>;

/// Deduplicate and sort; repeated indicators are idempotent.
pub fn dedup(edges: &[(u8, u8)]) -> Edges {
    let mut e: Edges = edges.to_vec();
    e.sort_unstable();
    e.dedup();
    e
}

fn perms(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in perms(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Canonical representative of an edge set under independent relabeling of
/// the two index sides.
pub fn canonical(edges: &[(u8, u8)]) -> Edges {
    let e = dedup(edges);
    let mut xs: Vec<u8> = e.iter().map(|&(x, _)| x).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut ys: Vec<u8> = e.iter().map(|&(_, y)| y).collect();
    ys.sort_unstable();
    ys.dedup();
    let mut best: Option<Edges> = None;
    for px in perms(xs.len()) {
        for py in perms(ys.len()) {
            let mut cand: Edges = e
                .iter()
                .map(|&(x, y)| {
                    let xi = xs.binary_search(&x).unwrap();
                    let yi = ys.binary_search(&y).unwrap();
                    (px[xi] as u8, py[yi] as u8)
                })
                .collect();
            cand.sort_unstable();
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.unwrap()
}

/// Exact null expectation of the indicator product: the fraction of linear
/// orders of the distinct variables in which every X_a < Y_b holds.
pub fn null_expectation(edges: &[(u8, u8)]) -> BigRational {
    let e = dedup(edges);
    let mut xs: Vec<u8> = e.iter().map(|&(x, _)| x).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut ys: Vec<u8> = e.iter().map(|&(_, y)| y).collect();
    ys.sort_unstable();
    ys.dedup();
    let nx = xs.len();
    let tot = nx + ys.len();
    let mut good = 0u64;
    let mut total = 0u64;
    // rank assignment: perm[i] is the rank of variable i (xs first, then ys)
    for perm in perms(tot) {
        total += 1;
        let ok = e.iter().all(|&(x, y)| {
            let xi = xs.binary_search(&x).unwrap();
            let yi = ys.binary_search(&y).unwrap();
            perm[xi] < perm[nx + yi]
        });
        if ok {
            good += 1;
        }
    }
    BigRational::new(BigInt::from(good), BigInt::from(total))
}

/// Connected components of the edge set (components are independent under
/// any i.i.d. model, so the expectation factors across them).
pub fn components(edges: &[(u8, u8)]) -> Vec<Edges> {
    let e = dedup(edges);
    let n = e.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(comp: &mut Vec<usize>, i: usize) -> usize {
        if comp[i] != i {
            let r = find(comp, comp[i]);
            comp[i] = r;
        }
        comp[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if e[i].0 == e[j].0 || e[i].1 == e[j].1 {
                let (ri, rj) = (find(&mut comp, i), find(&mut comp, j));
                if ri != rj {
                    comp[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Edges> = Default::default();
    for i in 0..n {
        let r = find(&mut comp, i);
        groups.entry(r).or_default().push(e[i]);
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn frac(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn canonical_identifies_relabelings() {
        // I_ij I_kj I_iq I_kl is the same pattern as I_ij I_kj I_il I_kt
        let a = canonical(&[(0, 0), (1, 0), (0, 3), (1, 1)]);
        let b = canonical(&[(0, 0), (1, 0), (0, 1), (1, 2)]);
        assert_eq!(a, b);
        // ... but not the same as the four-cycle
        let c = canonical(&[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_ne!(a, c);
    }

    #[test]
    fn null_expectations_of_small_patterns() {
        assert_eq!(null_expectation(&[(0, 0)]), frac(1, 2));
        assert_eq!(null_expectation(&[(0, 0), (1, 0)]), frac(1, 3));
        assert_eq!(null_expectation(&[(0, 0), (1, 1)]), frac(1, 4));
        assert_eq!(null_expectation(&[(0, 0), (1, 0), (1, 1)]), frac(5, 24));
        // four-cycle: both X below both Y
        assert_eq!(null_expectation(&[(0, 0), (1, 0), (0, 1), (1, 1)]), frac(1, 6));
    }

    #[test]
    fn components_split_disjoint_parts() {
        let comps = components(&[(0, 0), (1, 1), (2, 2), (2, 3)]);
        assert_eq!(comps.len(), 3);
        let product: BigRational = comps.iter().map(|c| null_expectation(c)).product();
        assert_eq!(product, frac(1, 12));
        assert_eq!(null_expectation(&[(0, 0), (1, 1), (2, 2), (2, 3)]), frac(1, 12));
        let _ = BigRational::one();
    }
}
