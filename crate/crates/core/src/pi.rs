//! The comparison-probability vector: expectations of indicator products
//! over distinct index patterns, which parameterize every joint moment.
//!
//! The index names skip 11 on purpose: the source numbering has no pi_11 and
//! renumbering would make the formulas harder to cross-read.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{chunk_len, chunk_rng, n_chunks, Sampler, CHUNK_SIZE};
use crate::error::{Error, Result};
use crate::pattern::canonical;
use crate::scalar::Scalar;

/// Names of the thirteen comparison probabilities. There is no `P11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pi {
    P0,
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    P10,
    P12,
    P13,
}

impl Pi {
    pub const ALL: [Pi; 13] = [
        Pi::P0,
        Pi::P1,
        Pi::P2,
        Pi::P3,
        Pi::P4,
        Pi::P5,
        Pi::P6,
        Pi::P7,
        Pi::P8,
        Pi::P9,
        Pi::P10,
        Pi::P12,
        Pi::P13,
    ];

    pub fn slot(self) -> usize {
        match self {
            Pi::P0 => 0,
            Pi::P1 => 1,
            Pi::P2 => 2,
            Pi::P3 => 3,
            Pi::P4 => 4,
            Pi::P5 => 5,
            Pi::P6 => 6,
            Pi::P7 => 7,
            Pi::P8 => 8,
            Pi::P9 => 9,
            Pi::P10 => 10,
            Pi::P12 => 11,
            Pi::P13 => 12,
        }
    }

    /// The defining indicator pattern; edge (a, b) is the event X_a < Y_b.
    pub fn edges(self) -> &'static [(u8, u8)] {
        match self {
            Pi::P0 => &[(0, 0)],
            Pi::P1 => &[(0, 0), (1, 0)],
            Pi::P2 => &[(0, 0), (1, 0), (2, 0)],
            Pi::P3 => &[(0, 0), (1, 0), (2, 0), (2, 1)],
            Pi::P4 => &[(0, 0), (1, 0), (1, 1)],
            Pi::P5 => &[(0, 0), (1, 0), (0, 1), (2, 1)],
            Pi::P6 => &[(0, 0), (1, 0), (2, 0), (3, 0)],
            Pi::P7 => &[(0, 0), (1, 0), (0, 1), (0, 2)],
            Pi::P8 => &[(0, 0), (1, 0), (0, 1), (1, 1)],
            Pi::P9 => &[(0, 0), (0, 1)],
            Pi::P10 => &[(0, 0), (1, 0), (0, 1), (1, 2)],
            Pi::P12 => &[(0, 0), (0, 1), (0, 2)],
            Pi::P13 => &[(0, 0), (0, 1), (0, 2), (0, 3)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pi::P0 => "pi0",
            Pi::P1 => "pi1",
            Pi::P2 => "pi2",
            Pi::P3 => "pi3",
            Pi::P4 => "pi4",
            Pi::P5 => "pi5",
            Pi::P6 => "pi6",
            Pi::P7 => "pi7",
            Pi::P8 => "pi8",
            Pi::P9 => "pi9",
            Pi::P10 => "pi10",
            Pi::P12 => "pi12",
            Pi::P13 => "pi13",
        }
    }
}

/// The thirteen comparison probabilities, exact or floating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiVector<T> {
    values: [T; 13],
}

impl<T: Clone> PiVector<T> {
    pub fn from_fn(mut f: impl FnMut(Pi) -> T) -> Self {
        PiVector { values: Pi::ALL.map(&mut f) }
    }

    pub fn constant(v: T) -> Self {
        PiVector::from_fn(|_| v.clone())
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> PiVector<U> {
        PiVector { values: Pi::ALL.map(|p| f(&self.values[p.slot()])) }
    }
}

impl<T> std::ops::Index<Pi> for PiVector<T> {
    type Output = T;
    fn index(&self, p: Pi) -> &T {
        &self.values[p.slot()]
    }
}

impl<T> std::ops::IndexMut<Pi> for PiVector<T> {
    fn index_mut(&mut self, p: Pi) -> &mut T {
        &mut self.values[p.slot()]
    }
}

impl<T: Scalar> PiVector<T> {
    /// Every entry must lie in [0, 1].
    pub fn validate(&self) -> Result<()> {
        for p in Pi::ALL {
            let v = &self[p];
            if *v < T::zero() || *v > T::one() {
                return Err(Error::Domain(format!("{} outside [0,1]", p.name())));
            }
        }
        Ok(())
    }
}

impl PiVector<BigRational> {
    pub fn to_f64(&self) -> PiVector<f64> {
        self.map(|r| r.to_f64().expect("rational fits in f64"))
    }
}

fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact comparison probabilities under the null (one common continuous
/// population). pi10 is 2/15, certified by the order-statistics oracle: the
/// printed table's 1/6 for that line belongs to the four-cycle pattern (pi8).
pub fn null_pi_vector() -> PiVector<BigRational> {
    PiVector::from_fn(|p| match p {
        Pi::P0 => frac(1, 2),
        Pi::P1 => frac(1, 3),
        Pi::P2 => frac(1, 4),
        Pi::P3 => frac(3, 20),
        Pi::P4 => frac(5, 24),
        Pi::P5 => frac(2, 15),
        Pi::P6 => frac(1, 5),
        Pi::P7 => frac(3, 20),
        Pi::P8 => frac(1, 6),
        Pi::P9 => frac(1, 3),
        Pi::P10 => frac(2, 15),
        Pi::P12 => frac(1, 4),
        Pi::P13 => frac(1, 5),
    })
}

/// One entry of the null indicator-moment table.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMoment {
    /// Subscript pattern as printed, e.g. "ij,kj,kl".
    pub label: &'static str,
    /// Edges of the pattern, letters mapped i,k,s,p -> 0..3 and j,l,t,q -> 0..3.
    pub edges: &'static [(u8, u8)],
    /// Certified exact value (two printed entries are corrected; see
    /// FORMULA_ERRATA.md).
    pub value: BigRational,
}

/// The transition-value table: every indicator-product expectation the
/// moment derivations substitute under the null, keyed by pattern.
#[derive(Debug, Clone)]
pub struct NullIndicatorTable {
    pub entries: Vec<IndicatorMoment>,
}

impl NullIndicatorTable {
    /// Look up by pattern, up to relabeling of indices within each side.
    pub fn lookup(&self, edges: &[(u8, u8)]) -> Option<&IndicatorMoment> {
        let c = canonical(edges);
        self.entries.iter().find(|e| canonical(e.edges) == c)
    }
}

pub fn null_indicator_table() -> NullIndicatorTable {
    // letters: i,k,s,p -> x 0,1,2,3 ; j,l,t,q -> y 0,1,2,3
    let rows: [(&'static str, &'static [(u8, u8)], (i64, i64)); 25] = [
        ("ij", &[(0, 0)], (1, 2)),
        ("ij,kj", &[(0, 0), (1, 0)], (1, 3)),
        ("ij,il", &[(0, 0), (0, 1)], (1, 3)),
        ("ij,kl", &[(0, 0), (1, 1)], (1, 4)),
        ("ij,il,it", &[(0, 0), (0, 1), (0, 2)], (1, 4)),
        ("ij,kj,sj", &[(0, 0), (1, 0), (2, 0)], (1, 4)),
        ("ij,kj,kl", &[(0, 0), (1, 0), (1, 1)], (5, 24)),
        ("ij,kj,sj,st", &[(0, 0), (1, 0), (2, 0), (2, 2)], (3, 20)),
        ("ij,kj,it,st", &[(0, 0), (1, 0), (0, 2), (2, 2)], (2, 15)),
        ("ij,kj,sj,pj", &[(0, 0), (1, 0), (2, 0), (3, 0)], (1, 5)),
        ("ij,kj,iq,it", &[(0, 0), (1, 0), (0, 3), (0, 2)], (3, 20)),
        // printed as 1/6; that value belongs to the four-cycle ij,kj,il,kl
        ("ij,kj,il,kt", &[(0, 0), (1, 0), (0, 1), (1, 2)], (2, 15)),
        ("ij,kj,iq,kl", &[(0, 0), (1, 0), (0, 3), (1, 1)], (2, 15)),
        ("ij,il,kj", &[(0, 0), (0, 1), (1, 0)], (5, 24)),
        ("ij,il,iq,st", &[(0, 0), (0, 1), (0, 3), (2, 2)], (1, 8)),
        ("ij,kj,pj,st", &[(0, 0), (1, 0), (3, 0), (2, 2)], (1, 8)),
        ("ij,il,pq,pt", &[(0, 0), (0, 1), (3, 3), (3, 2)], (1, 9)),
        ("ij,kj,pq,sq", &[(0, 0), (1, 0), (3, 3), (2, 3)], (1, 9)),
        ("ij,il,pq,sq", &[(0, 0), (0, 1), (3, 3), (2, 3)], (1, 9)),
        // printed as 1/9; the pattern factors as (ij,kj,il) x (st) = 5/48
        ("ij,kj,il,st", &[(0, 0), (1, 0), (0, 1), (2, 2)], (5, 48)),
        ("ij,kj,pq,st", &[(0, 0), (1, 0), (3, 3), (2, 2)], (1, 12)),
        ("ij,kl,st,sq", &[(0, 0), (1, 1), (2, 2), (2, 3)], (1, 12)),
        ("ij,kl,st,pq", &[(0, 0), (1, 1), (2, 2), (3, 3)], (1, 16)),
        ("ij,il,it,iq", &[(0, 0), (0, 1), (0, 2), (0, 3)], (1, 5)),
        ("ij,kj,iq,st", &[(0, 0), (1, 0), (0, 3), (2, 2)], (5, 48)),
    ];
    NullIndicatorTable {
        entries: rows
            .iter()
            .map(|&(label, edges, (n, d))| IndicatorMoment { label, edges, value: frac(n, d) })
            .collect(),
    }
}

/// Monte Carlo estimate of the full vector under arbitrary alternatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiEstimate {
    pub value: PiVector<f64>,
    pub standard_error: PiVector<f64>,
    pub replications: u64,
    pub seed: u64,
}

/// Estimates each probability by drawing its minimal variate set (up to four
/// X's and four Y's) independently per replicate, so the thirteen estimates
/// are independent with plain binomial standard errors.
///
/// Deterministic given the seed; see `dist` for the worker seeding scheme.
pub fn pi_monte_carlo(
    sampler_x: Sampler,
    sampler_y: Sampler,
    replications: u64,
    seed: u64,
) -> Result<PiEstimate> {
    if replications == 0 {
        return Err(Error::Domain("replications must be >= 1".into()));
    }
    sampler_x.validate()?;
    sampler_y.validate()?;
    let chunks = n_chunks(replications, CHUNK_SIZE);
    let shapes: Vec<(&'static [(u8, u8)], usize, usize)> = Pi::ALL
        .iter()
        .map(|p| {
            let edges = p.edges();
            let nx = edges.iter().map(|e| e.0).max().unwrap() as usize + 1;
            let ny = edges.iter().map(|e| e.1).max().unwrap() as usize + 1;
            (edges, nx, ny)
        })
        .collect();
    let tallies = (0..chunks)
        .into_par_iter()
        .map(|k| -> Result<[u64; 13]> {
            let mut rng = chunk_rng(seed, k);
            let dist_x = sampler_x.compile();
            let dist_y = sampler_y.compile();
            let mut counts = [0u64; 13];
            let mut xs = [0.0f64; 4];
            let mut ys = [0.0f64; 4];
            for _ in 0..chunk_len(replications, CHUNK_SIZE, k) {
                for (pidx, &(edges, nx, ny)) in shapes.iter().enumerate() {
                    for x in xs.iter_mut().take(nx) {
                        *x = dist_x.sample(&mut rng);
                    }
                    for y in ys.iter_mut().take(ny) {
                        *y = dist_y.sample(&mut rng);
                    }
                    let mut hit = true;
                    for &(a, b) in edges {
                        let (x, y) = (xs[a as usize], ys[b as usize]);
                        if x == y {
                            return Err(Error::Tie);
                        }
                        if x >= y {
                            hit = false;
                        }
                    }
                    if hit {
                        counts[pidx] += 1;
                    }
                }
            }
            Ok(counts)
        })
        .try_reduce(
            || [0u64; 13],
            |a, b| {
                let mut out = [0u64; 13];
                for i in 0..13 {
                    out[i] = a[i] + b[i];
                }
                Ok(out)
            },
        )?;
    let r = replications as f64;
    let value = PiVector::from_fn(|p| tallies[p.slot()] as f64 / r);
    let standard_error = PiVector::from_fn(|p| {
        let ph = tallies[p.slot()] as f64 / r;
        (ph * (1.0 - ph) / r).sqrt()
    });
    Ok(PiEstimate { value, standard_error, replications, seed })
}

/// Exact plug-in estimates: for each pattern, the average of the indicator
/// product over all ordered selections of distinct indices.
///
/// Counting is done with rank prefix statistics, O(|xs|·|ys|·max(|xs|,|ys|))
/// in the worst case, which is fine at desk scale.
pub fn pi_plugin_from_data(xs: &[f64], ys: &[f64]) -> Result<PiVector<BigRational>> {
    let sx = xs.len();
    let sy = ys.len();
    if sx < 4 || sy < 4 {
        return Err(Error::InsufficientData { needed: 4, got_x: sx, got_y: sy });
    }
    for x in xs {
        for y in ys {
            if x == y {
                return Err(Error::Tie);
            }
        }
    }
    // a[j] = #{x < ys[j]}, b[i] = #{y > xs[i]}
    let a: Vec<u128> = ys.iter().map(|y| xs.iter().filter(|x| *x < y).count() as u128).collect();
    let b: Vec<u128> = xs.iter().map(|x| ys.iter().filter(|y| *y > x).count() as u128).collect();
    let ff = |v: u128, k: u128| -> u128 {
        let mut out = 1u128;
        for t in 0..k {
            if v <= t {
                return 0;
            }
            out *= v - t;
        }
        out
    };

    let mut num = [0u128; 13];
    num[Pi::P0.slot()] = a.iter().sum();
    num[Pi::P1.slot()] = a.iter().map(|&v| ff(v, 2)).sum();
    num[Pi::P2.slot()] = a.iter().map(|&v| ff(v, 3)).sum();
    num[Pi::P6.slot()] = a.iter().map(|&v| ff(v, 4)).sum();
    num[Pi::P9.slot()] = b.iter().map(|&v| ff(v, 2)).sum();
    num[Pi::P12.slot()] = b.iter().map(|&v| ff(v, 3)).sum();
    num[Pi::P13.slot()] = b.iter().map(|&v| ff(v, 4)).sum();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            if x < y {
                num[Pi::P4.slot()] += (a[j] - 1) * (b[i] - 1);
                num[Pi::P3.slot()] += ff(a[j] - 1, 2) * (b[i] - 1);
                num[Pi::P7.slot()] += ff(b[i] - 1, 2) * (a[j] - 1);
            }
        }
    }
    // pi8: ordered pairs of distinct Y's, ordered pairs of X's below both
    for j in 0..sy {
        for l in 0..sy {
            if l == j {
                continue;
            }
            let c = if ys[j] < ys[l] { a[j] } else { a[l] };
            num[Pi::P8.slot()] += ff(c, 2);
        }
    }
    // pi5: middle X below two distinct Y's; pendant X's at each end
    for i in 0..sx {
        for j in 0..sy {
            if xs[i] >= ys[j] {
                continue;
            }
            for t in 0..sy {
                if t == j || xs[i] >= ys[t] {
                    continue;
                }
                let c = if ys[j] < ys[t] { a[j] } else { a[t] };
                num[Pi::P5.slot()] += (a[j] - 1) * (a[t] - 1) - (c - 1);
            }
        }
    }
    // pi10: two distinct X's below a shared Y; each with its own second Y
    for i in 0..sx {
        for k in 0..sx {
            if k == i {
                continue;
            }
            let d = if xs[i] > xs[k] { b[i] } else { b[k] };
            for j in 0..sy {
                if xs[i] < ys[j] && xs[k] < ys[j] {
                    num[Pi::P10.slot()] += (b[i] - 1) * (b[k] - 1) - (d - 1);
                }
            }
        }
    }

    let (sx, sy) = (sx as u128, sy as u128);
    let den = |kx: u128, ky: u128| ff(sx, kx) * ff(sy, ky);
    let denom = [
        den(1, 1), // pi0
        den(2, 1), // pi1
        den(3, 1), // pi2
        den(3, 2), // pi3
        den(2, 2), // pi4
        den(3, 2), // pi5
        den(4, 1), // pi6
        den(2, 3), // pi7
        den(2, 2), // pi8
        den(1, 2), // pi9
        den(2, 3), // pi10
        den(1, 3), // pi12
        den(1, 4), // pi13
    ];
    Ok(PiVector::from_fn(|p| {
        let s = p.slot();
        BigRational::new(BigInt::from(num[s]), BigInt::from(denom[s]))
    }))
}
