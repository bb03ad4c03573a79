//! Parameter-space decomposition: restriction/prolongation over disjoint
//! index sets.
//!
//! A subdomain `d` is an index subset `C_d` of `{0, …, n−1}`. Restriction
//! gathers those coordinates; prolongation scatters them back, zero-filling
//! the rest. The subsets never overlap and jointly cover every coordinate,
//! so restriction after prolongation is the identity and prolongations of
//! distinct subdomains occupy disjoint coordinates.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// A disjoint, exhaustive split of `{0, …, n−1}` into index subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    subsets: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that the subsets are non-empty, in range, pairwise disjoint,
    /// and cover all `n` coordinates. Each subset is stored sorted ascending.
    pub fn new(n: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("partition dimension must be at least 1"));
        }
        if subsets.is_empty() {
            return Err(Error::domain("partition needs at least one subdomain"));
        }
        let mut owner = vec![false; n];
        let mut sorted = Vec::with_capacity(subsets.len());
        for (d, mut subset) in subsets.into_iter().enumerate() {
            if subset.is_empty() {
                return Err(Error::domain(format!("subdomain {d} is empty")));
            }
            subset.sort_unstable();
            for &i in &subset {
                if i >= n {
                    return Err(Error::Range {
                        what: "partition coordinates",
                        index: i,
                        len: n,
                    });
                }
                if owner[i] {
                    return Err(Error::domain(format!(
                        "coordinate {i} appears in more than one subdomain"
                    )));
                }
                owner[i] = true;
            }
            sorted.push(subset);
        }
        if let Some(missing) = owner.iter().position(|&c| !c) {
            return Err(Error::domain(format!(
                "coordinate {missing} is not covered by any subdomain"
            )));
        }
        Ok(Partition { n, subsets: sorted })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn subdomain_count(&self) -> usize {
        self.subsets.len()
    }

    pub fn subset(&self, d: usize) -> Result<&[usize]> {
        self.subsets
            .get(d)
            .map(Vec::as_slice)
            .ok_or(Error::Range {
                what: "subdomains",
                index: d,
                len: self.subsets.len(),
            })
    }

    pub fn subset_len(&self, d: usize) -> Result<usize> {
        self.subset(d).map(<[usize]>::len)
    }
}

/// Gathers the coordinates of subdomain `d`: `R_d θ`.
pub fn restrict(p: &Partition, d: usize, theta: &ParamVector) -> Result<ParamVector> {
    if theta.len() != p.n {
        return Err(Error::Dimension {
            context: "restrict",
            expected: p.n,
            actual: theta.len(),
        });
    }
    let subset = p.subset(d)?;
    let out: Vec<f64> = subset.iter().map(|&i| theta[i]).collect();
    ParamVector::checked(out, "restrict")
}

/// Scatters a subdomain vector back to full size, zero elsewhere: `R_dᵀ v`.
pub fn prolong(p: &Partition, d: usize, local: &ParamVector) -> Result<ParamVector> {
    let subset = p.subset(d)?;
    if local.len() != subset.len() {
        return Err(Error::Dimension {
            context: "prolong",
            expected: subset.len(),
            actual: local.len(),
        });
    }
    let mut out = vec![0.0; p.n];
    for (k, &i) in subset.iter().enumerate() {
        out[i] = local[k];
    }
    ParamVector::checked(out, "prolong")
}

/// How `make_partition` carves up the coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Contiguous blocks of near-equal size; the first `n mod N` blocks get
    /// one extra coordinate.
    EvenBlocks,
    /// Group whole layers (given their parameter counts, in order) into
    /// contiguous blocks, minimizing the largest block's parameter count.
    LayerBlocks(Vec<usize>),
}

/// Builds a partition of `n` coordinates into `subdomains` subsets.
pub fn make_partition(
    n: usize,
    strategy: &PartitionStrategy,
    subdomains: usize,
) -> Result<Partition> {
    if subdomains == 0 {
        return Err(Error::domain("subdomain count must be at least 1"));
    }
    match strategy {
        PartitionStrategy::EvenBlocks => {
            if subdomains > n {
                return Err(Error::domain(format!(
                    "cannot split {n} coordinates into {subdomains} non-empty blocks"
                )));
            }
            let base = n / subdomains;
            let extra = n % subdomains;
            let mut subsets = Vec::with_capacity(subdomains);
            let mut start = 0;
            for d in 0..subdomains {
                let len = base + usize::from(d < extra);
                subsets.push((start..start + len).collect());
                start += len;
            }
            Partition::new(n, subsets)
        }
        PartitionStrategy::LayerBlocks(counts) => {
            let total: usize = counts.iter().sum();
            if total != n {
                return Err(Error::Dimension {
                    context: "layer parameter counts",
                    expected: n,
                    actual: total,
                });
            }
            let ranges = layer_block_ranges(counts, subdomains)?;
            let mut offsets = Vec::with_capacity(counts.len() + 1);
            offsets.push(0);
            for &c in counts {
                offsets.push(offsets.last().unwrap() + c);
            }
            let subsets = ranges
                .iter()
                .map(|r| (offsets[r.start]..offsets[r.end]).collect())
                .collect();
            Partition::new(n, subsets)
        }
    }
}

/// Splits the layer sequence into `blocks` contiguous groups minimizing the
/// largest group's total parameter count. Returns layer-index ranges.
pub fn layer_block_ranges(counts: &[usize], blocks: usize) -> Result<Vec<Range<usize>>> {
    let layers = counts.len();
    if blocks == 0 {
        return Err(Error::domain("block count must be at least 1"));
    }
    if blocks > layers {
        return Err(Error::domain(format!(
            "cannot group {layers} layers into {blocks} non-empty blocks"
        )));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::domain("layer parameter counts must be positive"));
    }

    let mut prefix = Vec::with_capacity(layers + 1);
    prefix.push(0usize);
    for &c in counts {
        prefix.push(prefix.last().unwrap() + c);
    }
    let span = |a: usize, b: usize| prefix[b] - prefix[a];

    // dp[j][i]: minimal possible max-block-size using j blocks for the first
    // i layers. Small inputs, so the quadratic sweep is fine.
    let mut dp = vec![vec![usize::MAX; layers + 1]; blocks + 1];
    let mut cut = vec![vec![0usize; layers + 1]; blocks + 1];
    for i in 1..=layers {
        dp[1][i] = span(0, i);
    }
    for j in 2..=blocks {
        for i in j..=layers {
            for t in (j - 1)..i {
                if dp[j - 1][t] == usize::MAX {
                    continue;
                }
                let cand = dp[j - 1][t].max(span(t, i));
                if cand < dp[j][i] {
                    dp[j][i] = cand;
                    cut[j][i] = t;
                }
            }
        }
    }

    let mut bounds = vec![layers];
    let mut i = layers;
    for j in (2..=blocks).rev() {
        i = cut[j][i];
        bounds.push(i);
    }
    bounds.push(0);
    bounds.reverse();
    Ok(bounds.windows(2).map(|w| w[0]..w[1]).collect())
}
