//! Gene-level partitions, diploid states and merger structures.
//!
//! Genes are numbered `1..=n`. Internally a block is a bitmask over
//! `u128`, bit `i - 1` standing for gene `i`, so samples are limited to
//! [`MAX_GENES`] genes. Blocks are always kept in canonical order
//! (ascending by smallest member).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported sample size.
pub const MAX_GENES: usize = 128;
/// Largest `n` accepted by [`enumerate_partitions`].
pub const MAX_ENUMERATE_PARTITIONS: usize = 10;
/// Largest `n` accepted by [`enumerate_diploid_states`].
pub const MAX_ENUMERATE_DIPLOID: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("sample size {0} outside supported range 1..={MAX_GENES}")]
    SampleSize(usize),
    #[error("gene {gene} outside 1..={n}")]
    GeneOutOfRange { gene: usize, n: usize },
    #[error("gene {0} appears in more than one block")]
    Overlap(usize),
    #[error("blocks do not cover 1..={0}")]
    NotCovering(usize),
    #[error("empty block")]
    EmptyBlock,
    #[error("block index {index} out of range for {blocks} blocks")]
    BlockIndex { index: usize, blocks: usize },
    #[error("block {0} occurs in two pairs")]
    PairedTwice(usize),
    #[error("a block cannot be paired with itself")]
    SelfPair,
    #[error("partitions have different sample sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("target partition is not a coarsening of the source")]
    Incompatible,
    #[error("enumeration limited to n <= {limit}, got {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid merger spec: {0}")]
    InvalidSpec(String),
    #[error("cannot parse partition: {0}")]
    Parse(String),
}

#[inline]
fn full_mask(n: usize) -> u128 {
    if n == 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// Members of a block mask as 1-based gene indices.
pub fn mask_members(mask: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        let tz = m.trailing_zeros() as usize;
        out.push(tz + 1);
        m &= m - 1;
    }
    out
}

/// A set partition of `{1..n}` with canonically ordered blocks.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    blocks: Vec<u128>,
}

impl Partition {
    /// The finest partition `{{1},{2},...,{n}}`.
    pub fn singletons(n: usize) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_GENES {
            return Err(PartitionError::SampleSize(n));
        }
        Ok(Self {
            n,
            blocks: (0..n).map(|i| 1u128 << i).collect(),
        })
    }

    /// The coarsest partition `{{1,...,n}}`.
    pub fn single_block(n: usize) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_GENES {
            return Err(PartitionError::SampleSize(n));
        }
        Ok(Self {
            n,
            blocks: vec![full_mask(n)],
        })
    }

    /// Builds a partition from 1-based gene lists in any order.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_GENES {
            return Err(PartitionError::SampleSize(n));
        }
        let mut masks = Vec::with_capacity(blocks.len());
        for block in blocks {
            let mut mask = 0u128;
            for &g in block {
                if g == 0 || g > n {
                    return Err(PartitionError::GeneOutOfRange { gene: g, n });
                }
                let bit = 1u128 << (g - 1);
                if mask & bit != 0 {
                    return Err(PartitionError::Overlap(g));
                }
                mask |= bit;
            }
            masks.push(mask);
        }
        Self::from_masks(n, masks)
    }

    /// Builds a partition from bitmask blocks in any order.
    pub fn from_masks(n: usize, mut masks: Vec<u128>) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_GENES {
            return Err(PartitionError::SampleSize(n));
        }
        let full = full_mask(n);
        let mut seen = 0u128;
        for &m in &masks {
            if m == 0 {
                return Err(PartitionError::EmptyBlock);
            }
            if m & !full != 0 {
                let g = (m & !full).trailing_zeros() as usize + 1;
                return Err(PartitionError::GeneOutOfRange { gene: g, n });
            }
            if seen & m != 0 {
                return Err(PartitionError::Overlap((seen & m).trailing_zeros() as usize + 1));
            }
            seen |= m;
        }
        if seen != full {
            return Err(PartitionError::NotCovering(n));
        }
        masks.sort_unstable_by_key(|m| m.trailing_zeros());
        Ok(Self { n, blocks: masks })
    }

    /// Canonicalizes masks already known to be a valid partition.
    pub(crate) fn from_masks_unchecked(n: usize, mut masks: Vec<u128>) -> Self {
        masks.sort_unstable_by_key(|m| m.trailing_zeros());
        debug_assert_eq!(masks.iter().fold(0u128, |a, m| a | m), full_mask(n));
        Self { n, blocks: masks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Bitmask blocks in canonical order.
    pub fn masks(&self) -> &[u128] {
        &self.blocks
    }

    /// 1-based members of every block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|&m| mask_members(m)).collect()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|m| m.count_ones() as usize).collect()
    }

    /// True when every block of `self` is a union of blocks of `finer`.
    pub fn is_coarsening_of(&self, finer: &Partition) -> bool {
        self.n == finer.n
            && finer
                .blocks
                .iter()
                .all(|&f| self.blocks.iter().any(|&c| c & f == f))
    }

    /// Merges groups of blocks (0-based block indices); other blocks stay.
    pub fn merge_groups(&self, groups: &[Vec<usize>]) -> Result<Partition, PartitionError> {
        let b = self.blocks.len();
        let mut used = vec![false; b];
        let mut masks = Vec::with_capacity(b);
        for group in groups {
            let mut mask = 0u128;
            for &i in group {
                if i >= b {
                    return Err(PartitionError::BlockIndex { index: i, blocks: b });
                }
                if used[i] {
                    return Err(PartitionError::PairedTwice(i));
                }
                used[i] = true;
                mask |= self.blocks[i];
            }
            if mask != 0 {
                masks.push(mask);
            }
        }
        masks.extend((0..b).filter(|&i| !used[i]).map(|i| self.blocks[i]));
        Ok(Self::from_masks_unchecked(self.n, masks))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (bi, &m) in self.blocks.iter().enumerate() {
            if bi > 0 {
                f.write_str(",")?;
            }
            f.write_str("[")?;
            for (gi, g) in mask_members(m).into_iter().enumerate() {
                if gi > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{g}")?;
            }
            f.write_str("]")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

/// Parses nested integer lists such as `[[1,2],[3]]`.
fn parse_nested(s: &str) -> Result<Vec<Vec<usize>>, PartitionError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| PartitionError::Parse(s.to_string()))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = inner;
    loop {
        let body = rest
            .strip_prefix('[')
            .ok_or_else(|| PartitionError::Parse(s.to_string()))?;
        let close = body
            .find(']')
            .ok_or_else(|| PartitionError::Parse(s.to_string()))?;
        let items = &body[..close];
        let mut block = Vec::new();
        if !items.is_empty() {
            for tok in items.split(',') {
                block.push(
                    tok.parse::<usize>()
                        .map_err(|_| PartitionError::Parse(s.to_string()))?,
                );
            }
        }
        out.push(block);
        rest = &body[close + 1..];
        if rest.is_empty() {
            break;
        }
        rest = rest
            .strip_prefix(',')
            .ok_or_else(|| PartitionError::Parse(s.to_string()))?;
    }
    Ok(out)
}

impl FromStr for Partition {
    type Err = PartitionError;

    /// The sample size is the largest gene index that occurs.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let blocks = parse_nested(s)?;
        let n = blocks.iter().flatten().copied().max().unwrap_or(0);
        Partition::from_blocks(n, &blocks)
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.blocks().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let blocks = Vec::<Vec<usize>>::deserialize(deserializer)?;
        let n = blocks.iter().flatten().copied().max().unwrap_or(0);
        Partition::from_blocks(n, &blocks).map_err(serde::de::Error::custom)
    }
}

/// A partition together with a grouping of some blocks into diploid
/// individuals. `pairs` holds 0-based block indices `(i, j)` with `i < j`,
/// sorted; the text form uses 1-based block indices.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DiploidStateRepr", into = "DiploidStateRepr")]
pub struct DiploidState {
    partition: Partition,
    pairs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct DiploidStateRepr {
    blocks: Vec<Vec<usize>>,
    pairs: Vec<[usize; 2]>,
}

impl TryFrom<DiploidStateRepr> for DiploidState {
    type Error = PartitionError;

    fn try_from(r: DiploidStateRepr) -> Result<Self, Self::Error> {
        let n = r.blocks.iter().flatten().copied().max().unwrap_or(0);
        let partition = Partition::from_blocks(n, &r.blocks)?;
        // Block indices in the serialized form refer to canonical order.
        let pairs = r
            .pairs
            .iter()
            .map(|p| {
                if p[0] == 0 || p[1] == 0 {
                    Err(PartitionError::BlockIndex { index: 0, blocks: partition.block_count() })
                } else {
                    Ok((p[0] - 1, p[1] - 1))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        DiploidState::new(partition, pairs)
    }
}

impl From<DiploidState> for DiploidStateRepr {
    fn from(s: DiploidState) -> Self {
        Self {
            blocks: s.partition.blocks(),
            pairs: s.pairs.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

impl DiploidState {
    /// Validates the pairing; block indices are 0-based.
    pub fn new(partition: Partition, pairs: Vec<(usize, usize)>) -> Result<Self, PartitionError> {
        let b = partition.block_count();
        let mut used = vec![false; b];
        let mut canon = Vec::with_capacity(pairs.len());
        for (i, j) in pairs {
            if i == j {
                return Err(PartitionError::SelfPair);
            }
            for k in [i, j] {
                if k >= b {
                    return Err(PartitionError::BlockIndex { index: k, blocks: b });
                }
                if used[k] {
                    return Err(PartitionError::PairedTwice(k));
                }
                used[k] = true;
            }
            canon.push((i.min(j), i.max(j)));
        }
        canon.sort_unstable();
        Ok(Self { partition, pairs: canon })
    }

    /// The completely dispersed state with the given partition.
    pub fn dispersed(partition: Partition) -> Self {
        Self { partition, pairs: Vec::new() }
    }

    /// Builds a state from block masks and pairs of masks that share an
    /// individual. Canonicalizes block order.
    pub(crate) fn from_mask_pairs(n: usize, masks: Vec<u128>, paired: &[(u128, u128)]) -> Self {
        let partition = Partition::from_masks_unchecked(n, masks);
        let index: HashMap<u128, usize> = partition
            .masks()
            .iter()
            .enumerate()
            .map(|(i, &m)| (m, i))
            .collect();
        let mut pairs: Vec<(usize, usize)> = paired
            .iter()
            .map(|(a, b)| {
                let (i, j) = (index[a], index[b]);
                (i.min(j), i.max(j))
            })
            .collect();
        pairs.sort_unstable();
        Self { partition, pairs }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    /// Number of diploid individuals carrying at least one tracked gene.
    pub fn individual_count(&self) -> usize {
        self.partition.block_count() - self.pairs.len()
    }

    pub fn is_dispersed(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl fmt::Display for DiploidState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};pairs=[", self.partition)?;
        for (k, (i, j)) in self.pairs.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "[{},{}]", i + 1, j + 1)?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for DiploidState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiploidState({self})")
    }
}

impl FromStr for DiploidState {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (part, pairs) = match s.split_once(";pairs=") {
            Some((p, q)) => (p, Some(q)),
            None => (s, None),
        };
        let partition: Partition = part.parse()?;
        let pairs = match pairs {
            Some(q) => parse_nested(q)?
                .into_iter()
                .map(|v| match v.as_slice() {
                    [i, j] if *i >= 1 && *j >= 1 => Ok((i - 1, j - 1)),
                    _ => Err(PartitionError::Parse(s.to_string())),
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        DiploidState::new(partition, pairs)
    }
}

/// Forgets the grouping of blocks into individuals.
pub fn complete_dispersion(state: &DiploidState) -> Partition {
    state.partition.clone()
}

/// The merger structure `(b; k_1, ..., k_j; s)` of one coalescent move.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MergerSpec {
    b: usize,
    group_sizes: Vec<usize>,
    singletons: usize,
}

impl MergerSpec {
    /// Group sizes may be given in any order; they are sorted descending.
    pub fn new(b: usize, mut group_sizes: Vec<usize>, singletons: usize) -> Result<Self, PartitionError> {
        if group_sizes.is_empty() {
            return Err(PartitionError::InvalidSpec("at least one merger group required".into()));
        }
        if group_sizes.iter().any(|&k| k < 2) {
            return Err(PartitionError::InvalidSpec("group sizes must be >= 2".into()));
        }
        if group_sizes.iter().sum::<usize>() + singletons != b {
            return Err(PartitionError::InvalidSpec(format!(
                "groups {group_sizes:?} plus {singletons} singletons do not sum to b={b}"
            )));
        }
        group_sizes.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { b, group_sizes, singletons })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn singletons(&self) -> usize {
        self.singletons
    }

    /// Number of merger groups `j`.
    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    /// Blocks after the move.
    pub fn blocks_after(&self) -> usize {
        self.group_sizes.len() + self.singletons
    }

    /// Number of distinct target partitions of `b` labelled blocks that
    /// realize this spec: `b! / (prod k_i! * s! * prod m_r!)`.
    pub fn multiplicity(&self) -> f64 {
        let mut ln = ln_factorial(self.b) - ln_factorial(self.singletons);
        for &k in &self.group_sizes {
            ln -= ln_factorial(k);
        }
        let mut i = 0;
        while i < self.group_sizes.len() {
            let mut j = i;
            while j < self.group_sizes.len() && self.group_sizes[j] == self.group_sizes[i] {
                j += 1;
            }
            ln -= ln_factorial(j - i);
            i = j;
        }
        ln.exp().round()
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

impl fmt::Display for MergerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};", self.b)?;
        for (i, k) in self.group_sizes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ";{})", self.singletons)
    }
}

impl fmt::Debug for MergerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MergerSpec{self}")
    }
}

/// Outcome of classifying a pair of partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transition {
    NoMerge,
    Merge(MergerSpec),
}

/// Classifies the move `from -> to`.
pub fn merger_spec(from: &Partition, to: &Partition) -> Result<Transition, PartitionError> {
    if from.n != to.n {
        return Err(PartitionError::SizeMismatch(from.n, to.n));
    }
    let mut counts = vec![0usize; to.blocks.len()];
    for &f in &from.blocks {
        let target = to
            .blocks
            .iter()
            .position(|&c| c & f == f)
            .ok_or(PartitionError::Incompatible)?;
        counts[target] += 1;
    }
    let group_sizes: Vec<usize> = counts.iter().copied().filter(|&c| c >= 2).collect();
    if group_sizes.is_empty() {
        return Ok(Transition::NoMerge);
    }
    let singletons = counts.iter().filter(|&&c| c == 1).count();
    Ok(Transition::Merge(MergerSpec::new(from.blocks.len(), group_sizes, singletons)?))
}

/// Bell numbers `B(0..=25)`.
pub fn bell_number(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Restricted growth strings of length `n`, in reverse lexicographic order
/// (all-singletons first, single block last).
pub(crate) fn restricted_growth_strings(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut a = vec![0u8; n];
    fn rec(a: &mut Vec<u8>, pos: usize, max: u8, out: &mut Vec<Vec<u8>>) {
        if pos == a.len() {
            out.push(a.clone());
            return;
        }
        for v in (0..=max + 1).rev() {
            a[pos] = v;
            rec(a, pos + 1, max.max(v), out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    a[0] = 0;
    rec(&mut a, 1, 0, &mut out);
    out
}

fn rgs_to_masks(rgs: &[u8], blocks_of: impl Fn(usize) -> u128) -> Vec<u128> {
    let k = rgs.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut masks = vec![0u128; k];
    for (i, &r) in rgs.iter().enumerate() {
        masks[r as usize] |= blocks_of(i);
    }
    masks
}

/// All set partitions of `{1..n}`, singletons first, single block last.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>, PartitionError> {
    if n > MAX_ENUMERATE_PARTITIONS {
        return Err(PartitionError::TooLarge { n, limit: MAX_ENUMERATE_PARTITIONS });
    }
    if n == 0 {
        return Err(PartitionError::SampleSize(0));
    }
    Ok(restricted_growth_strings(n)
        .iter()
        .map(|rgs| Partition::from_masks_unchecked(n, rgs_to_masks(rgs, |i| 1u128 << i)))
        .collect())
}

/// All coarsenings of `p` (including `p` itself), in the same order as
/// [`enumerate_partitions`] applied to its blocks.
pub fn coarsenings(p: &Partition) -> Vec<Partition> {
    restricted_growth_strings(p.block_count())
        .iter()
        .map(|rgs| Partition::from_masks_unchecked(p.n, rgs_to_masks(rgs, |i| p.blocks[i])))
        .collect()
}

/// All sets of `d` disjoint pairs drawn from `0..a`, each sorted.
pub(crate) fn matchings(a: usize, d: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        free: &mut Vec<bool>,
        start: usize,
        left: usize,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        let a = free.len();
        for i in start..a {
            if !free[i] {
                continue;
            }
            free[i] = false;
            for j in i + 1..a {
                if !free[j] {
                    continue;
                }
                free[j] = false;
                cur.push((i, j));
                rec(free, i + 1, left - 1, cur, out);
                cur.pop();
                free[j] = true;
            }
            free[i] = true;
        }
    }
    let mut out = Vec::new();
    rec(&mut vec![true; a], 0, d, &mut Vec::new(), &mut out);
    out
}

/// All diploid states over `{1..n}`: for every partition, the dispersed
/// state first, then states with `d = 1..=a/2` pairs.
pub fn enumerate_diploid_states(n: usize) -> Result<Vec<DiploidState>, PartitionError> {
    if n > MAX_ENUMERATE_DIPLOID {
        return Err(PartitionError::TooLarge { n, limit: MAX_ENUMERATE_DIPLOID });
    }
    let mut out = Vec::new();
    for p in enumerate_partitions(n)? {
        let a = p.block_count();
        for d in 0..=a / 2 {
            for m in matchings(a, d) {
                out.push(DiploidState { partition: p.clone(), pairs: m });
            }
        }
    }
    Ok(out)
}
