//! Transition rates of Xi-coalescents whose measure is a Kingman atom plus
//! finitely many k-fold equal-split components.
//!
//! A k-fold component with mixing law `mu` places its mass on atoms
//! `(x/k, ..., x/k, 0, ...)` with `k` equal coordinates. Because every such
//! measure is supported on a one-parameter curve, the rate of a merger
//! `(b; k_1..k_j; s)` reduces to a scalar integral against `mu`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use thiserror::Error;

use crate::partitions::{
    coarsenings, enumerate_partitions, merger_spec, MergerSpec, Partition, PartitionError, Transition,
    MAX_ENUMERATE_DIPLOID,
};
use crate::quadrature::{integrate_unit, QuadratureError};

/// Tolerance on the total mass of a measure flagged as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Largest `max_b` accepted by [`consistency_check`].
pub const MAX_CONSISTENCY_B: usize = 12;
/// Largest `n` accepted by [`generator_matrix`].
pub const MAX_GENERATOR_N: usize = MAX_ENUMERATE_DIPLOID;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("alpha = {0} outside the open interval (1,2)")]
    Alpha(f64),
    #[error("point-mass location x0 = {0} outside (0,1]")]
    PointLocation(f64),
    #[error("component weight {0} must be positive and finite")]
    Weight(f64),
    #[error("kingman mass {0} must be non-negative and finite")]
    KingmanMass(f64),
    #[error("fold must be at least 1")]
    Fold,
    #[error("measure flagged normalized has total mass {0}")]
    NotNormalized(f64),
    #[error("measure has zero total mass")]
    ZeroMass,
    #[error("max_b = {got} exceeds the limit {limit}")]
    MaxB { got: usize, limit: usize },
    #[error("cannot parse measure `{0}`")]
    Parse(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Mixing law of a k-fold component, on the total mass `x` of the atom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    /// Beta(2 - alpha, alpha) law.
    Beta { alpha: f64 },
    /// Dirac mass at `x0`.
    PointMass { x0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub fold: usize,
    pub mixing: Mixing,
    pub weight: f64,
}

impl Component {
    fn validate(&self) -> Result<(), RateError> {
        if self.fold == 0 {
            return Err(RateError::Fold);
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(RateError::Weight(self.weight));
        }
        match self.mixing {
            Mixing::Beta { alpha } if !(alpha > 1.0 && alpha < 2.0) => Err(RateError::Alpha(alpha)),
            Mixing::PointMass { x0 } if !(x0 > 0.0 && x0 <= 1.0) => Err(RateError::PointLocation(x0)),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "XiMeasureRepr", into = "XiMeasureRepr")]
pub struct XiMeasure {
    kingman_mass: f64,
    components: Vec<Component>,
    normalized: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct XiMeasureRepr {
    #[serde(default)]
    kingman_mass: f64,
    #[serde(default)]
    components: Vec<Component>,
    normalized: bool,
}

impl TryFrom<XiMeasureRepr> for XiMeasure {
    type Error = RateError;
    fn try_from(r: XiMeasureRepr) -> Result<Self, Self::Error> {
        XiMeasure::new(r.kingman_mass, r.components, r.normalized)
    }
}

impl From<XiMeasure> for XiMeasureRepr {
    fn from(m: XiMeasure) -> Self {
        Self {
            kingman_mass: m.kingman_mass,
            components: m.components,
            normalized: m.normalized,
        }
    }
}

impl XiMeasure {
    /// Validates every component. When `normalized` is set the total mass
    /// must equal 1; masses are never rescaled.
    pub fn new(kingman_mass: f64, components: Vec<Component>, normalized: bool) -> Result<Self, RateError> {
        if !(kingman_mass.is_finite() && kingman_mass >= 0.0) {
            return Err(RateError::KingmanMass(kingman_mass));
        }
        for c in &components {
            c.validate()?;
        }
        let m = Self { kingman_mass, components, normalized };
        let total = m.total_mass();
        if total == 0.0 {
            return Err(RateError::ZeroMass);
        }
        if normalized && (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(RateError::NotNormalized(total));
        }
        Ok(m)
    }

    pub fn kingman() -> Self {
        Self { kingman_mass: 1.0, components: Vec::new(), normalized: true }
    }

    pub fn beta(fold: usize, alpha: f64) -> Result<Self, RateError> {
        Self::new(0.0, vec![Component { fold, mixing: Mixing::Beta { alpha }, weight: 1.0 }], true)
    }

    pub fn point_mass(fold: usize, x0: f64) -> Result<Self, RateError> {
        Self::new(0.0, vec![Component { fold, mixing: Mixing::PointMass { x0 }, weight: 1.0 }], true)
    }

    pub fn kingman_mass(&self) -> f64 {
        self.kingman_mass
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_mass(&self) -> f64 {
        self.kingman_mass + self.components.iter().map(|c| c.weight).sum::<f64>()
    }

    /// Largest number of simultaneous merger groups with positive rate.
    pub fn max_groups(&self) -> usize {
        let base = usize::from(self.kingman_mass > 0.0);
        self.components.iter().map(|c| c.fold).fold(base, usize::max)
    }
}

impl fmt::Display for XiMeasure {
    /// The inline syntax accepted by [`XiMeasure::from_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            if !std::mem::take(&mut first) {
                f.write_str("+")
            } else {
                Ok(())
            }
        };
        if self.kingman_mass > 0.0 {
            sep(f)?;
            if self.kingman_mass != 1.0 {
                write!(f, "{}*", self.kingman_mass)?;
            }
            f.write_str("kingman")?;
        }
        for c in &self.components {
            sep(f)?;
            if c.weight != 1.0 {
                write!(f, "{}*", c.weight)?;
            }
            match c.mixing {
                Mixing::Beta { alpha } => write!(f, "beta:k={}:alpha={alpha}", c.fold)?,
                Mixing::PointMass { x0 } => write!(f, "point:k={}:x0={x0}", c.fold)?,
            }
        }
        if !self.normalized {
            f.write_str(";unnormalized")?;
        }
        Ok(())
    }
}

impl FromStr for XiMeasure {
    type Err = RateError;

    /// Parses e.g. `0.5*kingman+0.5*beta:k=2:alpha=1.25` or
    /// `point:k=4:x0=0.5`. The measure is flagged normalized unless the
    /// text ends with `;unnormalized`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RateError::Parse(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (body, normalized) = match t.strip_suffix(";unnormalized") {
            Some(b) => (b, false),
            None => (t.as_str(), true),
        };
        let mut kingman = 0.0;
        let mut components = Vec::new();
        for term in body.split('+') {
            let (weight, rest) = match term.split_once('*') {
                Some((w, r)) => (w.parse::<f64>().map_err(|_| err())?, r),
                None => (1.0, term),
            };
            let mut parts = rest.split(':');
            let kind = parts.next().ok_or_else(err)?;
            let mut fold = None;
            let mut alpha = None;
            let mut x0 = None;
            for kv in parts {
                let (k, v) = kv.split_once('=').ok_or_else(err)?;
                match k {
                    "k" => fold = Some(v.parse::<usize>().map_err(|_| err())?),
                    "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| err())?),
                    "x0" => x0 = Some(v.parse::<f64>().map_err(|_| err())?),
                    _ => return Err(err()),
                }
            }
            match kind {
                "kingman" if fold.is_none() && alpha.is_none() && x0.is_none() => kingman += weight,
                "beta" if x0.is_none() => components.push(Component {
                    fold: fold.ok_or_else(err)?,
                    mixing: Mixing::Beta { alpha: alpha.ok_or_else(err)? },
                    weight,
                }),
                "point" if alpha.is_none() => components.push(Component {
                    fold: fold.ok_or_else(err)?,
                    mixing: Mixing::PointMass { x0: x0.ok_or_else(err)? },
                    weight,
                }),
                _ => return Err(err()),
            }
        }
        XiMeasure::new(kingman, components, normalized)
    }
}

/// Which evaluation route produced a rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Closed,
    Quadrature,
}

impl fmt::Display for RateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMethod::Closed => "closed",
            RateMethod::Quadrature => "quadrature",
        })
    }
}

/// `ln C(n, k)`.
fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_falling(n, k) - ln_falling(k, k)
}

/// `ln (k)_m` for `m <= k`.
fn ln_falling(k: usize, m: usize) -> f64 {
    (0..m).map(|i| ((k - i) as f64).ln()).sum()
}

/// Iterates the admissible `l` together with the log of the combinatorial
/// prefactor `C(s,l) (k)_{j+l} k^{1-K-l}`.
fn fold_terms(fold: usize, spec: &MergerSpec) -> impl Iterator<Item = (usize, f64)> + '_ {
    let j = spec.groups();
    let big_k: usize = spec.group_sizes().iter().sum();
    let s = spec.singletons();
    let kf = fold as f64;
    let upper = if j > fold { None } else { Some(s.min(fold - j)) };
    upper.into_iter().flat_map(move |u| {
        (0..=u).map(move |l| {
            let ln_pref = ln_binomial(s, l) + ln_falling(fold, j + l) + (1.0 - (big_k + l) as f64) * kf.ln();
            (l, ln_pref)
        })
    })
}

fn kingman_rate(spec: &MergerSpec) -> f64 {
    if spec.groups() == 1 && spec.group_sizes()[0] == 2 {
        1.0
    } else {
        0.0
    }
}

fn point_mass_rate(fold: usize, x0: f64, spec: &MergerSpec) -> f64 {
    let big_k: usize = spec.group_sizes().iter().sum();
    let s = spec.singletons();
    let one_minus = 1.0 - x0;
    fold_terms(fold, spec)
        .map(|(l, ln_pref)| {
            // C(s,l)(k)_{j+l} (x0/k)^{K+l} (1-x0)^{s-l} k / x0^2
            let pow_1mx = if s == l { 1.0 } else { one_minus.powi((s - l) as i32) };
            (ln_pref + ((big_k + l) as f64 - 2.0) * x0.ln()).exp() * pow_1mx
        })
        .sum()
}

fn beta_rate_closed(fold: usize, alpha: f64, spec: &MergerSpec) -> f64 {
    let big_k: usize = spec.group_sizes().iter().sum();
    let s = spec.singletons();
    let norm = ln_beta(2.0 - alpha, alpha);
    fold_terms(fold, spec)
        .map(|(l, ln_pref)| {
            let a = (big_k + l) as f64 - alpha;
            let b = (s - l) as f64 + alpha;
            (ln_pref + ln_beta(a, b) - norm).exp()
        })
        .sum()
}

/// Relative tolerance of the tanh-sinh oracle.
const QUAD_TOL: f64 = 1e-13;

fn beta_rate_quadrature(fold: usize, alpha: f64, spec: &MergerSpec) -> Result<f64, QuadratureError> {
    let big_k: usize = spec.group_sizes().iter().sum();
    let s = spec.singletons();
    let terms: Vec<(usize, f64)> = fold_terms(fold, spec).collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    // Beta(2-alpha, alpha) density up to its normalizing constant, which is
    // itself obtained by quadrature.
    let z = integrate_unit(|lx, l1x| ((2.0 - alpha) * lx + alpha * l1x).exp(), QUAD_TOL)?;
    // Integrand times x(1-x): exponents K+l-alpha on x and s-l+alpha on 1-x.
    let integral = integrate_unit(
        |lx, l1x| {
            terms
                .iter()
                .map(|&(l, ln_pref)| {
                    (ln_pref + ((big_k + l) as f64 - alpha) * lx + ((s - l) as f64 + alpha) * l1x).exp()
                })
                .sum()
        },
        QUAD_TOL,
    )?;
    Ok(integral / z)
}

/// Rate of the merger `spec` under `measure`, in closed form.
pub fn rate(measure: &XiMeasure, spec: &MergerSpec) -> f64 {
    let mut total = measure.kingman_mass * kingman_rate(spec);
    for c in &measure.components {
        total += c.weight
            * match c.mixing {
                Mixing::Beta { alpha } => beta_rate_closed(c.fold, alpha, spec),
                Mixing::PointMass { x0 } => point_mass_rate(c.fold, x0, spec),
            };
    }
    total
}

/// Rate of `spec` with Beta components integrated numerically instead of
/// evaluated in closed form. Point masses need no integration and use the
/// finite sum directly.
pub fn rate_quadrature(measure: &XiMeasure, spec: &MergerSpec) -> Result<f64, RateError> {
    let mut total = measure.kingman_mass * kingman_rate(spec);
    for c in &measure.components {
        total += c.weight
            * match c.mixing {
                Mixing::Beta { alpha } => beta_rate_quadrature(c.fold, alpha, spec)?,
                Mixing::PointMass { x0 } => point_mass_rate(c.fold, x0, spec),
            };
    }
    Ok(total)
}

/// Integer partitions of `total` into at most `max_parts` parts `>= 2`,
/// each listed descending.
fn parts_at_least_two(total: usize, max_parts: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, max: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        if left == 0 || rem < 2 {
            return;
        }
        for p in (2..=rem.min(max)).rev() {
            cur.push(p);
            rec(rem - p, p, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if total >= 2 {
        rec(total, total, max_parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Every valid merger spec with exactly `b` blocks before the move.
pub fn specs_for(b: usize) -> Vec<MergerSpec> {
    specs_with_at_most(b, usize::MAX)
}

/// Valid merger specs with `b` blocks and at most `max_groups` groups.
pub fn specs_with_at_most(b: usize, max_groups: usize) -> Vec<MergerSpec> {
    let mut out = Vec::new();
    for merged in (2..=b).rev() {
        for groups in parts_at_least_two(merged, max_groups) {
            out.push(MergerSpec::new(b, groups, b - merged).expect("valid by construction"));
        }
    }
    out
}

/// Memoized closed-form rates for every spec with `b <= max_b`.
#[derive(Clone, Debug)]
pub struct RateTable {
    measure: XiMeasure,
    max_b: usize,
    entries: HashMap<MergerSpec, f64>,
}

impl RateTable {
    pub fn new(measure: &XiMeasure, max_b: usize) -> Self {
        let entries = (2..=max_b)
            .flat_map(specs_for)
            .map(|spec| {
                let r = rate(measure, &spec);
                (spec, r)
            })
            .collect();
        Self { measure: measure.clone(), max_b, entries }
    }

    pub fn measure(&self) -> &XiMeasure {
        &self.measure
    }

    pub fn max_b(&self) -> usize {
        self.max_b
    }

    /// Tabulated rate, falling back to direct evaluation beyond `max_b`.
    pub fn get(&self, spec: &MergerSpec) -> f64 {
        match self.entries.get(spec) {
            Some(&r) => r,
            None => rate(&self.measure, spec),
        }
    }

    /// Entries sorted by `(b, spec)` for stable output.
    pub fn sorted_entries(&self) -> Vec<(&MergerSpec, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, &r)| (k, r)).collect();
        v.sort_by(|a, b| a.0.b().cmp(&b.0.b()).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Largest violation of the consistency relation found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub max_violation: f64,
    pub worst_spec: Option<MergerSpec>,
    pub checked: usize,
}

/// Checks, for every spec with `b < max_b`, that
/// `lambda(b;k;s) = lambda(b+1;k;s+1) + sum_i lambda(b+1;..k_i+1..;s)
/// + s lambda(b+1;k,2;s-1)`.
pub fn consistency_check(measure: &XiMeasure, max_b: usize) -> Result<ConsistencyReport, RateError> {
    if max_b > MAX_CONSISTENCY_B {
        return Err(RateError::MaxB { got: max_b, limit: MAX_CONSISTENCY_B });
    }
    let table = RateTable::new(measure, max_b);
    let mut report = ConsistencyReport { max_violation: 0.0, worst_spec: None, checked: 0 };
    for b in 2..max_b {
        for spec in specs_for(b) {
            let k = spec.group_sizes();
            let s = spec.singletons();
            let mut rhs = table.get(&MergerSpec::new(b + 1, k.to_vec(), s + 1)?);
            for i in 0..k.len() {
                let mut grown = k.to_vec();
                grown[i] += 1;
                rhs += table.get(&MergerSpec::new(b + 1, grown, s)?);
            }
            if s > 0 {
                let mut extra = k.to_vec();
                extra.push(2);
                rhs += s as f64 * table.get(&MergerSpec::new(b + 1, extra, s - 1)?);
            }
            let v = (table.get(&spec) - rhs).abs();
            report.checked += 1;
            if v > report.max_violation || report.worst_spec.is_none() {
                report.max_violation = report.max_violation.max(v);
                report.worst_spec = Some(spec);
            }
        }
    }
    Ok(report)
}

/// Sparse generator of the n-coalescent on partitions of `{1..n}`, indexed
/// by [`enumerate_partitions`].
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    states: Vec<Partition>,
    index: HashMap<Partition, usize>,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn states(&self) -> &[Partition] {
        &self.states
    }

    pub fn index_of(&self, p: &Partition) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Positive off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.rows[i].iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, r)| r)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        let mut out = vec![vec![0.0; m]; m];
        for i in 0..m {
            out[i][i] = self.diag[i];
            for &(j, r) in &self.rows[i] {
                out[i][j] = r;
            }
        }
        out
    }
}

pub fn generator_matrix(measure: &XiMeasure, n: usize) -> Result<GeneratorMatrix, RateError> {
    if n > MAX_GENERATOR_N {
        return Err(PartitionError::TooLarge { n, limit: MAX_GENERATOR_N }.into());
    }
    let states = enumerate_partitions(n)?;
    let index: HashMap<Partition, usize> = states.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let table = RateTable::new(measure, n);
    let mut rows = Vec::with_capacity(states.len());
    let mut diag = Vec::with_capacity(states.len());
    for p in &states {
        let mut row = Vec::new();
        let mut out_rate = 0.0;
        for q in coarsenings(p) {
            if let Transition::Merge(spec) = merger_spec(p, &q)? {
                let r = table.get(&spec);
                if r > 0.0 {
                    row.push((index[&q], r));
                    out_rate += r;
                }
            }
        }
        row.sort_unstable_by_key(|e| e.0);
        rows.push(row);
        diag.push(-out_rate);
    }
    Ok(GeneratorMatrix { states, index, rows, diag })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(b: usize, k: &[usize], s: usize) -> MergerSpec {
        MergerSpec::new(b, k.to_vec(), s).unwrap()
    }

    #[test]
    fn frozen_values() {
        let b4 = XiMeasure::beta(4, 1.5).unwrap();
        assert!((rate(&b4, &spec(3, &[2], 1)) - 0.9375).abs() < 1e-13);
        assert!((rate(&b4, &spec(4, &[2, 2], 0)) - 0.0234375).abs() < 1e-14);
        let b1 = XiMeasure::beta(1, 1.5).unwrap();
        assert!((rate(&b1, &spec(3, &[3], 0)) - 0.25).abs() < 1e-14);
        let pm = XiMeasure::point_mass(4, 0.5).unwrap();
        assert!((rate(&pm, &spec(4, &[2, 2], 0)) - 0.046875).abs() < 1e-15);
    }

    #[test]
    fn three_block_pair_rate_matches_short_form() {
        for &k in &[1usize, 2, 3, 4, 6] {
            for &a in &[1.1, 1.5, 1.9] {
                let m = XiMeasure::beta(k, a).unwrap();
                let expected = a / 2.0 + (1.0 - 1.0 / k as f64) * (2.0 - a) / 2.0;
                assert!((rate(&m, &spec(3, &[2], 1)) - expected).abs() < 1e-13, "k={k} a={a}");
            }
        }
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let m = XiMeasure::beta(4, 1.5).unwrap();
        for b in 2..=6 {
            for sp in specs_for(b) {
                let c = rate(&m, &sp);
                let q = rate_quadrature(&m, &sp).unwrap();
                assert!(((c - q) / c).abs() < 1e-10, "{sp}: {c} vs {q}");
            }
        }
        let m = XiMeasure::beta(4, 1.9).unwrap();
        let q = rate_quadrature(&m, &spec(2, &[2], 0)).unwrap();
        assert!((q - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_fold_has_no_triple_groups() {
        let m = XiMeasure::beta(2, 1.3).unwrap();
        assert_eq!(rate(&m, &spec(6, &[2, 2, 2], 0)), 0.0);
        assert_eq!(rate_quadrature(&m, &spec(6, &[2, 2, 2], 0)).unwrap(), 0.0);
        assert_eq!(m.max_groups(), 2);
    }

    #[test]
    fn kingman_consistency_exact() {
        let r = consistency_check(&XiMeasure::kingman(), 6).unwrap();
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn mixture_consistency() {
        let m: XiMeasure = "0.5*kingman+0.5*beta:k=2:alpha=1.25".parse().unwrap();
        assert!(consistency_check(&m, 10).unwrap().max_violation <= 1e-10);
        assert!(consistency_check(&m, 13).is_err());
    }

    #[test]
    fn domain_errors() {
        assert_eq!(XiMeasure::beta(2, 2.0), Err(RateError::Alpha(2.0)));
        assert_eq!(XiMeasure::beta(2, 1.0), Err(RateError::Alpha(1.0)));
        assert!(XiMeasure::point_mass(4, 0.0).is_err());
        assert!(matches!(
            "0.5*kingman".parse::<XiMeasure>(),
            Err(RateError::NotNormalized(_))
        ));
        let raw: XiMeasure = "0.5*kingman;unnormalized".parse().unwrap();
        assert_eq!(rate(&raw, &spec(2, &[2], 0)), 0.5);
    }

    #[test]
    fn inline_round_trip() {
        for s in ["kingman", "0.5*kingman+0.5*beta:k=2:alpha=1.25", "point:k=4:x0=0.5", "beta:k=4:alpha=1.5"] {
            let m: XiMeasure = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
            let json = serde_json::to_string(&m).unwrap();
            let back: XiMeasure = serde_json::from_str(&json).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn kingman_generator_n3() {
        let g = generator_matrix(&XiMeasure::kingman(), 3).unwrap();
        let d = g.to_dense();
        assert_eq!(d[0], vec![-3.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(d[4], vec![0.0; 5]);
        for row in &d {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn spec_counts() {
        // specs with b blocks: partitions of m into parts >= 2, summed over m
        assert_eq!(specs_for(2).len(), 1);
        assert_eq!(specs_for(4).len(), 1 + 1 + 2);
        assert_eq!(specs_for(6).len(), 1 + 1 + 2 + 2 + 4);
        assert_eq!(specs_with_at_most(6, 2).len(), 1 + 1 + 2 + 2 + 3);
        assert_eq!(specs_with_at_most(6, 1).len(), 5);
    }
}
