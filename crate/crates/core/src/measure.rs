//! Finitely supported sub-probability measures on a group.
//!
//! Atoms are stored sorted by the canonical element order. Sub-probability
//! measures are first class: entropy and sampling insist on mass 1 and never
//! normalize silently.

use std::cmp::Ordering;

use rand::distributions::{Distribution, WeightedIndex};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Gauge, GroupDescriptor, GroupElement};
use crate::rng::PrngStream;

/// Atoms lighter than this are dropped (and reported) by truncating operations.
pub const WEIGHT_FLOOR: f64 = 1e-15;

/// Tolerance on declared-versus-summed mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Tolerance for treating a measure as a probability measure. Looser than
/// [`MASS_TOLERANCE`] because long convolution chains accumulate rounding.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    group: GroupDescriptor,
    atoms: Vec<(GroupElement, f64)>,
    mass: f64,
}

/// Bookkeeping for operations that may drop atoms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub retained_mass: f64,
    pub dropped_mass: f64,
    pub support_size: usize,
}

/// Neumaier compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

impl Measure {
    /// Builds a measure, merging repeated elements. Weights must be positive
    /// and finite; total mass must not exceed one.
    pub fn new(group: &GroupDescriptor, atoms: impl IntoIterator<Item = (GroupElement, f64)>) -> Result<Self> {
        let mut table: FxHashMap<GroupElement, f64> = FxHashMap::default();
        for (g, w) in atoms {
            group.check(&g)?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidMeasure(format!("weight {w} at {g} is not positive")));
            }
            *table.entry(g).or_insert(0.0) += w;
        }
        let m = Self::from_table(group.clone(), table);
        if m.mass > 1.0 + MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("total mass {} exceeds 1", m.mass)));
        }
        Ok(m)
    }

    pub(crate) fn from_table(group: GroupDescriptor, table: FxHashMap<GroupElement, f64>) -> Self {
        let mut atoms: Vec<_> = table.into_iter().filter(|(_, w)| *w > 0.0).collect();
        atoms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Self::from_sorted(group, atoms)
    }

    pub(crate) fn from_sorted(group: GroupDescriptor, atoms: Vec<(GroupElement, f64)>) -> Self {
        let mass = compensated_sum(atoms.iter().map(|a| a.1));
        Measure { group, atoms, mass }
    }

    pub fn dirac(group: &GroupDescriptor, g: GroupElement) -> Result<Self> {
        Self::new(group, [(g, 1.0)])
    }

    /// The zero measure (mass 0), used for empty pieces of a decomposition.
    pub fn zero(group: &GroupDescriptor) -> Self {
        Measure {
            group: group.clone(),
            atoms: Vec::new(),
            mass: 0.0,
        }
    }

    /// Uniform probability on the given (distinct) elements.
    pub fn uniform(group: &GroupDescriptor, elements: impl IntoIterator<Item = GroupElement>) -> Result<Self> {
        let elements: Vec<_> = elements.into_iter().collect();
        if elements.is_empty() {
            return Err(Error::InvalidMeasure("uniform measure on empty set".into()));
        }
        let w = 1.0 / elements.len() as f64;
        Self::new(group, elements.into_iter().map(|g| (g, w)))
    }

    /// Simple random walk: uniform on the group's generators.
    pub fn simple_random_walk(group: &GroupDescriptor) -> Result<Self> {
        Self::uniform(group, group.generators().iter().cloned())
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn atoms(&self) -> &[(GroupElement, f64)] {
        &self.atoms
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.atoms.iter().map(|a| &a.0)
    }

    pub fn weight(&self, g: &GroupElement) -> f64 {
        self.atoms
            .binary_search_by(|a| a.0.cmp(g))
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_probability(&self) -> bool {
        (self.mass - 1.0).abs() <= PROBABILITY_TOLERANCE
    }

    pub fn require_probability(&self) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::NotProbability(self.mass))
        }
    }

    pub fn normalized(&self) -> Result<Measure> {
        if self.mass <= 0.0 {
            return Err(Error::InvalidMeasure("cannot normalize the zero measure".into()));
        }
        let atoms = self.atoms.iter().map(|(g, w)| (g.clone(), w / self.mass)).collect();
        Ok(Self::from_sorted(self.group.clone(), atoms))
    }

    pub fn scaled(&self, factor: f64) -> Result<Measure> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidMeasure(format!("scale factor {factor} must be positive")));
        }
        let atoms = self.atoms.iter().map(|(g, w)| (g.clone(), w * factor)).collect();
        Ok(Self::from_sorted(self.group.clone(), atoms))
    }

    /// `½ Σ |μ(g) − ν(g)|`.
    pub fn total_variation(&self, other: &Measure) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut diffs = Vec::with_capacity(self.len().max(other.len()));
        while i < self.atoms.len() || j < other.atoms.len() {
            let ord = match (self.atoms.get(i), other.atoms.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => unreachable!(),
            };
            match ord {
                Ordering::Equal => {
                    diffs.push((self.atoms[i].1 - other.atoms[j].1).abs());
                    i += 1;
                    j += 1;
                }
                Ordering::Less => {
                    diffs.push(self.atoms[i].1);
                    i += 1;
                }
                Ordering::Greater => {
                    diffs.push(other.atoms[j].1);
                    j += 1;
                }
            }
        }
        0.5 * compensated_sum(diffs)
    }

    /// Mean vector of a measure on `Z^d`.
    pub fn zd_mean(&self) -> Option<Vec<f64>> {
        let dim = self.atoms.first()?.0.as_zd()?.len();
        let mut mean = vec![0.0; dim];
        for (g, w) in &self.atoms {
            for (m, x) in mean.iter_mut().zip(g.as_zd()?) {
                *m += *x as f64 * w;
            }
        }
        Some(mean)
    }

    /// Drops atoms below `floor`, then the lightest atoms (ties broken by the
    /// canonical element order) until at most `cap` remain.
    pub(crate) fn truncate(self, floor: f64, cap: usize) -> (Measure, f64) {
        let Measure { group, mut atoms, .. } = self;
        let needs_cap = atoms.len() > cap;
        let below_floor = atoms.iter().any(|a| a.1 < floor);
        if !needs_cap && !below_floor {
            return (Self::from_sorted(group, atoms), 0.0);
        }
        let mut dropped = Vec::new();
        if below_floor {
            atoms.retain(|a| {
                if a.1 < floor {
                    dropped.push(a.1);
                    false
                } else {
                    true
                }
            });
        }
        if atoms.len() > cap {
            atoms.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            let excess = atoms.len() - cap;
            dropped.extend(atoms.drain(..excess).map(|a| a.1));
            atoms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        }
        (Self::from_sorted(group, atoms), compensated_sum(dropped))
    }

    pub fn to_json(&self) -> MeasureJson {
        let mut atoms: Vec<(String, f64)> = self.atoms.iter().map(|(g, w)| (g.to_string(), *w)).collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        MeasureJson {
            group: self.group.clone(),
            mass: self.mass,
            atoms,
        }
    }

    pub fn from_json(json: &MeasureJson) -> Result<Self> {
        let atoms = json
            .atoms
            .iter()
            .map(|(s, w)| Ok((json.group.parse(s)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        let m = Self::new(&json.group, atoms)?;
        if (m.mass - json.mass).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "declared mass {} differs from atom sum {}",
                json.mass, m.mass
            )));
        }
        Ok(m)
    }
}

/// Wire format: atoms sorted by their text encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub group: GroupDescriptor,
    pub mass: f64,
    pub atoms: Vec<(String, f64)>,
}

fn same_group(a: &Measure, b: &Measure) -> Result<()> {
    if a.group != b.group {
        return Err(Error::GroupMismatch {
            expected: a.group.kind().to_string(),
            found: b.group.kind().to_string(),
        });
    }
    Ok(())
}

/// `(μ * ν)(g) = Σ_h μ(h) ν(h⁻¹ g)`.
pub fn convolve(mu: &Measure, nu: &Measure) -> Result<Measure> {
    same_group(mu, nu)?;
    let group = &mu.group;
    let mut table: FxHashMap<GroupElement, f64> =
        FxHashMap::with_capacity_and_hasher(mu.len().saturating_mul(nu.len()).min(1 << 24), Default::default());
    for (g, p) in &mu.atoms {
        for (h, q) in &nu.atoms {
            *table.entry(group.multiply(g, h)?).or_insert(0.0) += p * q;
        }
    }
    Ok(Measure::from_table(group.clone(), table))
}

/// `μ^{*n}`, truncated to at most `support_cap` atoms after each step.
pub fn convolution_power(mu: &Measure, n: usize, support_cap: usize) -> Result<(Measure, TruncationReport)> {
    let mut powers = convolution_powers(mu, n, support_cap)?;
    Ok(powers.pop().expect("n + 1 powers"))
}

/// `μ^{*0}, …, μ^{*n}` with cumulative truncation reports.
pub fn convolution_powers(mu: &Measure, n: usize, support_cap: usize) -> Result<Vec<(Measure, TruncationReport)>> {
    let group = &mu.group;
    let mut cur = Measure::dirac(group, group.identity())?;
    let mut dropped = 0.0;
    let mut out = Vec::with_capacity(n + 1);
    out.push((
        cur.clone(),
        TruncationReport {
            retained_mass: 1.0,
            dropped_mass: 0.0,
            support_size: 1,
        },
    ));
    for _ in 0..n {
        let (next, d) = convolve(&cur, mu)?.truncate(WEIGHT_FLOOR, support_cap);
        // earlier losses are scaled by mass(μ) ≤ 1, so adding stays an upper bound
        dropped += d;
        cur = next;
        out.push((
            cur.clone(),
            TruncationReport {
                retained_mass: cur.mass,
                dropped_mass: dropped,
                support_size: cur.len(),
            },
        ));
    }
    Ok(out)
}

/// Shannon entropy with the natural logarithm.
pub fn entropy(mu: &Measure) -> Result<f64> {
    mu.require_probability()?;
    Ok(raw_entropy(mu))
}

pub(crate) fn raw_entropy(mu: &Measure) -> f64 {
    -compensated_sum(mu.atoms.iter().map(|(_, w)| w * w.ln())).min(0.0)
}

/// `Σ |g| μ(g)`.
pub fn first_moment(mu: &Measure, gauge: &Gauge) -> Result<f64> {
    let terms = mu
        .atoms
        .iter()
        .map(|(g, w)| gauge.value(&mu.group, g).map(|v| v * w))
        .collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(terms))
}

/// Convex combination `Σ w_i μ_i`.
pub fn mix(components: &[(f64, Measure)]) -> Result<Measure> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidMeasure("mix of zero components".into()))?;
    if let Some((w, _)) = components.iter().find(|(w, _)| !(*w >= 0.0)) {
        return Err(Error::InvalidMeasure(format!("negative mixing weight {w}")));
    }
    let total = compensated_sum(components.iter().map(|c| c.0));
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidMeasure(format!("mixing weights sum to {total}")));
    }
    let mut table: FxHashMap<GroupElement, f64> = FxHashMap::default();
    for (w, m) in components {
        same_group(&first.1, m)?;
        for (g, p) in &m.atoms {
            *table.entry(g.clone()).or_insert(0.0) += w * p;
        }
    }
    Ok(Measure::from_table(first.1.group.clone(), table))
}

/// Splits `μ` into `(β, α)` with `β` the restriction to `set` and `α = μ − β`.
pub fn decompose(mu: &Measure, set: &[GroupElement]) -> Result<(Measure, Measure)> {
    let (inside, outside): (Vec<_>, Vec<_>) = mu.atoms.iter().cloned().partition(|(g, _)| set.contains(g));
    if inside.is_empty() {
        return Err(Error::InvalidMeasure("μ(B) = 0".into()));
    }
    Ok((
        Measure::from_sorted(mu.group.clone(), inside),
        Measure::from_sorted(mu.group.clone(), outside),
    ))
}

/// Reusable sampler for a probability measure.
#[derive(Clone, Debug)]
pub struct Sampler {
    elements: Vec<GroupElement>,
    index: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new(mu: &Measure) -> Result<Self> {
        mu.require_probability()?;
        let index =
            WeightedIndex::new(mu.atoms.iter().map(|a| a.1)).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        Ok(Sampler {
            elements: mu.atoms.iter().map(|a| a.0.clone()).collect(),
            index,
        })
    }

    pub fn sample(&self, rng: &mut PrngStream) -> &GroupElement {
        &self.elements[self.index.sample(rng)]
    }
}

/// One draw from `μ`.
pub fn sample(mu: &Measure, rng: &mut PrngStream) -> Result<GroupElement> {
    Ok(Sampler::new(mu)?.sample(rng).clone())
}
