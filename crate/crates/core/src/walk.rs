//! Sample paths, the increment shift, and estimators for asymptotic entropy,
//! rate of escape, hitting probabilities and the Green gauge.
//!
//! Every Monte Carlo estimator gives path `i` its own stream
//! `rng.derive(i)` and reduces results in index order, so output does not
//! depend on the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ball_from, DefaultRule, Gauge, GroupDescriptor, GroupElement};
use crate::measure::{compensated_sum, convolution_power, convolve, raw_entropy, Measure, Sampler, WEIGHT_FLOOR};
use crate::rng::PrngStream;

/// Largest truncation loss tolerated by the exact entropy sequence.
pub const ENTROPY_TRUNCATION_BUDGET: f64 = 1e-9;

/// A numeric result with its Monte Carlo error bars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Fraction of samples that hit a horizon before producing a value.
    pub censored_mass: f64,
    /// Set when censoring makes `value` a one-sided estimate.
    pub lower_bound: bool,
}

impl Estimate {
    /// A value with no sampling error.
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            samples: 0,
            censored_mass: 0.0,
            lower_bound: false,
        }
    }

    /// Mean and standard error of the mean.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Estimate {
                value: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
                censored_mass: 0.0,
                lower_bound: false,
            };
        }
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: mean,
            stderr,
            samples: n,
            censored_mass: 0.0,
            lower_bound: false,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Estimate {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
            ..self
        }
    }

    /// Product of independent estimates, first-order error propagation.
    pub fn times(self, other: Estimate) -> Self {
        let stderr = ((self.stderr * other.value).powi(2) + (other.stderr * self.value).powi(2)).sqrt();
        Estimate {
            value: self.value * other.value,
            stderr,
            samples: self.samples.max(other.samples),
            censored_mass: self.censored_mass.max(other.censored_mass),
            lower_bound: self.lower_bound || other.lower_bound,
        }
    }
}

/// Increments `h_1, h_2, ...` of a walk from the identity.
///
/// A path built from a measure is unbounded: increments past the
/// materialized prefix are drawn on demand from the path's own stream. A path
/// built from an explicit increment list ends where the list ends.
#[derive(Clone, Debug)]
pub struct SamplePath {
    group: GroupDescriptor,
    increments: Vec<GroupElement>,
    source: Option<(Arc<Sampler>, PrngStream)>,
    cursor: (usize, GroupElement),
}

impl SamplePath {
    pub fn from_increments(group: &GroupDescriptor, increments: Vec<GroupElement>) -> Result<Self> {
        for h in &increments {
            group.check(h)?;
        }
        Ok(SamplePath {
            group: group.clone(),
            increments,
            source: None,
            cursor: (0, group.identity()),
        })
    }

    /// An unbounded path drawing increments from `sampler`.
    pub fn lazy(group: &GroupDescriptor, sampler: Arc<Sampler>, rng: PrngStream) -> Self {
        SamplePath {
            group: group.clone(),
            increments: Vec::new(),
            source: Some((sampler, rng)),
            cursor: (0, group.identity()),
        }
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    /// Number of increments drawn so far.
    pub fn materialized(&self) -> usize {
        self.increments.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.source.is_none()
    }

    pub fn increments(&self) -> &[GroupElement] {
        &self.increments
    }

    /// Draws increments until `n` exist. False if the path is bounded and
    /// shorter than `n`.
    pub fn ensure(&mut self, n: usize) -> bool {
        if let Some((sampler, rng)) = &mut self.source {
            while self.increments.len() < n {
                self.increments.push(sampler.sample(rng).clone());
            }
        }
        self.increments.len() >= n
    }

    /// `h_i`, one-based.
    pub fn increment(&mut self, i: usize) -> Option<&GroupElement> {
        if i == 0 || !self.ensure(i) {
            return None;
        }
        Some(&self.increments[i - 1])
    }

    /// `x_n = h_1 ... h_n`, with `x_0 = e`.
    pub fn position(&mut self, n: usize) -> Option<GroupElement> {
        if !self.ensure(n) {
            return None;
        }
        if self.cursor.0 > n {
            self.cursor = (0, self.group.identity());
        }
        let (mut m, mut x) = std::mem::replace(&mut self.cursor, (0, self.group.identity()));
        while m < n {
            self.group
                .multiply_in_place(&mut x, &self.increments[m])
                .expect("increments belong to the path's group");
            m += 1;
        }
        self.cursor = (m, x.clone());
        Some(x)
    }

    /// The shifted path `U^k`: increments `h_{k+1}, h_{k+2}, ...`. An
    /// unbounded path keeps drawing the same future increments after the shift.
    pub fn shift(&self, k: usize) -> SamplePath {
        let mut me = self.clone();
        me.ensure(k);
        let start = k.min(me.increments.len());
        SamplePath {
            group: me.group.clone(),
            increments: me.increments.split_off(start),
            source: me.source,
            cursor: (0, self.group.identity()),
        }
    }
}

/// Path with `length` increments drawn i.i.d. from `mu`, extendable on demand.
pub fn generate_path(mu: &Measure, length: usize, rng: PrngStream) -> Result<SamplePath> {
    let sampler = Arc::new(Sampler::new(mu)?);
    let mut path = SamplePath::lazy(mu.group(), sampler, rng);
    path.ensure(length);
    Ok(path)
}

/// `U^k` applied to `path`.
pub fn shift_u(path: &SamplePath, k: usize) -> SamplePath {
    path.shift(k)
}

/// `x_n` of a walk driven by `sampler`, without storing the path.
pub(crate) fn endpoint(group: &GroupDescriptor, sampler: &Sampler, n: usize, rng: &mut PrngStream) -> GroupElement {
    let mut x = group.identity();
    for _ in 0..n {
        group
            .multiply_in_place(&mut x, sampler.sample(rng))
            .expect("sampler atoms belong to the group");
    }
    x
}

/// Runs `f` on `paths` indices in parallel, returning results in index order.
pub(crate) fn per_path<T: Send>(paths: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..paths).into_par_iter().map(f).collect()
}

/// `−(1/n) ln μ^{*n}(x_n)` averaged over sampled paths, with exact `μ^{*n}`.
pub fn shannon_estimate(
    mu: &Measure,
    n: usize,
    paths: usize,
    support_cap: usize,
    rng: &PrngStream,
) -> Result<Estimate> {
    if n == 0 || paths == 0 {
        return Err(Error::Usage("shannon_estimate needs n >= 1 and paths >= 1".into()));
    }
    let sampler = Sampler::new(mu)?;
    let (table, _) = convolution_power(mu, n, support_cap)?;
    let group = mu.group();
    let values = per_path(paths, |i| {
        let x = endpoint(group, &sampler, n, &mut rng.derive(i as u64));
        let p = table.weight(&x);
        if p > 0.0 {
            Ok(-p.ln() / n as f64)
        } else {
            Err(Error::VisitedAtomDropped(x.to_string()))
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Exact `H_n` sequence and its extrapolated growth rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyDifferences {
    /// `H_0, ..., H_{n_max}`.
    pub entropies: Vec<f64>,
    /// `H_n − H_{n−1}` for `n = 1..=n_max`.
    pub differences: Vec<f64>,
    pub estimate: Estimate,
    /// Mass lost to truncation while building the tables.
    pub dropped_mass: f64,
}

/// Builds the exact entropy sequence of `mu` and extrapolates its growth rate.
pub fn entropy_difference_estimate(mu: &Measure, n_max: usize, support_cap: usize) -> Result<EntropyDifferences> {
    if n_max == 0 {
        return Err(Error::Usage("entropy_difference_estimate needs n_max >= 1".into()));
    }
    mu.require_probability()?;
    let group = mu.group();
    let mut cur = Measure::dirac(group, group.identity())?;
    let mut entropies = vec![0.0];
    let mut dropped = 0.0;
    for _ in 0..n_max {
        let (next, d) = convolve(&cur, mu)?.truncate(WEIGHT_FLOOR, support_cap);
        dropped += d;
        if dropped > ENTROPY_TRUNCATION_BUDGET {
            return Err(Error::Truncation {
                dropped,
                allowed: ENTROPY_TRUNCATION_BUDGET,
            });
        }
        entropies.push(raw_entropy(&next));
        cur = next;
    }
    Ok(from_entropies(entropies, dropped))
}

/// Differences and extrapolated estimate from a precomputed `H_0..H_n`.
pub fn from_entropies(entropies: Vec<f64>, dropped_mass: f64) -> EntropyDifferences {
    let differences: Vec<f64> = entropies.windows(2).map(|w| w[1] - w[0]).collect();
    let value = extrapolate_difference(&differences);
    let n = differences.len();
    let stderr = if n >= 2 {
        (differences[n - 1] - differences[n - 2]).abs()
    } else {
        0.0
    };
    EntropyDifferences {
        entropies,
        differences,
        estimate: Estimate {
            value,
            stderr,
            samples: 0,
            censored_mass: 0.0,
            lower_bound: false,
        },
        dropped_mass,
    }
}

/// Limit of `d_k` assuming `d_k = h + a/k + b/k²`, fitted through the last
/// three differences (fewer when fewer exist). Clamped at zero.
pub fn extrapolate_difference(differences: &[f64]) -> f64 {
    let n = differences.len();
    let used = n.min(3);
    if used == 0 {
        return 0.0;
    }
    let points: Vec<(f64, f64)> = (n - used..n).map(|i| (1.0 / (i + 1) as f64, differences[i])).collect();
    // Lagrange interpolation in x = 1/k, evaluated at x = 0
    let mut value = 0.0;
    for (j, &(xj, dj)) in points.iter().enumerate() {
        let mut weight = 1.0;
        for (i, &(xi, _)) in points.iter().enumerate() {
            if i != j {
                weight *= xi / (xi - xj);
            }
        }
        value += weight * dj;
    }
    value.max(0.0)
}

/// Mean of `|x_n| / n` over sampled paths.
pub fn escape_rate_estimate(mu: &Measure, gauge: &Gauge, n: usize, paths: usize, rng: &PrngStream) -> Result<Estimate> {
    if n == 0 || paths == 0 {
        return Err(Error::Usage("escape_rate_estimate needs n >= 1 and paths >= 1".into()));
    }
    let sampler = Sampler::new(mu)?;
    let group = mu.group();
    let values = per_path(paths, |i| {
        let x = endpoint(group, &sampler, n, &mut rng.derive(i as u64));
        gauge.value(group, &x).map(|v| v / n as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Fraction of paths visiting `g` within `horizon` steps.
pub fn estimate_hitting_probability(
    mu: &Measure,
    g: &GroupElement,
    horizon: usize,
    paths: usize,
    rng: &PrngStream,
) -> Result<Estimate> {
    let group = mu.group();
    group.check(g)?;
    if *g == group.identity() {
        return Err(Error::Usage("hitting target must differ from the identity".into()));
    }
    let table = hitting_frequencies(mu, std::slice::from_ref(g), horizon, paths, rng)?;
    Ok(table.estimates[0].1)
}

/// Per-target visit frequencies from one batch of paths.
#[derive(Clone, Debug)]
pub struct HittingTable {
    pub estimates: Vec<(GroupElement, Estimate)>,
    /// Frequency of returning to the identity at some time `1..=horizon`.
    pub return_frequency: Estimate,
}

fn binomial(hits: usize, paths: usize) -> Estimate {
    let p = hits as f64 / paths as f64;
    Estimate {
        value: p,
        stderr: (p * (1.0 - p) / paths as f64).sqrt(),
        samples: paths,
        censored_mass: 1.0 - p,
        lower_bound: hits < paths,
    }
}

/// Estimates `F(g)` for every target from shared paths.
pub fn hitting_frequencies(
    mu: &Measure,
    targets: &[GroupElement],
    horizon: usize,
    paths: usize,
    rng: &PrngStream,
) -> Result<HittingTable> {
    if horizon == 0 || paths == 0 {
        return Err(Error::Usage(
            "hitting estimates need horizon >= 1 and paths >= 1".into(),
        ));
    }
    let sampler = Sampler::new(mu)?;
    let group = mu.group();
    let e = group.identity();
    let index: FxHashMap<&GroupElement, usize> = targets.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let visits = per_path(paths, |i| {
        let mut rng = rng.derive(i as u64);
        let mut x = e.clone();
        let mut seen = FxHashSet::default();
        let mut returned = false;
        for _ in 0..horizon {
            group
                .multiply_in_place(&mut x, sampler.sample(&mut rng))
                .expect("sampler atoms belong to the group");
            if let Some(&j) = index.get(&x) {
                seen.insert(j);
            }
            returned |= x == e;
            if seen.len() == targets.len() && returned {
                break;
            }
        }
        (seen, returned)
    });
    let mut hits = vec![0usize; targets.len()];
    let mut returns = 0;
    for (seen, returned) in &visits {
        for &j in seen {
            hits[j] += 1;
        }
        returns += *returned as usize;
    }
    Ok(HittingTable {
        estimates: targets
            .iter()
            .cloned()
            .zip(hits.iter().map(|&h| binomial(h, paths)))
            .collect(),
        return_frequency: binomial(returns, paths),
    })
}

/// Monte Carlo Green lengths `−ln F̂(g)` with delta-method error bars.
#[derive(Clone, Debug)]
pub struct GreenTable {
    pub radius: usize,
    /// Non-identity elements reachable in at most `radius` steps of the walk.
    pub entries: Vec<(GroupElement, Estimate)>,
    pub return_frequency: Estimate,
}

impl GreenTable {
    /// Smallest hitting frequency over the table, counting the return to `e`.
    pub fn min_frequency(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, est)| (-est.value).exp())
            .fold(self.return_frequency.value, f64::min)
    }

    pub fn gauge(&self, group: &GroupDescriptor) -> Result<Gauge> {
        let mut values: FxHashMap<GroupElement, f64> =
            self.entries.iter().map(|(g, est)| (g.clone(), est.value)).collect();
        values.insert(group.identity(), 0.0);
        Gauge::table(values, DefaultRule::GeodesicChunks { max_chunk: self.radius }, true)
    }
}

/// Green lengths on the radius-`radius` ball of the walk's support.
pub fn green_table(mu: &Measure, radius: usize, horizon: usize, paths: usize, rng: &PrngStream) -> Result<GreenTable> {
    if radius == 0 {
        return Err(Error::Usage("green gauge radius must be >= 1".into()));
    }
    let group = mu.group();
    let steps: Vec<GroupElement> = mu.support().cloned().collect();
    let e = group.identity();
    let targets: Vec<GroupElement> = ball_from(group, &steps, radius)?
        .into_iter()
        .filter(|g| *g != e)
        .collect();
    let table = hitting_frequencies(mu, &targets, horizon, paths, rng)?;
    let entries = table
        .estimates
        .into_iter()
        .map(|(g, f)| {
            if f.value == 0.0 {
                return Err(Error::ZeroHittingFrequency(g.to_string()));
            }
            let est = Estimate {
                value: -f.value.ln(),
                stderr: f.stderr / f.value,
                ..f
            };
            Ok((g, est))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GreenTable {
        radius,
        entries,
        return_frequency: table.return_frequency,
    })
}

/// Table gauge `|g| = −ln F̂(g)` near the identity, extended along geodesics.
pub fn green_gauge(mu: &Measure, radius: usize, horizon: usize, paths: usize, rng: &PrngStream) -> Result<Gauge> {
    green_table(mu, radius, horizon, paths, rng)?.gauge(mu.group())
}
