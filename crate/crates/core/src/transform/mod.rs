//! The transformed measure `μ_τ`, the law of the walk at a stopping time.
//!
//! [`transformed_measure_exact`] evolves the joint law of (position,
//! automaton state) forward and collects stopped mass. Closed forms cover
//! Willis transforms and randomized horizons; [`tree`] computes exact
//! entropies of iterated transforms on free groups where tables are
//! infeasible.

pub mod tree;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::measure::{
    compensated_sum, convolution_powers, convolve, raw_entropy, Measure, MeasureJson, TruncationReport, MASS_TOLERANCE,
    WEIGHT_FLOOR,
};
use crate::rng::PrngStream;
use crate::stopping::{sample_legs, RuleState, StoppingRule};
use crate::walk::per_path;

/// Largest truncation loss an exact transform may report without failing.
pub const TRANSFORM_TRUNCATION_BUDGET: f64 = 1e-9;

/// `μ_τ` with its error budget: `measure.mass + unresolved_mass +
/// truncation.dropped_mass = 1` up to rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTransformResult {
    pub measure: Measure,
    /// Mass stopped at step `s` is entry `s − 1`.
    pub stopped_by_step: Vec<f64>,
    /// Mass not yet stopped at the horizon.
    pub unresolved_mass: f64,
    pub truncation: TruncationReport,
}

impl ExactTransformResult {
    /// `Σ s · P(τ = s)` over resolved mass, a lower bound for `E(τ)`.
    pub fn resolved_expectation(&self) -> f64 {
        compensated_sum(self.stopped_by_step.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p))
    }

    /// Entropy interval `[H(core), H(core) + m·horizon·H(μ)]` of the
    /// normalized resolved part, with `m` the unaccounted mass.
    pub fn entropy_interval(&self, step_entropy: f64) -> Result<(f64, f64)> {
        let core = raw_entropy(&self.measure.normalized()?);
        let m = self.unresolved_mass + self.truncation.dropped_mass;
        let horizon = self.stopped_by_step.len().max(1) as f64;
        Ok((core, core + m * horizon * step_entropy))
    }

    pub fn to_json(&self) -> ExactTransformJson {
        ExactTransformJson {
            measure: self.measure.to_json(),
            unresolved_mass: self.unresolved_mass,
            stopped_by_step: self.stopped_by_step.clone(),
            truncation: self.truncation,
        }
    }
}

/// Wire format: the measure JSON with the budget fields alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactTransformJson {
    #[serde(flatten)]
    pub measure: MeasureJson,
    pub unresolved_mass: f64,
    pub stopped_by_step: Vec<f64>,
    pub truncation: TruncationReport,
}

/// Drops entries below the weight floor, then the lightest entries beyond
/// `cap`; returns the dropped mass.
fn prune<K: Ord + Clone + std::hash::Hash>(table: &mut FxHashMap<K, f64>, cap: usize) -> f64 {
    let mut dropped = Vec::new();
    table.retain(|_, w| {
        if *w < WEIGHT_FLOOR {
            dropped.push(*w);
            false
        } else {
            true
        }
    });
    if table.len() > cap {
        let mut entries: Vec<(K, f64)> = table.drain().collect();
        entries.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        let excess = entries.len() - cap;
        dropped.extend(entries.drain(..excess).map(|e| e.1));
        table.extend(entries);
    }
    compensated_sum(dropped)
}

/// Exact `μ_τ` by forward evolution of (position, state) up to `horizon`.
pub fn transformed_measure_exact(
    rule: &StoppingRule,
    mu: &Measure,
    horizon: usize,
    support_cap: usize,
) -> Result<ExactTransformResult> {
    rule.check_compatible(mu)?;
    mu.require_probability()?;
    let group = mu.group();
    let mut frontier: FxHashMap<(GroupElement, RuleState), f64> = FxHashMap::default();
    for (s, p) in rule.initial_distribution() {
        *frontier.entry((group.identity(), s)).or_insert(0.0) += p;
    }
    let mut out: FxHashMap<GroupElement, f64> = FxHashMap::default();
    let mut stopped_by_step = Vec::with_capacity(horizon);
    let mut dropped = 0.0;
    for _ in 0..horizon {
        if frontier.is_empty() {
            break;
        }
        let mut next: FxHashMap<(GroupElement, RuleState), f64> = FxHashMap::default();
        let mut stopped = Vec::new();
        for ((x, state), p) in &frontier {
            for (h, q) in mu.atoms() {
                let y = group.multiply(x, h)?;
                for (s, r, stop) in rule.exact_step(state, h) {
                    let w = p * q * r;
                    if stop {
                        *out.entry(y.clone()).or_insert(0.0) += w;
                        stopped.push(w);
                    } else {
                        *next.entry((y.clone(), s)).or_insert(0.0) += w;
                    }
                }
            }
        }
        stopped_by_step.push(compensated_sum(stopped));
        dropped += prune(&mut next, support_cap);
        frontier = next;
        if dropped > TRANSFORM_TRUNCATION_BUDGET {
            return Err(Error::Truncation {
                dropped,
                allowed: TRANSFORM_TRUNCATION_BUDGET,
            });
        }
    }
    dropped += prune(&mut out, support_cap);
    if dropped > TRANSFORM_TRUNCATION_BUDGET {
        return Err(Error::Truncation {
            dropped,
            allowed: TRANSFORM_TRUNCATION_BUDGET,
        });
    }
    let measure = Measure::from_table(group.clone(), out);
    let unresolved_mass = compensated_sum(frontier.values().copied());
    Ok(ExactTransformResult {
        truncation: TruncationReport {
            retained_mass: measure.mass(),
            dropped_mass: dropped,
            support_size: measure.len(),
        },
        measure,
        stopped_by_step,
        unresolved_mass,
    })
}

/// Empirical law of `x_τ` over `paths` sampled paths, normalized by the total
/// path count, with the censored fraction.
pub fn transformed_measure_mc(
    rule: &StoppingRule,
    mu: &Measure,
    paths: usize,
    horizon: usize,
    rng: &PrngStream,
) -> Result<(Measure, f64)> {
    if paths == 0 || horizon == 0 {
        return Err(Error::Usage(
            "transformed_measure_mc needs paths and horizon >= 1".into(),
        ));
    }
    rule.check_compatible(mu)?;
    let sampler = std::sync::Arc::new(crate::measure::Sampler::new(mu)?);
    let ends = per_path(paths, |i| {
        sample_legs(rule, &sampler, rng, i, 1, horizon).map(|(_, x)| x)
    });
    let mut counts: FxHashMap<GroupElement, usize> = FxHashMap::default();
    let mut censored = 0;
    for end in ends {
        match end {
            Some(x) => *counts.entry(x).or_insert(0) += 1,
            None => censored += 1,
        }
    }
    let table = counts.into_iter().map(|(g, c)| (g, c as f64 / paths as f64)).collect();
    Ok((
        Measure::from_table(mu.group().clone(), table),
        censored as f64 / paths as f64,
    ))
}

/// `β + Σ_{i=1}^{i_max} α^{*i} * β`.
pub fn willis_closed_form(beta: &Measure, alpha: &Measure, i_max: usize) -> Result<ExactTransformResult> {
    if beta.group() != alpha.group() {
        return Err(Error::GroupMismatch {
            expected: beta.group().kind().to_string(),
            found: alpha.group().kind().to_string(),
        });
    }
    let a = alpha.mass();
    if (a + beta.mass() - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidMeasure(format!(
            "mass(α) + mass(β) = {} must be 1",
            a + beta.mass()
        )));
    }
    if !(beta.mass() > 0.0) {
        return Err(Error::InvalidMeasure("mass(β) must be positive".into()));
    }
    let mut term = beta.clone();
    let mut acc: FxHashMap<GroupElement, f64> = beta.atoms().iter().cloned().collect();
    let mut stopped_by_step = vec![beta.mass()];
    for _ in 0..i_max {
        if alpha.is_empty() {
            break;
        }
        term = convolve(alpha, &term)?;
        stopped_by_step.push(term.mass());
        for (g, w) in term.atoms() {
            *acc.entry(g.clone()).or_insert(0.0) += w;
        }
    }
    let dropped = prune(&mut acc, usize::MAX);
    let measure = Measure::from_table(beta.group().clone(), acc);
    let unresolved_mass = if alpha.is_empty() {
        0.0
    } else {
        a.powi(i_max as i32 + 1)
    };
    Ok(ExactTransformResult {
        truncation: TruncationReport {
            retained_mass: measure.mass(),
            dropped_mass: dropped,
            support_size: measure.len(),
        },
        measure,
        stopped_by_step,
        unresolved_mass,
    })
}

/// `Σ_{n ≤ n_max} θ(n) μ^{*n}`, with the `θ`-tail beyond `n_max` unresolved.
pub fn convex_combination_measure(
    theta: &[(usize, f64)],
    mu: &Measure,
    n_max: usize,
    support_cap: usize,
) -> Result<ExactTransformResult> {
    mu.require_probability()?;
    if let Some((n, p)) = theta.iter().find(|(n, p)| *n == 0 || !(*p >= 0.0)) {
        return Err(Error::InvalidRule(format!(
            "θ atom ({n}, {p}) must have n >= 1 and nonnegative weight"
        )));
    }
    let total = compensated_sum(theta.iter().map(|t| t.1));
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidRule(format!("θ sums to {total}, not 1")));
    }
    let powers = convolution_powers(mu, n_max, support_cap)?;
    let mut acc: FxHashMap<GroupElement, f64> = FxHashMap::default();
    let mut stopped_by_step = vec![0.0; n_max];
    let mut dropped = 0.0;
    for &(n, p) in theta.iter().filter(|t| t.0 <= n_max) {
        let (power, report) = &powers[n];
        dropped += p * report.dropped_mass;
        stopped_by_step[n - 1] += p * power.mass();
        for (g, w) in power.atoms() {
            *acc.entry(g.clone()).or_insert(0.0) += p * w;
        }
    }
    if dropped > TRANSFORM_TRUNCATION_BUDGET {
        return Err(Error::Truncation {
            dropped,
            allowed: TRANSFORM_TRUNCATION_BUDGET,
        });
    }
    let measure = Measure::from_table(mu.group().clone(), acc);
    let unresolved_mass = compensated_sum(theta.iter().filter(|t| t.0 > n_max).map(|t| t.1));
    Ok(ExactTransformResult {
        truncation: TruncationReport {
            retained_mass: measure.mass(),
            dropped_mass: dropped,
            support_size: measure.len(),
        },
        measure,
        stopped_by_step,
        unresolved_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::measure::{convolution_power, decompose, mix};
    use crate::stopping::{compose, Homomorphism};

    fn z() -> GroupDescriptor {
        GroupDescriptor::zd(1)
    }

    fn zel(k: i64) -> GroupElement {
        GroupElement::zd([k])
    }

    fn srw_z() -> Measure {
        Measure::simple_random_walk(&z()).unwrap()
    }

    fn geometric(i_max: i32) -> Measure {
        Measure::new(&z(), (1..=i_max).map(|i| (zel(2 - i as i64), 0.5f64.powi(i)))).unwrap()
    }

    fn first_plus() -> StoppingRule {
        StoppingRule::first_increment_in(&z(), vec![zel(1)]).unwrap()
    }

    fn conserved(r: &ExactTransformResult) -> bool {
        (r.measure.mass() + r.unresolved_mass + r.truncation.dropped_mass - 1.0).abs() <= 1e-10
    }

    #[test]
    fn constant_two_is_square() {
        let rule = StoppingRule::constant(&z(), 2).unwrap();
        let r = transformed_measure_exact(&rule, &srw_z(), 10, 1 << 10).unwrap();
        let expected = Measure::new(&z(), [(zel(-2), 0.25), (zel(0), 0.5), (zel(2), 0.25)]).unwrap();
        assert_eq!(r.measure, expected);
        assert_eq!(r.unresolved_mass, 0.0);
        assert!(conserved(&r));
    }

    #[test]
    fn first_increment_is_geometric() {
        let r = transformed_measure_exact(&first_plus(), &srw_z(), 30, 1 << 10).unwrap();
        assert!(r.measure.total_variation(&geometric(30)) < 1e-15);
        assert_eq!(r.unresolved_mass, 0.5f64.powi(30));
        assert!(conserved(&r));
        let (lo, hi) = r.entropy_interval(2f64.ln()).unwrap();
        assert!((lo - 2.0 * 2f64.ln()).abs() < 1e-6 && hi >= lo);
    }

    #[test]
    fn parity_hitting_is_square() {
        let rule = StoppingRule::hitting_subgroup(&z(), Homomorphism::new(&z(), vec![1], 2).unwrap()).unwrap();
        let r = transformed_measure_exact(&rule, &srw_z(), 10, 1 << 10).unwrap();
        let (sq, _) = convolution_power(&srw_z(), 2, 1 << 10).unwrap();
        assert!(r.measure.total_variation(&sq) <= 1e-12);
        assert_eq!(r.stopped_by_step, vec![0.0, 1.0]);
    }

    #[test]
    fn mc_constant_one_is_mu() {
        let mu = Measure::simple_random_walk(&GroupDescriptor::free(2)).unwrap();
        let rule = StoppingRule::constant(mu.group(), 1).unwrap();
        let paths = 20_000;
        let (m, censored) = transformed_measure_mc(&rule, &mu, paths, 5, &PrngStream::new(1, 0)).unwrap();
        assert_eq!(censored, 0.0);
        assert!(m.total_variation(&mu) <= 4.0 * (4.0 / paths as f64).sqrt());
    }

    #[test]
    fn mc_matches_exact_per_atom() {
        let mu = srw_z();
        let paths = 100_000;
        for rule in [
            first_plus(),
            StoppingRule::randomized_horizon(&z(), vec![(1, 0.5), (3, 0.5)]).unwrap(),
        ] {
            let exact = transformed_measure_exact(&rule, &mu, 60, 1 << 12).unwrap();
            let (mc, censored) = transformed_measure_mc(&rule, &mu, paths, 60, &PrngStream::new(4, 0)).unwrap();
            assert!(censored < 1e-4);
            for (g, p) in exact.measure.atoms() {
                let sigma = (p * (1.0 - p) / paths as f64).sqrt();
                assert!(
                    (mc.weight(g) - p).abs() <= 4.0 * sigma + 1e-12,
                    "{g}: {} vs {p}",
                    mc.weight(g)
                );
            }
            let plus = mc.weight(&zel(1));
            if rule.horizon_law().is_none() {
                assert!((plus - 0.5).abs() <= 4.0 * (0.25 / paths as f64).sqrt());
            }
        }
    }

    #[test]
    fn willis_examples() {
        let mu = srw_z();
        let (beta, alpha) = decompose(&mu, &mu.support().cloned().collect::<Vec<_>>()).unwrap();
        let r = willis_closed_form(&beta, &alpha, 10).unwrap();
        assert_eq!(r.measure, mu);
        assert_eq!(r.unresolved_mass, 0.0);

        let (beta, alpha) = decompose(&mu, &[zel(1)]).unwrap();
        let r = willis_closed_form(&beta, &alpha, 29).unwrap();
        assert!(r.measure.total_variation(&geometric(30)) < 1e-15);
        assert_eq!(r.unresolved_mass, 0.5f64.powi(30));
        assert!(conserved(&r));

        let rule = StoppingRule::willis(&alpha, &beta).unwrap();
        let exact = transformed_measure_exact(&rule, &mu, 30, 1 << 10).unwrap();
        assert!(exact.measure.total_variation(&r.measure) <= 1e-9);

        assert!(willis_closed_form(&beta, &mu, 3).is_err());
    }

    #[test]
    fn randomized_willis_matches_closed_form() {
        let mu = srw_z();
        let beta = Measure::new(&z(), [(zel(1), 0.25), (zel(-1), 0.125)]).unwrap();
        let rule = StoppingRule::willis_from(&mu, &beta).unwrap();
        let (alpha, beta) = rule.willis_parts().unwrap();
        let closed = willis_closed_form(beta, alpha, 39).unwrap();
        let exact = transformed_measure_exact(&rule, &mu, 40, 1 << 12).unwrap();
        assert!(exact.measure.total_variation(&closed.measure) <= 1e-9);
        assert!((exact.unresolved_mass - closed.unresolved_mass).abs() <= 1e-12);
    }

    #[test]
    fn convex_combination_examples() {
        let mu = srw_z();
        let r = convex_combination_measure(&[(3, 1.0)], &mu, 5, 1 << 10).unwrap();
        assert_eq!(r.measure, convolution_power(&mu, 3, 1 << 10).unwrap().0);

        let theta = [(1, 0.5), (2, 0.5)];
        let r = convex_combination_measure(&theta, &mu, 4, 1 << 10).unwrap();
        let expected = Measure::new(
            &z(),
            [
                (zel(-2), 0.125),
                (zel(-1), 0.25),
                (zel(0), 0.25),
                (zel(1), 0.25),
                (zel(2), 0.125),
            ],
        )
        .unwrap();
        assert!(r.measure.total_variation(&expected) < 1e-15);
        let m = mix(&[(0.5, mu.clone()), (0.5, convolution_power(&mu, 2, 64).unwrap().0)]).unwrap();
        assert!(r.measure.total_variation(&m) < 1e-15);

        let rule = StoppingRule::randomized_horizon(&z(), theta.to_vec()).unwrap();
        let exact = transformed_measure_exact(&rule, &mu, 10, 1 << 10).unwrap();
        assert!(exact.measure.total_variation(&r.measure) <= 1e-10);

        let r = convex_combination_measure(&[(1, 0.5), (7, 0.5)], &mu, 4, 1 << 10).unwrap();
        assert_eq!(r.unresolved_mass, 0.5);
        assert!(conserved(&r));
    }

    #[test]
    fn composition_is_convolution() {
        let mu = srw_z();
        let one = StoppingRule::constant(&z(), 1).unwrap();
        let c = compose(&one, &first_plus()).unwrap();
        let lhs = transformed_measure_exact(&c, &mu, 41, 1 << 12).unwrap();
        let a = transformed_measure_exact(&one, &mu, 41, 1 << 12).unwrap();
        let b = transformed_measure_exact(&first_plus(), &mu, 40, 1 << 12).unwrap();
        let rhs = convolve(&a.measure, &b.measure).unwrap();
        assert!(lhs.measure.total_variation(&rhs) <= 1e-9);
    }

    #[test]
    fn wald_on_z() {
        let mu = Measure::new(&z(), [(zel(1), 0.75), (zel(-1), 0.25)]).unwrap();
        let rules = [
            first_plus(),
            StoppingRule::constant(&z(), 3).unwrap(),
            StoppingRule::randomized_horizon(&z(), vec![(1, 0.25), (4, 0.75)]).unwrap(),
            StoppingRule::hitting_subgroup(&z(), Homomorphism::new(&z(), vec![1], 3).unwrap()).unwrap(),
            StoppingRule::hitting_subset(&z(), vec![zel(2), zel(-2)]).unwrap(),
        ];
        for rule in rules {
            let r = transformed_measure_exact(&rule, &mu, 200, 1 << 14).unwrap();
            let mean = r.measure.zd_mean().unwrap()[0];
            let budget = r.unresolved_mass * 200.0 + r.truncation.dropped_mass * 200.0 + 1e-9;
            assert!((mean - r.resolved_expectation() * 0.5).abs() <= budget, "{rule:?}");
        }
    }

    #[test]
    fn json_has_budget_fields() {
        let r = transformed_measure_exact(&first_plus(), &srw_z(), 5, 64).unwrap();
        let v = serde_json::to_value(r.to_json()).unwrap();
        assert!(v.get("unresolved_mass").is_some() && v.get("stopped_by_step").is_some() && v.get("atoms").is_some());
    }
}
