//! Stopping rules as finite-state prefix automata over increments.
//!
//! A rule reads increments one at a time, optionally consulting auxiliary
//! uniform draws, and decides after each step whether to stop. The same
//! automaton is driven two ways: sampled along a path ([`evaluate`]) and
//! exactly, with auxiliary randomness integrated into transition weights
//! ([`StoppingRule::exact_step`]), which the exact transform relies on.

use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement, GroupKind};
use crate::measure::{compensated_sum, Measure, Sampler, MASS_TOLERANCE};
use crate::rng::PrngStream;
use crate::walk::{per_path, Estimate, SamplePath};

/// JSON description of a rule; elements use the canonical text encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    Constant {
        k: usize,
    },
    FirstIncrementIn {
        set: Vec<String>,
    },
    /// Hitting time of the kernel of `φ: G → Z/modulus`, given by the images
    /// of the coordinates (`Z^d`), of the letters (free groups), of
    /// `[marker, lamp parity]` (lamplighter) or of `1` (cyclic).
    HittingSubgroup {
        weights: Vec<i64>,
        modulus: u64,
    },
    HittingSubset {
        set: Vec<String>,
    },
    /// `θ` as `[n, θ(n)]` pairs.
    RandomizedHorizon {
        theta: Vec<(usize, f64)>,
    },
    Willis {
        alpha: Vec<(String, f64)>,
        beta: Vec<(String, f64)>,
    },
    Compose {
        first: Box<RuleSpec>,
        second: Box<RuleSpec>,
    },
}

/// A homomorphism onto `Z/modulus`.
#[derive(Clone, Debug, PartialEq)]
pub struct Homomorphism {
    weights: Vec<i64>,
    modulus: u64,
}

impl Homomorphism {
    pub fn new(group: &GroupDescriptor, weights: Vec<i64>, modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidRule("homomorphism modulus must be >= 1".into()));
        }
        let m = modulus as i128;
        let expected = match group.kind() {
            GroupKind::Zd { dim } => dim,
            GroupKind::Free { rank } => rank,
            GroupKind::Lamplighter => 2,
            GroupKind::Cyclic { .. } => 1,
        };
        if weights.len() != expected {
            return Err(Error::InvalidRule(format!(
                "homomorphism on {} needs {expected} weights, got {}",
                group.kind(),
                weights.len()
            )));
        }
        match group.kind() {
            GroupKind::Lamplighter if (2 * weights[1] as i128).rem_euclid(m) != 0 => {
                return Err(Error::InvalidRule("lamp weight must have order dividing 2".into()));
            }
            GroupKind::Cyclic { order } if (order as i128 * weights[0] as i128).rem_euclid(m) != 0 => {
                return Err(Error::InvalidRule(format!(
                    "weight {} does not define a homomorphism from Z/{order} to Z/{modulus}",
                    weights[0]
                )));
            }
            _ => {}
        }
        Ok(Homomorphism { weights, modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `φ(g)` in `[0, modulus)`.
    pub fn apply(&self, g: &GroupElement) -> u64 {
        let m = self.modulus as i128;
        let raw: i128 = if let Some(v) = g.as_zd() {
            v.iter().zip(&self.weights).map(|(x, w)| *x as i128 * *w as i128).sum()
        } else if let Some(word) = g.as_free() {
            word.iter()
                .map(|&l| {
                    let w = self.weights[(l / 2) as usize] as i128;
                    if l % 2 == 0 {
                        w
                    } else {
                        -w
                    }
                })
                .sum()
        } else if let Some((lit, pos)) = g.as_lamplighter() {
            pos as i128 * self.weights[0] as i128 + lit.len() as i128 * self.weights[1] as i128
        } else {
            g.as_cyclic().expect("supported group") as i128 * self.weights[0] as i128
        };
        raw.rem_euclid(m) as u64
    }

    /// Index of the kernel, `|image φ|`.
    pub fn index(&self) -> u64 {
        let g = self
            .weights
            .iter()
            .fold(self.modulus, |acc, w| gcd(acc, w.unsigned_abs() % self.modulus));
        self.modulus / g
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum RuleKind {
    Constant(usize),
    FirstIncrementIn(Vec<GroupElement>),
    HittingSubgroup(Homomorphism),
    HittingSubset(Vec<GroupElement>),
    /// Sorted by horizon; weights sum to one.
    RandomizedHorizon(Vec<(usize, f64)>),
    Willis {
        alpha: Measure,
        beta: Measure,
        /// `β(h) / (α + β)(h)`, sorted by element.
        ratio: Vec<(GroupElement, f64)>,
    },
    Compose(Box<StoppingRule>, Box<StoppingRule>),
}

/// Automaton state. Every rule starts in a state drawn from
/// [`StoppingRule::initial_distribution`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleState {
    /// Steps left before stopping.
    Countdown(usize),
    Idle,
    Coset(u64),
    Position(GroupElement),
    First(Box<RuleState>),
    Second(Box<RuleState>),
}

/// Weighted successor states with their stop flags.
pub type Transitions = SmallVec<[(RuleState, f64, bool); 2]>;

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingRule {
    group: GroupDescriptor,
    kind: RuleKind,
}

fn sorted_set(group: &GroupDescriptor, set: &[String]) -> Result<Vec<GroupElement>> {
    let mut out = set.iter().map(|s| group.parse(s)).collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidRule("set must be nonempty".into()));
    }
    Ok(out)
}

fn measure_from(group: &GroupDescriptor, atoms: &[(String, f64)]) -> Result<Measure> {
    let parsed = atoms
        .iter()
        .map(|(s, w)| Ok((group.parse(s)?, *w)))
        .collect::<Result<Vec<_>>>()?;
    Measure::new(group, parsed)
}

impl StoppingRule {
    /// Builds the automaton for `spec` on `group`.
    pub fn build(spec: &RuleSpec, group: &GroupDescriptor) -> Result<Self> {
        match spec {
            RuleSpec::Constant { k } => Self::constant(group, *k),
            RuleSpec::FirstIncrementIn { set } => Self::first_increment_in(group, sorted_set(group, set)?),
            RuleSpec::HittingSubgroup { weights, modulus } => {
                Self::hitting_subgroup(group, Homomorphism::new(group, weights.clone(), *modulus)?)
            }
            RuleSpec::HittingSubset { set } => Self::hitting_subset(group, sorted_set(group, set)?),
            RuleSpec::RandomizedHorizon { theta } => Self::randomized_horizon(group, theta.clone()),
            RuleSpec::Willis { alpha, beta } => Self::willis(&measure_from(group, alpha)?, &measure_from(group, beta)?),
            RuleSpec::Compose { first, second } => compose(&Self::build(first, group)?, &Self::build(second, group)?),
        }
    }

    pub fn constant(group: &GroupDescriptor, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidRule("constant rule needs k >= 1".into()));
        }
        Ok(Self::with(group, RuleKind::Constant(k)))
    }

    pub fn first_increment_in(group: &GroupDescriptor, mut set: Vec<GroupElement>) -> Result<Self> {
        for g in &set {
            group.check(g)?;
        }
        set.sort();
        set.dedup();
        if set.is_empty() {
            return Err(Error::InvalidRule("first_increment_in needs a nonempty set".into()));
        }
        Ok(Self::with(group, RuleKind::FirstIncrementIn(set)))
    }

    pub fn hitting_subgroup(group: &GroupDescriptor, phi: Homomorphism) -> Result<Self> {
        Ok(Self::with(group, RuleKind::HittingSubgroup(phi)))
    }

    pub fn hitting_subset(group: &GroupDescriptor, mut set: Vec<GroupElement>) -> Result<Self> {
        for g in &set {
            group.check(g)?;
        }
        set.sort();
        set.dedup();
        if set.is_empty() {
            return Err(Error::InvalidRule("hitting_subset needs a nonempty set".into()));
        }
        Ok(Self::with(group, RuleKind::HittingSubset(set)))
    }

    pub fn randomized_horizon(group: &GroupDescriptor, mut theta: Vec<(usize, f64)>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidRule("θ must have at least one atom".into()));
        }
        theta.sort_by_key(|t| t.0);
        if theta.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidRule("θ lists a horizon twice".into()));
        }
        if let Some((n, p)) = theta.iter().find(|(n, p)| *n == 0 || !(*p > 0.0)) {
            return Err(Error::InvalidRule(format!(
                "θ atom ({n}, {p}) must have n >= 1 and positive weight"
            )));
        }
        let total = compensated_sum(theta.iter().map(|t| t.1));
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidRule(format!("θ sums to {total}, not 1")));
        }
        Ok(Self::with(group, RuleKind::RandomizedHorizon(theta)))
    }

    /// Stops at each step with probability `β(h)/μ(h)`, where `μ = α + β`.
    pub fn willis(alpha: &Measure, beta: &Measure) -> Result<Self> {
        let group = beta.group();
        if alpha.group() != group {
            return Err(Error::GroupMismatch {
                expected: group.kind().to_string(),
                found: alpha.group().kind().to_string(),
            });
        }
        if !(beta.mass() > 0.0) {
            return Err(Error::InvalidRule("willis rule needs mass(β) > 0".into()));
        }
        if (alpha.mass() + beta.mass() - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidRule(format!(
                "mass(α) + mass(β) = {} must be 1",
                alpha.mass() + beta.mass()
            )));
        }
        let mut ratio: Vec<(GroupElement, f64)> = Vec::new();
        for (g, b) in beta.atoms() {
            ratio.push((g.clone(), b / (b + alpha.weight(g))));
        }
        for (g, _) in alpha.atoms() {
            if beta.weight(g) == 0.0 {
                ratio.push((g.clone(), 0.0));
            }
        }
        ratio.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self::with(
            group,
            RuleKind::Willis {
                alpha: alpha.clone(),
                beta: beta.clone(),
                ratio,
            },
        ))
    }

    /// Willis rule from `μ` and its part `β ≤ μ`.
    pub fn willis_from(mu: &Measure, beta: &Measure) -> Result<Self> {
        let mut rest = Vec::new();
        for (g, m) in mu.atoms() {
            let b = beta.weight(g);
            if b > m * (1.0 + 1e-12) {
                return Err(Error::InvalidRule(format!("β({g}) = {b} exceeds μ({g}) = {m}")));
            }
            if m - b > MASS_TOLERANCE {
                rest.push((g.clone(), m - b));
            }
        }
        if let Some((g, _)) = beta.atoms().iter().find(|(g, _)| mu.weight(g) == 0.0) {
            return Err(Error::InvalidRule(format!("β charges {g} outside the support of μ")));
        }
        let alpha = Measure::new(mu.group(), rest)?;
        Self::willis(&alpha, beta)
    }

    fn with(group: &GroupDescriptor, kind: RuleKind) -> Self {
        StoppingRule {
            group: group.clone(),
            kind,
        }
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    /// Whether the rule consults auxiliary randomness.
    pub fn is_randomized(&self) -> bool {
        match &self.kind {
            RuleKind::RandomizedHorizon(theta) => theta.len() > 1,
            RuleKind::Willis { ratio, .. } => ratio.iter().any(|(_, r)| *r > 0.0 && *r < 1.0),
            RuleKind::Compose(a, b) => a.is_randomized() || b.is_randomized(),
            _ => false,
        }
    }

    /// The subgroup homomorphism of a hitting-subgroup rule.
    pub fn subgroup(&self) -> Option<&Homomorphism> {
        match &self.kind {
            RuleKind::HittingSubgroup(phi) => Some(phi),
            _ => None,
        }
    }

    pub fn constant_steps(&self) -> Option<usize> {
        match &self.kind {
            RuleKind::Constant(k) => Some(*k),
            _ => None,
        }
    }

    pub fn horizon_law(&self) -> Option<&[(usize, f64)]> {
        match &self.kind {
            RuleKind::RandomizedHorizon(theta) => Some(theta),
            _ => None,
        }
    }

    pub fn willis_parts(&self) -> Option<(&Measure, &Measure)> {
        match &self.kind {
            RuleKind::Willis { alpha, beta, .. } => Some((alpha, beta)),
            _ => None,
        }
    }

    /// Per-increment stop probability of a rule that stops at its first
    /// marked step with state-independent marking, with the number of marks
    /// needed. `None` for rules of any other shape.
    pub fn mark_profile(&self, mu: &Measure) -> Option<(Vec<(GroupElement, f64)>, usize)> {
        let support = mu.atoms().iter().map(|(g, _)| g);
        match &self.kind {
            RuleKind::Constant(k) => Some((support.map(|g| (g.clone(), 1.0)).collect(), *k)),
            RuleKind::FirstIncrementIn(set) => Some((
                support
                    .map(|g| (g.clone(), if set.binary_search(g).is_ok() { 1.0 } else { 0.0 }))
                    .collect(),
                1,
            )),
            RuleKind::Willis { .. } => Some((support.map(|g| (g.clone(), self.ratio(g))).collect(), 1)),
            RuleKind::Compose(a, b) => {
                let (ra, ma) = a.mark_profile(mu)?;
                let (rb, mb) = b.mark_profile(mu)?;
                (ra == rb).then_some((ra, ma + mb))
            }
            _ => None,
        }
    }

    fn ratio(&self, h: &GroupElement) -> f64 {
        match &self.kind {
            RuleKind::Willis { ratio, .. } => ratio
                .binary_search_by(|a| a.0.cmp(h))
                .map(|i| ratio[i].1)
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Checks the use-time preconditions against the driving measure.
    pub fn check_compatible(&self, mu: &Measure) -> Result<()> {
        if mu.group() != &self.group {
            return Err(Error::GroupMismatch {
                expected: self.group.kind().to_string(),
                found: mu.group().kind().to_string(),
            });
        }
        match &self.kind {
            RuleKind::FirstIncrementIn(set) => {
                if set.iter().all(|g| mu.weight(g) == 0.0) {
                    return Err(Error::InvalidRule("μ(B) = 0 for first_increment_in".into()));
                }
            }
            RuleKind::Willis { alpha, beta, .. } => {
                let mut support: Vec<&GroupElement> =
                    alpha.support().chain(beta.support()).chain(mu.support()).collect();
                support.sort();
                support.dedup();
                for g in support {
                    let d = (alpha.weight(g) + beta.weight(g) - mu.weight(g)).abs();
                    if d > MASS_TOLERANCE {
                        return Err(Error::InvalidRule(format!("α + β differs from μ at {g} by {d:e}")));
                    }
                }
            }
            RuleKind::Compose(a, b) => {
                a.check_compatible(mu)?;
                b.check_compatible(mu)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Law of the initial state.
    pub fn initial_distribution(&self) -> SmallVec<[(RuleState, f64); 2]> {
        match &self.kind {
            RuleKind::Constant(k) => smallvec![(RuleState::Countdown(*k), 1.0)],
            RuleKind::FirstIncrementIn(_) | RuleKind::Willis { .. } => smallvec![(RuleState::Idle, 1.0)],
            RuleKind::HittingSubgroup(_) => smallvec![(RuleState::Coset(0), 1.0)],
            RuleKind::HittingSubset(_) => smallvec![(RuleState::Position(self.group.identity()), 1.0)],
            RuleKind::RandomizedHorizon(theta) => theta.iter().map(|&(n, p)| (RuleState::Countdown(n), p)).collect(),
            RuleKind::Compose(a, _) => a
                .initial_distribution()
                .into_iter()
                .map(|(s, p)| (RuleState::First(Box::new(s)), p))
                .collect(),
        }
    }

    /// Successors of `state` after increment `h`, with auxiliary randomness
    /// integrated out.
    pub fn exact_step(&self, state: &RuleState, h: &GroupElement) -> Transitions {
        match (&self.kind, state) {
            (RuleKind::Constant(_) | RuleKind::RandomizedHorizon(_), RuleState::Countdown(left)) => {
                smallvec![(RuleState::Countdown(left - 1), 1.0, *left == 1)]
            }
            (RuleKind::FirstIncrementIn(set), RuleState::Idle) => {
                smallvec![(RuleState::Idle, 1.0, set.binary_search(h).is_ok())]
            }
            (RuleKind::Willis { .. }, RuleState::Idle) => {
                let r = self.ratio(h);
                let mut out = Transitions::new();
                if r > 0.0 {
                    out.push((RuleState::Idle, r, true));
                }
                if r < 1.0 {
                    out.push((RuleState::Idle, 1.0 - r, false));
                }
                out
            }
            (RuleKind::HittingSubgroup(phi), RuleState::Coset(c)) => {
                let next = (c + phi.apply(h)) % phi.modulus;
                smallvec![(RuleState::Coset(next), 1.0, next == 0)]
            }
            (RuleKind::HittingSubset(set), RuleState::Position(x)) => {
                let y = self.group.multiply(x, h).expect("increment in group");
                let stop = set.binary_search(&y).is_ok();
                smallvec![(RuleState::Position(y), 1.0, stop)]
            }
            (RuleKind::Compose(a, b), RuleState::First(s)) => {
                let mut out = Transitions::new();
                for (next, p, stop) in a.exact_step(s, h) {
                    if stop {
                        for (init, q) in b.initial_distribution() {
                            out.push((RuleState::Second(Box::new(init)), p * q, false));
                        }
                    } else {
                        out.push((RuleState::First(Box::new(next)), p, false));
                    }
                }
                out
            }
            (RuleKind::Compose(_, b), RuleState::Second(s)) => b
                .exact_step(s, h)
                .into_iter()
                .map(|(next, p, stop)| (RuleState::Second(Box::new(next)), p, stop))
                .collect(),
            _ => panic!("state {state:?} does not belong to this rule"),
        }
    }

    /// Draws the initial state.
    pub fn sample_initial(&self, aux: &mut PrngStream) -> RuleState {
        match &self.kind {
            RuleKind::RandomizedHorizon(theta) => {
                let u = aux.uniform();
                let mut acc = 0.0;
                for &(n, p) in theta {
                    acc += p;
                    if u < acc {
                        return RuleState::Countdown(n);
                    }
                }
                RuleState::Countdown(theta.last().expect("nonempty θ").0)
            }
            RuleKind::Compose(a, _) => RuleState::First(Box::new(a.sample_initial(aux))),
            _ => self.initial_distribution().swap_remove(0).0,
        }
    }

    /// One sampled transition: the next state and whether the rule stops.
    pub fn sample_step(&self, state: RuleState, h: &GroupElement, aux: &mut PrngStream) -> (RuleState, bool) {
        match (&self.kind, state) {
            (RuleKind::Willis { .. }, RuleState::Idle) => {
                let stop = aux.uniform() < self.ratio(h);
                (RuleState::Idle, stop)
            }
            (RuleKind::Compose(a, b), RuleState::First(s)) => {
                let (next, stop) = a.sample_step(*s, h, aux);
                if stop {
                    (RuleState::Second(Box::new(b.sample_initial(aux))), false)
                } else {
                    (RuleState::First(Box::new(next)), false)
                }
            }
            (RuleKind::Compose(_, b), RuleState::Second(s)) => {
                let (next, stop) = b.sample_step(*s, h, aux);
                (RuleState::Second(Box::new(next)), stop)
            }
            (_, state) => {
                let mut t = self.exact_step(&state, h);
                debug_assert_eq!(t.len(), 1);
                let (next, _, stop) = t.swap_remove(0);
                (next, stop)
            }
        }
    }

    /// Runs the rule on `path` shifted by `offset`, for at most `limit` steps.
    /// Returns the number of steps taken, whether it stopped, and the
    /// displacement `x_offset⁻¹ x_{offset + steps}`.
    fn run_leg(
        &self,
        path: &mut SamplePath,
        offset: usize,
        aux: &mut PrngStream,
        limit: usize,
    ) -> (usize, bool, GroupElement) {
        let mut state = self.sample_initial(aux);
        let mut x = self.group.identity();
        for s in 1..=limit {
            let Some(h) = path.increment(offset + s) else {
                return (s - 1, false, x);
            };
            let h = h.clone();
            self.group.multiply_in_place(&mut x, &h).expect("increment in group");
            let (next, stop) = self.sample_step(state, &h, aux);
            if stop {
                return (s, true, x);
            }
            state = next;
        }
        (limit, false, x)
    }
}

/// Result of running a rule up to a horizon.
#[derive(Clone, Debug, PartialEq)]
pub enum StopOutcome {
    Stopped { index: usize, position: GroupElement },
    Censored { horizon: usize, position: GroupElement },
}

impl StopOutcome {
    pub fn index(&self) -> Option<usize> {
        match self {
            StopOutcome::Stopped { index, .. } => Some(*index),
            StopOutcome::Censored { .. } => None,
        }
    }

    pub fn position(&self) -> &GroupElement {
        match self {
            StopOutcome::Stopped { position, .. } | StopOutcome::Censored { position, .. } => position,
        }
    }
}

/// Builds a rule from its JSON description.
pub fn build_stopping_rule(spec: &RuleSpec, group: &GroupDescriptor) -> Result<StoppingRule> {
    StoppingRule::build(spec, group)
}

/// First `s ≤ horizon` at which the rule stops on `path`, with `x_s`.
pub fn evaluate(rule: &StoppingRule, path: &mut SamplePath, aux: &mut PrngStream, horizon: usize) -> StopOutcome {
    let (steps, stopped, position) = rule.run_leg(path, 0, aux, horizon);
    if stopped {
        StopOutcome::Stopped { index: steps, position }
    } else {
        StopOutcome::Censored {
            horizon: steps,
            position,
        }
    }
}

/// `τ_1, ..., τ_count` with `τ_{m+1} = τ_m + τ(U^{τ_m} path)`. The first leg
/// uses `aux` itself, leg `m ≥ 1` uses `aux.derive(m)`. Indices and
/// positions are absolute; a censored leg ends the sequence.
pub fn iterate(
    rule: &StoppingRule,
    path: &mut SamplePath,
    aux: &PrngStream,
    count: usize,
    horizon: usize,
) -> Vec<StopOutcome> {
    let group = rule.group.clone();
    let mut out = Vec::with_capacity(count);
    let mut total = 0;
    let mut x = group.identity();
    for m in 0..count {
        let mut leg_aux = if m == 0 { aux.clone() } else { aux.derive(m as u64) };
        let (steps, stopped, d) = rule.run_leg(path, total, &mut leg_aux, horizon - total);
        total += steps;
        group.multiply_in_place(&mut x, &d).expect("displacement in group");
        if stopped {
            out.push(StopOutcome::Stopped {
                index: total,
                position: x.clone(),
            });
        } else {
            out.push(StopOutcome::Censored {
                horizon: total,
                position: x,
            });
            break;
        }
    }
    out
}

/// The path and auxiliary streams used for Monte Carlo path `i`.
pub(crate) fn path_streams(rng: &PrngStream, i: usize) -> (PrngStream, PrngStream) {
    (rng.derive(2 * i as u64), rng.derive(2 * i as u64 + 1))
}

/// Runs `legs` iterations of `rule` on path `i`; `None` if censored.
pub(crate) fn sample_legs(
    rule: &StoppingRule,
    sampler: &std::sync::Arc<Sampler>,
    rng: &PrngStream,
    i: usize,
    legs: usize,
    horizon: usize,
) -> Option<(usize, GroupElement)> {
    let (path_rng, aux) = path_streams(rng, i);
    let mut path = SamplePath::lazy(&rule.group, sampler.clone(), path_rng);
    match iterate(rule, &mut path, &aux, legs, horizon).pop()? {
        StopOutcome::Stopped { index, position } => Some((index, position)),
        StopOutcome::Censored { .. } => None,
    }
}

/// Mean stop index over uncensored paths. Path `i` draws increments from
/// `rng.derive(2i)` and auxiliary randomness from `rng.derive(2i + 1)`.
pub fn expectation_estimate(
    rule: &StoppingRule,
    mu: &Measure,
    paths: usize,
    horizon: usize,
    rng: &PrngStream,
) -> Result<Estimate> {
    legs_expectation(rule, mu, 1, paths, horizon, rng)
}

/// Mean of `τ_legs` over uncensored paths.
pub fn legs_expectation(
    rule: &StoppingRule,
    mu: &Measure,
    legs: usize,
    paths: usize,
    horizon: usize,
    rng: &PrngStream,
) -> Result<Estimate> {
    if paths == 0 || horizon == 0 || legs == 0 {
        return Err(Error::Usage(
            "expectation estimate needs paths, horizon and legs >= 1".into(),
        ));
    }
    rule.check_compatible(mu)?;
    let sampler = std::sync::Arc::new(Sampler::new(mu)?);
    let results = per_path(paths, |i| {
        sample_legs(rule, &sampler, rng, i, legs, horizon).map(|(t, _)| t as f64)
    });
    let stopped: Vec<f64> = results.iter().flatten().copied().collect();
    if stopped.is_empty() {
        return Err(Error::AllCensored(paths));
    }
    let censored = (paths - stopped.len()) as f64 / paths as f64;
    let mut est = Estimate::from_samples(&stopped);
    est.censored_mass = censored;
    est.lower_bound = censored > 0.0;
    Ok(est)
}

/// `τ = τ_1 + τ_2 ∘ U^{τ_1}`.
pub fn compose(first: &StoppingRule, second: &StoppingRule) -> Result<StoppingRule> {
    if first.group != second.group {
        return Err(Error::GroupMismatch {
            expected: first.group.kind().to_string(),
            found: second.group.kind().to_string(),
        });
    }
    Ok(StoppingRule::with(
        &first.group,
        RuleKind::Compose(Box::new(first.clone()), Box::new(second.clone())),
    ))
}
