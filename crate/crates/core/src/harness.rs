//! Experiment configs, verification reports and the experiments that check
//! the scaling laws `h(μ_τ) = E(τ) h(μ)` and `ℓ(μ_τ) = E(τ) ℓ(μ)` end to end.
//!
//! Verdicts are three-valued: a blown truncation or censoring budget yields
//! [`Verdict::Inconclusive`], never a failure.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Gauge, GroupDescriptor};
use crate::measure::{convolution_power, entropy, mix, Measure, Sampler};
use crate::rng::PrngStream;
use crate::stopping::{expectation_estimate, sample_legs, RuleSpec, StoppingRule};
use crate::transform::transformed_measure_exact;
use crate::transform::tree::{MarkingRule, TreeTransform};
use crate::walk::{
    entropy_difference_estimate, escape_rate_estimate, from_entropies, green_table, per_path, EntropyDifferences,
    Estimate,
};

/// Largest unresolved or censored mass an experiment accepts as conclusive.
pub const MASS_BUDGET: f64 = 1e-8;

/// Censored fraction above which a Monte Carlo expectation is inconclusive.
pub const CENSOR_BUDGET: f64 = 1e-4;

/// Smallest Green-table hitting frequency that flags a recurrent walk.
pub const RECURRENCE_THRESHOLD: f64 = 0.75;

/// Word length cap for the tree entropy enumeration.
pub const TREE_MAX_LENGTH: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Uniform on the group's generators.
    SimpleRandomWalk,
    Atoms {
        atoms: Vec<(String, f64)>,
    },
    Uniform {
        elements: Vec<String>,
    },
    Mix {
        components: Vec<(f64, MeasureSpec)>,
    },
    Power {
        base: Box<MeasureSpec>,
        n: usize,
    },
}

impl MeasureSpec {
    pub fn build(&self, group: &GroupDescriptor) -> Result<Measure> {
        match self {
            MeasureSpec::SimpleRandomWalk => Measure::simple_random_walk(group),
            MeasureSpec::Atoms { atoms } => {
                let parsed = atoms
                    .iter()
                    .map(|(s, w)| Ok((group.parse(s)?, *w)))
                    .collect::<Result<Vec<_>>>()?;
                Measure::new(group, parsed)
            }
            MeasureSpec::Uniform { elements } => Measure::uniform(
                group,
                elements.iter().map(|s| group.parse(s)).collect::<Result<Vec<_>>>()?,
            ),
            MeasureSpec::Mix { components } => {
                let built = components
                    .iter()
                    .map(|(w, m)| Ok((*w, m.build(group)?)))
                    .collect::<Result<Vec<_>>>()?;
                mix(&built)
            }
            MeasureSpec::Power { base, n } => {
                let (m, report) = convolution_power(&base.build(group)?, *n, usize::MAX)?;
                debug_assert_eq!(report.dropped_mass, 0.0);
                Ok(m)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    WordLength,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    EntropyScaling,
    EscapeScaling,
    EntropyBound,
    GreenEntropy,
    KacCheck,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::EntropyScaling => "entropy_scaling",
            Experiment::EscapeScaling => "escape_scaling",
            Experiment::EntropyBound => "entropy_bound",
            Experiment::GreenEntropy => "green_entropy",
            Experiment::KacCheck => "kac_check",
        };
        f.write_str(s)
    }
}

/// Numeric knobs. Every field must be positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Walk length for escape-rate estimates of `μ`.
    pub n: usize,
    /// Exact entropy horizon for `μ`.
    pub n_max: usize,
    /// Exact entropy horizon for `μ_τ`.
    pub n_max_transformed: usize,
    /// Iterations of `τ` per path for escape-rate estimates of `μ_τ`.
    pub legs: usize,
    /// Paths for escape-rate estimates.
    pub paths: usize,
    /// Paths for `E(τ)`.
    pub expectation_paths: usize,
    /// Censoring horizon for stopping-rule evaluation, in total steps.
    pub horizon: usize,
    /// Horizon of the exact transform.
    pub transform_horizon: usize,
    pub support_cap: usize,
    /// Green gauge radius, in steps of the walk.
    pub radius: usize,
    pub hitting_paths: usize,
    pub hitting_horizon: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            n: 10_000,
            n_max: 12,
            n_max_transformed: 6,
            legs: 100,
            paths: 500,
            expectation_paths: 20_000,
            horizon: 1_000_000,
            transform_horizon: 200,
            support_cap: 4_000_000,
            radius: 3,
            hitting_paths: 100_000,
            hitting_horizon: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub relative: f64,
    pub sigma: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            relative: 0.05,
            sigma: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub group: GroupDescriptor,
    pub measure: MeasureSpec,
    #[serde(default = "default_measure_id")]
    pub measure_id: String,
    #[serde(default)]
    pub rule: Option<RuleSpec>,
    #[serde(default)]
    pub gauge: Option<GaugeSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerance: Tolerance,
}

fn default_measure_id() -> String {
    "mu".into()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the field-level invariants.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let fields = [
            ("n", p.n),
            ("n_max", p.n_max),
            ("n_max_transformed", p.n_max_transformed),
            ("legs", p.legs),
            ("paths", p.paths),
            ("expectation_paths", p.expectation_paths),
            ("horizon", p.horizon),
            ("transform_horizon", p.transform_horizon),
            ("support_cap", p.support_cap),
            ("radius", p.radius),
            ("hitting_paths", p.hitting_paths),
            ("hitting_horizon", p.hitting_horizon),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Usage(format!("config field params.{name} must be positive")));
        }
        let t = &self.tolerance;
        if !(t.relative > 0.0 && t.relative < 1.0) {
            return Err(Error::Usage(format!(
                "config field tolerance.relative = {} must lie in (0, 1)",
                t.relative
            )));
        }
        if !(t.sigma > 0.0 && t.sigma.is_finite()) {
            return Err(Error::Usage(format!(
                "config field tolerance.sigma = {} must be positive",
                t.sigma
            )));
        }
        let needs_rule = !matches!(self.experiment, Experiment::GreenEntropy);
        if needs_rule && self.rule.is_none() {
            return Err(Error::Usage(format!(
                "config field rule is required for {}",
                self.experiment
            )));
        }
        Ok(())
    }

    pub fn build_measure(&self) -> Result<Measure> {
        self.measure.build(&self.group)
    }

    pub fn build_rule(&self) -> Result<StoppingRule> {
        let spec = self
            .rule
            .as_ref()
            .ok_or_else(|| Error::Usage("config field rule is required".into()))?;
        StoppingRule::build(spec, &self.group)
    }

    fn rng(&self) -> PrngStream {
        PrngStream::new(self.seed, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// How left and right are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|left − right| ≤ max(relative·|right|, sigma·√(sL² + sR²))`.
    TwoSided,
    /// `left ≤ right + 1e−9`.
    UpperBound,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::TwoSided => "two_sided",
            Comparison::UpperBound => "upper_bound",
        })
    }
}

/// Slack of the one-sided comparison.
pub const UPPER_BOUND_SLACK: f64 = 1e-9;

/// Applies `comparison` to the two estimates.
pub fn decide(comparison: Comparison, left: &Estimate, right: &Estimate, tolerance: &Tolerance) -> Verdict {
    if !(left.value.is_finite() && right.value.is_finite()) {
        return Verdict::Inconclusive;
    }
    let ok = match comparison {
        Comparison::TwoSided => {
            let combined = left.stderr.hypot(right.stderr);
            (left.value - right.value).abs() <= (tolerance.relative * right.value.abs()).max(tolerance.sigma * combined)
        }
        Comparison::UpperBound => left.value <= right.value + UPPER_BOUND_SLACK,
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment: Experiment,
    pub group: String,
    pub measure_id: String,
    pub rule: String,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    pub left: Estimate,
    pub right: Estimate,
    /// `left / right`.
    pub ratio: f64,
    /// Untransformed quantity on the right, `h(μ)` or `ℓ(μ)`, when present.
    pub base: Option<f64>,
    /// `E(τ)` or the subgroup index, when present.
    pub scale: Option<f64>,
    pub censored_mass: f64,
    pub unresolved_mass: f64,
    pub comparison: Comparison,
    pub tolerance: Tolerance,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(cfg: &ExperimentConfig, n: usize, paths: usize, comparison: Comparison) -> Self {
        VerificationReport {
            experiment: cfg.experiment,
            group: cfg.group.kind().to_string(),
            measure_id: cfg.measure_id.clone(),
            rule: cfg
                .rule
                .as_ref()
                .map(|r| serde_json::to_string(r).expect("rule spec serializes"))
                .unwrap_or_default(),
            n,
            paths,
            seed: cfg.seed,
            left: Estimate::exact(f64::NAN),
            right: Estimate::exact(f64::NAN),
            ratio: f64::NAN,
            base: None,
            scale: None,
            censored_mass: 0.0,
            unresolved_mass: 0.0,
            comparison,
            tolerance: cfg.tolerance,
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
        }
    }

    fn finish(mut self, left: Estimate, right: Estimate) -> Self {
        self.ratio = left.value / right.value;
        self.left = left;
        self.right = right;
        self.verdict = decide(self.comparison, &left, &right, &self.tolerance);
        self
    }

    fn inconclusive(mut self, note: impl Into<String>) -> Self {
        self.verdict = Verdict::Inconclusive;
        self.notes.push(note.into());
        self
    }

    /// `left / base`, the transformed quantity relative to the untransformed.
    pub fn ratio_to_base(&self) -> Option<f64> {
        self.base.map(|b| self.left.value / b)
    }

    /// Recomputes the verdict from the fields a CSV row carries.
    pub fn recomputed_verdict(&self) -> Verdict {
        if !self.notes.is_empty() && self.verdict == Verdict::Inconclusive {
            return Verdict::Inconclusive;
        }
        decide(self.comparison, &self.left, &self.right, &self.tolerance)
    }

    /// One-line summary for the terminal.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} {} {} left={:.6}±{:.2e} right={:.6}±{:.2e} ratio={:.6}",
            self.verdict,
            self.experiment,
            self.measure_id,
            self.left.value,
            self.left.stderr,
            self.right.value,
            self.right.stderr,
            self.ratio
        );
        if let Some(r) = self.ratio_to_base() {
            s.push_str(&format!(" left/base={r:.6}"));
        }
        for note in &self.notes {
            s.push_str(&format!(" [{note}]"));
        }
        s
    }
}

/// CSV header: the documented columns, then the tolerance and comparison
/// needed to recompute the verdict.
pub const CSV_HEADER: [&str; 18] = [
    "experiment",
    "group",
    "measure_id",
    "rule",
    "n",
    "paths",
    "seed",
    "left",
    "left_stderr",
    "right",
    "right_stderr",
    "ratio",
    "censored_mass",
    "unresolved_mass",
    "verdict",
    "rel_tolerance",
    "sigma_multiplier",
    "comparison",
];

/// Writes reports as CSV with [`CSV_HEADER`].
pub fn write_csv<W: Write>(out: W, reports: &[VerificationReport]) -> Result<()> {
    let io = |e: csv::Error| Error::Usage(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in reports {
        w.write_record([
            r.experiment.to_string(),
            r.group.clone(),
            r.measure_id.clone(),
            r.rule.clone(),
            r.n.to_string(),
            r.paths.to_string(),
            r.seed.to_string(),
            r.left.value.to_string(),
            r.left.stderr.to_string(),
            r.right.value.to_string(),
            r.right.stderr.to_string(),
            r.ratio.to_string(),
            r.censored_mass.to_string(),
            r.unresolved_mass.to_string(),
            r.verdict.to_string(),
            r.tolerance.relative.to_string(),
            r.tolerance.sigma.to_string(),
            r.comparison.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Usage(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Errors that mean a budget was exceeded rather than a bad request.
fn is_budget(e: &Error) -> bool {
    matches!(
        e,
        Error::Truncation { .. }
            | Error::AllCensored(_)
            | Error::VisitedAtomDropped(_)
            | Error::ZeroHittingFrequency(_)
    )
}

macro_rules! budget {
    ($report:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) if is_budget(&err) => return Ok($report.inconclusive(err.to_string())),
            Err(err) => return Err(err),
        }
    };
}

/// `h(μ_τ)` from exact entropies of `(μ_τ)^{*n}`, `n ≤ n_max`.
#[derive(Clone, Debug)]
pub struct TransformedEntropy {
    pub differences: EntropyDifferences,
    pub unresolved_mass: f64,
    pub method: &'static str,
}

/// Exact entropy sequence of the iterated transform. Uses the free-group
/// tree engine for marking rules with an unbounded stop time, and exact
/// tables of the transformed measure otherwise.
pub fn transformed_entropy(rule: &StoppingRule, mu: &Measure, p: &Params) -> Result<TransformedEntropy> {
    if rule.constant_steps().is_none() {
        if let Some(marking) = MarkingRule::from_rule(rule, mu) {
            let mut entropies = vec![0.0];
            let mut unresolved: f64 = 0.0;
            for legs in 1..=p.n_max_transformed {
                let te = TreeTransform::new(&marking, legs)?.entropy(TREE_MAX_LENGTH);
                unresolved = unresolved.max(1.0 - te.resolved_mass);
                entropies.push(te.entropy);
            }
            if unresolved > MASS_BUDGET {
                return Err(Error::Truncation {
                    dropped: unresolved,
                    allowed: MASS_BUDGET,
                });
            }
            return Ok(TransformedEntropy {
                differences: from_entropies(entropies, 0.0),
                unresolved_mass: unresolved.max(0.0),
                method: "tree",
            });
        }
    }
    let exact = transformed_measure_exact(rule, mu, p.transform_horizon, p.support_cap)?;
    let lost = exact.unresolved_mass + exact.truncation.dropped_mass;
    if lost > MASS_BUDGET {
        return Err(Error::Truncation {
            dropped: lost,
            allowed: MASS_BUDGET,
        });
    }
    let normalized = exact.measure.normalized()?;
    Ok(TransformedEntropy {
        differences: entropy_difference_estimate(&normalized, p.n_max_transformed, p.support_cap)?,
        unresolved_mass: lost,
        method: "tables",
    })
}

fn expectation(cfg: &ExperimentConfig, rule: &StoppingRule, mu: &Measure, stream: u64) -> Result<Estimate> {
    if let Some(k) = rule.constant_steps() {
        return Ok(Estimate::exact(k as f64));
    }
    let p = &cfg.params;
    expectation_estimate(rule, mu, p.expectation_paths, p.horizon, &cfg.rng().derive(stream))
}

/// `h(μ_τ)` against `E(τ)·h(μ)`.
pub fn run_entropy_scaling(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let mu = cfg.build_measure()?;
    let rule = cfg.build_rule()?;
    rule.check_compatible(&mu)?;
    let p = &cfg.params;
    let mut report = VerificationReport::new(cfg, p.n_max, p.expectation_paths, Comparison::TwoSided);
    let h = budget!(report, entropy_difference_estimate(&mu, p.n_max, p.support_cap));
    let e_tau = budget!(report, expectation(cfg, &rule, &mu, 1));
    report.censored_mass = e_tau.censored_mass;
    report.base = Some(h.estimate.value);
    report.scale = Some(e_tau.value);
    let left = budget!(report, transformed_entropy(&rule, &mu, p));
    report.unresolved_mass = left.unresolved_mass;
    report.notes.clear();
    let report = report.finish(left.differences.estimate, e_tau.times(h.estimate));
    if e_tau.censored_mass > CENSOR_BUDGET {
        return Ok(report.inconclusive(format!("censored mass {:e} in E(τ)", e_tau.censored_mass)));
    }
    Ok(report)
}

fn build_gauge(cfg: &ExperimentConfig) -> Gauge {
    match cfg.gauge {
        Some(GaugeSpec::WordLength) | None => Gauge::word_length(),
    }
}

/// `ℓ(μ_τ)`, sampled by iterating the rule, against `E(τ)·ℓ(μ)`.
pub fn run_escape_scaling(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let mu = cfg.build_measure()?;
    let rule = cfg.build_rule()?;
    rule.check_compatible(&mu)?;
    let gauge = build_gauge(cfg);
    if !gauge.is_subadditive() {
        return Err(Error::Usage("escape scaling needs a subadditive gauge".into()));
    }
    let p = &cfg.params;
    let rng = cfg.rng();
    let mut report = VerificationReport::new(cfg, p.legs, p.paths, Comparison::TwoSided);
    let ell = escape_rate_estimate(&mu, &gauge, p.n, p.paths, &rng.derive(0))?;
    let e_tau = budget!(report, expectation(cfg, &rule, &mu, 1));
    let sampler = Arc::new(Sampler::new(&mu)?);
    let left_rng = rng.derive(2);
    let ends = per_path(p.paths, |i| {
        sample_legs(&rule, &sampler, &left_rng, i, p.legs, p.horizon)
    });
    let mut values = Vec::with_capacity(p.paths);
    for end in ends.into_iter().flatten() {
        values.push(gauge.value(&cfg.group, &end.1)? / p.legs as f64);
    }
    if values.is_empty() {
        return Ok(report.inconclusive(Error::AllCensored(p.paths).to_string()));
    }
    let mut left = Estimate::from_samples(&values);
    left.censored_mass = 1.0 - values.len() as f64 / p.paths as f64;
    left.lower_bound = left.censored_mass > 0.0;
    report.censored_mass = left.censored_mass.max(e_tau.censored_mass);
    report.base = Some(ell.value);
    report.scale = Some(e_tau.value);
    let report = report.finish(left, e_tau.times(ell));
    if report.censored_mass > CENSOR_BUDGET {
        let note = format!("censored mass {:e}", report.censored_mass);
        return Ok(report.inconclusive(note));
    }
    Ok(report)
}

/// `H(μ_τ) ≤ E(τ)·H(μ)` for deterministic rules, with the exact transform.
pub fn run_entropy_bound(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let mu = cfg.build_measure()?;
    let rule = cfg.build_rule()?;
    if rule.is_randomized() {
        return Err(Error::Usage(
            "entropy_bound covers deterministic stopping rules only; randomized rules can exceed E(τ)·H(μ)".into(),
        ));
    }
    rule.check_compatible(&mu)?;
    let p = &cfg.params;
    let mut report = VerificationReport::new(cfg, p.transform_horizon, 0, Comparison::UpperBound);
    let h1 = entropy(&mu)?;
    let exact = budget!(
        report,
        transformed_measure_exact(&rule, &mu, p.transform_horizon, p.support_cap)
    );
    let lost = exact.unresolved_mass + exact.truncation.dropped_mass;
    report.unresolved_mass = lost;
    let (core, _) = exact.entropy_interval(h1)?;
    let e_tau = exact.resolved_expectation();
    let budget_term = lost * exact.stopped_by_step.len() as f64 * h1;
    report.base = Some(h1);
    report.scale = Some(e_tau);
    let report = report.finish(Estimate::exact(core), Estimate::exact(e_tau * h1 + budget_term));
    if lost > MASS_BUDGET {
        let note = format!("unresolved mass {lost:e}");
        return Ok(report.inconclusive(note));
    }
    Ok(report)
}

/// Rate of escape in the Green gauge against `h(μ)`.
pub fn run_green_entropy(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let mu = cfg.build_measure()?;
    let p = &cfg.params;
    let rng = cfg.rng();
    let mut report = VerificationReport::new(cfg, p.n, p.hitting_paths, Comparison::TwoSided);
    let table = budget!(
        report,
        green_table(&mu, p.radius, p.hitting_horizon, p.hitting_paths, &rng.derive(0))
    );
    if table.min_frequency() >= RECURRENCE_THRESHOLD {
        return Ok(report.inconclusive(format!(
            "walk looks recurrent: every hitting frequency within radius {} is at least {}",
            p.radius, RECURRENCE_THRESHOLD
        )));
    }
    let gauge = table.gauge(&cfg.group)?;
    let mut left = budget!(report, escape_rate_estimate(&mu, &gauge, p.n, p.paths, &rng.derive(1)));
    // relative error of the table carries over to every chained value
    let table_rel = table
        .entries
        .iter()
        .filter(|(_, e)| e.value > 0.0)
        .map(|(_, e)| e.stderr / e.value)
        .fold(0.0, f64::max);
    left.stderr = left.stderr.hypot(left.value * table_rel);
    left.censored_mass = table.entries.iter().map(|(_, e)| e.censored_mass).fold(0.0, f64::max);
    let h = budget!(report, entropy_difference_estimate(&mu, p.n_max, p.support_cap));
    report.base = Some(h.estimate.value);
    Ok(report.finish(left, h.estimate))
}

/// `E(τ)` of a subgroup hitting time against the subgroup index.
pub fn run_kac_check(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let mu = cfg.build_measure()?;
    let rule = cfg.build_rule()?;
    let phi = rule
        .subgroup()
        .ok_or_else(|| Error::Usage("kac_check needs a hitting_subgroup rule".into()))?;
    let index = phi.index();
    let m = phi.modulus();
    let mut reached = vec![false; m as usize];
    let mut stack = vec![0u64];
    reached[0] = true;
    while let Some(c) = stack.pop() {
        for g in mu.support() {
            let d = ((c + phi.apply(g)) % m) as usize;
            if !reached[d] {
                reached[d] = true;
                stack.push(d as u64);
            }
        }
    }
    if (reached.iter().filter(|r| **r).count() as u64) < index {
        return Err(Error::Usage("the induced coset chain is not irreducible".into()));
    }
    let p = &cfg.params;
    let mut report = VerificationReport::new(cfg, 1, p.expectation_paths, Comparison::TwoSided);
    let e_tau = budget!(report, expectation(cfg, &rule, &mu, 1));
    report.censored_mass = e_tau.censored_mass;
    report.scale = Some(index as f64);
    let report = report.finish(e_tau, Estimate::exact(index as f64));
    if e_tau.censored_mass > CENSOR_BUDGET {
        let note = format!("censored mass {:e}", e_tau.censored_mass);
        return Ok(report.inconclusive(note));
    }
    Ok(report)
}

/// Runs the experiment named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    match cfg.experiment {
        Experiment::EntropyScaling => run_entropy_scaling(cfg),
        Experiment::EscapeScaling => run_escape_scaling(cfg),
        Experiment::EntropyBound => run_entropy_bound(cfg),
        Experiment::GreenEntropy => run_green_entropy(cfg),
        Experiment::KacCheck => run_kac_check(cfg),
    }
}
