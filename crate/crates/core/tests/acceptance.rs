//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use serde_json::json;
use stopwalk::harness::{self, ExperimentConfig, Verdict};
use stopwalk::measure::convolution_powers;
use stopwalk::transform::transformed_measure_mc;
use stopwalk::walk::{entropy_difference_estimate, green_table};
use stopwalk::{
    convolution_power, entropy, escape_rate_estimate, evaluate, expectation_estimate, generate_path, mix,
    transformed_measure_exact, willis_closed_form, Gauge, GroupDescriptor, Measure, PrngStream, RuleSpec, SamplePath,
    Sampler, StopOutcome,
};

use common::{brute_force_f2_srw_entropy, rule, rules, walk, walks};

const NO_CAP: usize = usize::MAX;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn config(v: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string()).expect("valid acceptance config")
}

fn half_ln3() -> f64 {
    0.5 * 3f64.ln()
}

fn exact_entropies() -> Outcome {
    let f2 = GroupDescriptor::free(2);
    let dirac = Measure::dirac(&f2, f2.parse("ab").unwrap()).unwrap();
    let h0 = entropy(&dirac).unwrap();
    let h4 = entropy(&Measure::simple_random_walk(&f2).unwrap()).unwrap();
    check(
        h0.abs() <= 1e-12 && (h4 - 4f64.ln()).abs() <= 1e-12,
        format!("H(δ) = {h0:e}, H(uniform-4) − ln 4 = {:e}", h4 - 4f64.ln()),
    )
}

fn constant_time_scaling() -> Outcome {
    let mu = walk("f2_srw");
    let (mu2, _) = convolution_power(&mu, 2, NO_CAP).unwrap();
    let left = entropy_difference_estimate(&mu2, 6, NO_CAP).unwrap().estimate.value;
    let right = 2.0 * entropy_difference_estimate(&mu, 12, NO_CAP).unwrap().estimate.value;
    let rel = (left - right).abs() / right;
    check(
        rel <= 0.05,
        format!("h(μ*2) = {left:.6}, 2h(μ) = {right:.6}, relative gap {rel:.4}"),
    )
}

fn f2_baselines() -> Outcome {
    let mu = walk("f2_srw");
    let ell = escape_rate_estimate(&mu, &Gauge::word_length(), 10_000, 500, &PrngStream::new(3, 0)).unwrap();
    let table = entropy_difference_estimate(&mu, 12, NO_CAP).unwrap();
    let h = table.estimate.value;
    // exact tables agree with brute-force word enumeration
    let brute_gap = (1..=8)
        .map(|n| (table.entropies[n] - brute_force_f2_srw_entropy(n)).abs())
        .fold(0.0, f64::max);
    let h_rel = (h / half_ln3() - 1.0).abs();
    check(
        (ell.value - 0.5).abs() <= 0.01 && h_rel <= 0.05 && brute_gap <= 1e-10,
        format!(
            "ℓ = {:.5} ± {:.1e}, h = {h:.5} ({h_rel:.4} from ½ln3), table vs brute force {brute_gap:.1e}",
            ell.value, ell.stderr
        ),
    )
}

fn hitting_even_subgroup() -> Outcome {
    let mu = walk("z_srw");
    let spec = RuleSpec::HittingSubgroup {
        weights: vec![1],
        modulus: 2,
    };
    let r = rule(&mu, &spec);
    let e = expectation_estimate(&r, &mu, 10_000, 1000, &PrngStream::new(4, 0)).unwrap();
    let exact = transformed_measure_exact(&r, &mu, 10, NO_CAP).unwrap();
    let (mu2, _) = convolution_power(&mu, 2, NO_CAP).unwrap();
    let tv = exact.measure.total_variation(&mu2);
    check(
        e.value == 2.0 && e.stderr == 0.0 && tv <= 1e-12,
        format!("E(τ) = {} ± {}, TV(μ_τ, μ*2) = {tv:e}", e.value, e.stderr),
    )
}

fn first_increment_geometric() -> Outcome {
    let mu = walk("z_srw");
    let spec = RuleSpec::FirstIncrementIn {
        set: vec!["(1)".into()],
    };
    let r = rule(&mu, &spec);
    let exact = transformed_measure_exact(&r, &mu, 40, NO_CAP).unwrap();
    let z = mu.group();
    let worst_atom = (1..=30)
        .map(|i: i32| {
            let g = z.parse(&format!("({})", 2 - i)).unwrap();
            (exact.measure.weight(&g) - 2f64.powi(-i)).abs()
        })
        .fold(0.0, f64::max);
    let h = entropy(&exact.measure.normalized().unwrap()).unwrap();
    let bound = harness::run_entropy_bound(&config(json!({
        "experiment": "entropy_bound",
        "group": {"kind": "zd", "dim": 1},
        "measure": {"kind": "simple_random_walk"},
        "rule": spec,
        "params": {"transform_horizon": 40}
    })))
    .unwrap();
    check(
        worst_atom <= 1e-15
            && exact.unresolved_mass <= 2f64.powi(-30)
            && (h - 2.0 * 2f64.ln()).abs() <= 1e-6
            && bound.verdict == Verdict::Pass,
        format!(
            "max atom error {worst_atom:e}, unresolved {:e}, H − 2ln2 = {:e}, bound {} ({:.9} ≤ {:.9})",
            exact.unresolved_mass,
            h - 2.0 * 2f64.ln(),
            bound.verdict,
            bound.left.value,
            bound.right.value
        ),
    )
}

fn escape_wald() -> Outcome {
    let cfg = config(json!({
        "experiment": "escape_scaling",
        "group": {"kind": "zd", "dim": 1},
        "measure": {"kind": "atoms", "atoms": [["(1)", 0.75], ["(-1)", 0.25]]},
        "rule": {"kind": "first_increment_in", "set": ["(1)"]},
        "params": {"n": 1000, "legs": 100, "paths": 100000, "expectation_paths": 100000},
        "seed": 6,
        "tolerance": {"relative": 0.02, "sigma": 3}
    }));
    let r = harness::run_escape_scaling(&cfg).unwrap();
    let oracle = (r.left.value / (2.0 / 3.0) - 1.0).abs();
    check(
        r.verdict == Verdict::Pass && oracle <= 0.02,
        format!(
            "ℓ(μ_τ) = {:.5}, E(τ)ℓ(μ) = {:.5}, ratio {:.4}, gap to 2/3 {oracle:.4}",
            r.left.value, r.right.value, r.ratio
        ),
    )
}

fn green_entropy() -> Outcome {
    let mu = walk("f2_srw");
    let table = green_table(&mu, 3, 200, 100_000, &PrngStream::new(7, 0)).unwrap();
    let group = mu.group();
    // F(g) = 3^{−|g|}
    let worst_sigma = table
        .entries
        .iter()
        .map(|(g, e)| {
            let len = group.word_length(g, 10).unwrap() as f64;
            let f_hat = (-e.value).exp();
            let f = 3f64.powf(-len);
            let sd = (f * (1.0 - f) / 100_000f64).sqrt();
            (f_hat - f).abs() / sd
        })
        .fold(0.0, f64::max);
    let cfg = config(json!({
        "experiment": "green_entropy",
        "group": {"kind": "free", "rank": 2},
        "measure": {"kind": "simple_random_walk"},
        "params": {"n": 10000, "paths": 500, "radius": 3, "hitting_paths": 100000, "hitting_horizon": 200, "n_max": 12},
        "seed": 7
    }));
    let r = harness::run_green_entropy(&cfg).unwrap();
    let rel = (r.left.value / r.right.value - 1.0).abs();
    check(
        rel <= 0.05 && worst_sigma <= 5.0,
        format!(
            "ℓ_Green = {:.5} ± {:.1e}, h = {:.5}, relative gap {rel:.4}, worst F-table deviation {worst_sigma:.2}σ",
            r.left.value, r.left.stderr, r.right.value
        ),
    )
}

fn willis_consistency() -> Outcome {
    let mu = walk("z_srw");
    let z = mu.group();
    let beta = Measure::new(z, [(z.parse("(1)").unwrap(), 0.5)]).unwrap();
    let alpha = Measure::new(z, [(z.parse("(-1)").unwrap(), 0.5)]).unwrap();
    let spec = RuleSpec::Willis {
        alpha: vec![("(-1)".into(), 0.5)],
        beta: vec![("(1)".into(), 0.5)],
    };
    let r = rule(&mu, &spec);
    let closed = willis_closed_form(&beta, &alpha, 60).unwrap();
    let exact = transformed_measure_exact(&r, &mu, 61, NO_CAP).unwrap();
    let tv = closed.measure.total_variation(&exact.measure);
    let paths = 100_000;
    let (mc, censored) = transformed_measure_mc(&r, &mu, paths, 10_000, &PrngStream::new(8, 0)).unwrap();
    let mut worst: f64 = 0.0;
    for (g, p) in exact.measure.atoms().iter().filter(|(_, p)| *p >= 1e-6) {
        let sd = (p * (1.0 - p) / paths as f64).sqrt();
        worst = worst.max((mc.weight(g) - p).abs() / sd);
    }
    let outside = mc
        .atoms()
        .iter()
        .filter(|(g, _)| exact.measure.weight(g) == 0.0)
        .count();
    check(
        tv <= 1e-9 && worst <= 4.0 && outside == 0 && censored == 0.0,
        format!("TV(closed form, automaton) = {tv:e}, worst MC atom {worst:.2}σ, censored {censored}"),
    )
}

fn main_theorem_first_increment() -> Outcome {
    let cfg = config(json!({
        "experiment": "entropy_scaling",
        "group": {"kind": "free", "rank": 2},
        "measure": {"kind": "simple_random_walk"},
        "rule": {"kind": "first_increment_in", "set": ["a"]},
        "params": {"n_max": 12, "n_max_transformed": 5, "expectation_paths": 20000},
        "seed": 9,
        "tolerance": {"relative": 0.10, "sigma": 3}
    }));
    let r = harness::run_entropy_scaling(&cfg).unwrap();
    let ratio = r.ratio_to_base().unwrap();
    let rel = (ratio / 4.0 - 1.0).abs();
    check(
        rel <= 0.10 && r.unresolved_mass <= 1e-8 && r.verdict == Verdict::Pass,
        format!(
            "h(μ_τ) = {:.5}, h(μ) = {:.5}, ratio {ratio:.4}, E(τ) = {:.4}, unresolved {:.1e}, verdict {}",
            r.left.value,
            r.base.unwrap(),
            r.scale.unwrap(),
            r.unresolved_mass,
            r.verdict
        ),
    )
}

fn randomized_mix() -> Outcome {
    let mu = walk("f2_srw");
    let (mu2, _) = convolution_power(&mu, 2, NO_CAP).unwrap();
    let direct = mix(&[(0.5, mu.clone()), (0.5, mu2)]).unwrap();
    let spec = RuleSpec::RandomizedHorizon {
        theta: vec![(1, 0.5), (2, 0.5)],
    };
    let exact = transformed_measure_exact(&rule(&mu, &spec), &mu, 4, NO_CAP).unwrap();
    let tv = exact.measure.total_variation(&direct);
    let r = harness::run_entropy_scaling(&config(json!({
        "experiment": "entropy_scaling",
        "group": {"kind": "free", "rank": 2},
        "measure": {"kind": "simple_random_walk"},
        "rule": spec,
        "params": {"n_max": 12, "n_max_transformed": 6},
        "tolerance": {"relative": 0.10, "sigma": 3}
    })))
    .unwrap();
    let ratio = r.ratio_to_base().unwrap();
    let rel = (ratio / 1.5 - 1.0).abs();
    check(
        rel <= 0.10 && tv <= 1e-12,
        format!("h(μ') / h(μ) = {ratio:.4} ({rel:.4} from 1.5), TV(μ_τ, ½μ + ½μ*2) = {tv:e}"),
    )
}

fn property_suites() -> Outcome {
    let mut violations = Vec::new();
    let mut checks = 0usize;
    for w in walks() {
        let powers: Vec<Measure> = convolution_powers(&w.mu, 12, NO_CAP)
            .unwrap()
            .into_iter()
            .map(|p| p.0)
            .collect();
        let h: Vec<f64> = powers.iter().map(|m| entropy(m).unwrap()).collect();
        for n in 1..=6 {
            for m in 1..=6 {
                checks += 1;
                if h[n + m] > h[n] + h[m] + 1e-9 {
                    violations.push(format!("{}: subadditivity at ({n}, {m})", w.name));
                }
            }
            let group = w.mu.group();
            for (g, pg) in powers[n].atoms() {
                for (x, px) in w.mu.atoms() {
                    checks += 1;
                    if powers[n + 1].weight(&group.multiply(g, x).unwrap()) < pg * px * (1.0 - 1e-12) {
                        violations.push(format!("{}: pointwise bound at n = {n}", w.name));
                    }
                }
            }
        }
        let exponential = matches!(
            w.mu.group().kind(),
            stopwalk::GroupKind::Free { .. } | stopwalk::GroupKind::Lamplighter
        );
        let horizon = if exponential { 4 } else { 40 };
        let sampler = Sampler::new(&w.mu).unwrap();
        for (name, spec) in rules(&w.mu) {
            let r = rule(&w.mu, &spec);
            let single = transformed_measure_exact(&r, &w.mu, horizon, 1 << 22).unwrap();
            let lost = |t: &stopwalk::ExactTransformResult| t.unresolved_mass + t.truncation.dropped_mass;
            let mut composed = spec.clone();
            for n in 2..=3 {
                composed = RuleSpec::Compose {
                    first: Box::new(composed),
                    second: Box::new(spec.clone()),
                };
                let direct = transformed_measure_exact(&rule(&w.mu, &composed), &w.mu, n * horizon, 1 << 22).unwrap();
                let (power, rep) = convolution_power(&single.measure, n, 1 << 22).unwrap();
                let budget = n as f64 * lost(&single) + lost(&direct) + rep.dropped_mass + 1e-12;
                checks += 1;
                if power.total_variation(&direct.measure) > budget {
                    violations.push(format!("{} / {name}: μ_τ{n} ≠ (μ_τ)*{n}", w.name));
                }
            }
            for seed in 0..50u64 {
                let aux = PrngStream::new(seed, 1);
                let mut path = generate_path(&w.mu, 0, PrngStream::new(seed, 0)).unwrap();
                let first = evaluate(&r, &mut path, &mut aux.clone(), 1000);
                let mut replay = generate_path(&w.mu, 0, PrngStream::new(seed, 0)).unwrap();
                checks += 1;
                if evaluate(&r, &mut replay, &mut aux.clone(), 1000) != first {
                    violations.push(format!("{} / {name}: seed {seed} not reproducible", w.name));
                }
                let StopOutcome::Stopped { index, .. } = first else {
                    continue;
                };
                let mut suffix_rng = PrngStream::new(seed, 2);
                let mut incs = path.increments()[..index].to_vec();
                incs.extend((0..1000).map(|_| sampler.sample(&mut suffix_rng).clone()));
                let mut spliced = SamplePath::from_increments(w.mu.group(), incs).unwrap();
                checks += 1;
                if evaluate(&r, &mut spliced, &mut aux.clone(), 1000) != first {
                    violations.push(format!("{} / {name}: splice changed τ at seed {seed}", w.name));
                }
            }
        }
    }
    check(
        violations.is_empty(),
        format!(
            "{checks} checks, {} violations {:?}",
            violations.len(),
            violations.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("exact entropies", exact_entropies),
        ("constant-time entropy scaling on F2", constant_time_scaling),
        ("F2 speed and entropy baselines", f2_baselines),
        ("hitting time of 2Z", hitting_even_subgroup),
        ("first increment in {+1} on Z", first_increment_geometric),
        ("escape scaling against Wald", escape_wald),
        ("Green speed equals entropy on F2", green_entropy),
        ("Willis transform consistency", willis_consistency),
        ("entropy scaling with E(τ) = 4 on F2", main_theorem_first_increment),
        ("randomized scaling by 3/2", randomized_mix),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
