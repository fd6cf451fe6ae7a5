#![allow(dead_code)]

use stopwalk::{GroupDescriptor, Measure, RuleSpec, StoppingRule};

pub struct Walk {
    pub name: &'static str,
    pub mu: Measure,
}

fn atoms(group: &GroupDescriptor, list: &[(&str, f64)]) -> Measure {
    let parsed = list
        .iter()
        .map(|(s, w)| (group.parse(s).unwrap(), *w))
        .collect::<Vec<_>>();
    Measure::new(group, parsed).unwrap()
}

/// Every walk the suites quantify over.
pub fn walks() -> Vec<Walk> {
    let z = GroupDescriptor::zd(1);
    let z2 = GroupDescriptor::zd(2);
    let f2 = GroupDescriptor::free(2);
    let lamp = GroupDescriptor::lamplighter();
    let c5 = GroupDescriptor::cyclic(5);
    vec![
        Walk {
            name: "z_srw",
            mu: Measure::simple_random_walk(&z).unwrap(),
        },
        Walk {
            name: "z_biased",
            mu: atoms(&z, &[("(1)", 0.75), ("(-1)", 0.25)]),
        },
        Walk {
            name: "z_lazy",
            mu: atoms(&z, &[("(-1)", 1.0 / 3.0), ("(0)", 1.0 / 3.0), ("(1)", 1.0 / 3.0)]),
        },
        Walk {
            name: "z2_srw",
            mu: Measure::simple_random_walk(&z2).unwrap(),
        },
        Walk {
            name: "f2_srw",
            mu: Measure::simple_random_walk(&f2).unwrap(),
        },
        Walk {
            name: "lamplighter_srw",
            mu: Measure::simple_random_walk(&lamp).unwrap(),
        },
        Walk {
            name: "c5_srw",
            mu: Measure::simple_random_walk(&c5).unwrap(),
        },
    ]
}

pub fn walk(name: &str) -> Measure {
    walks().into_iter().find(|w| w.name == name).unwrap().mu
}

fn first_generator(mu: &Measure) -> String {
    mu.group().generators()[0].to_string()
}

/// Weights sending every standard generator to an odd residue mod 2, or to
/// `1 mod order` on cyclic groups.
fn parity(group: &GroupDescriptor) -> RuleSpec {
    use stopwalk::GroupKind::*;
    match group.kind() {
        Zd { dim } => RuleSpec::HittingSubgroup {
            weights: vec![1; dim],
            modulus: 2,
        },
        Free { rank } => RuleSpec::HittingSubgroup {
            weights: vec![1; rank],
            modulus: 2,
        },
        Lamplighter => RuleSpec::HittingSubgroup {
            weights: vec![1, 1],
            modulus: 2,
        },
        Cyclic { order } => RuleSpec::HittingSubgroup {
            weights: vec![1],
            modulus: order,
        },
    }
}

/// Rules with finite expectation under every built-in walk.
pub fn rules(mu: &Measure) -> Vec<(String, RuleSpec)> {
    let g = first_generator(mu);
    let beta_weight = mu.weight(&mu.group().parse(&g).unwrap());
    let alpha = mu
        .atoms()
        .iter()
        .filter(|(x, _)| x.to_string() != g)
        .map(|(x, w)| (x.to_string(), *w))
        .collect::<Vec<_>>();
    let first = RuleSpec::FirstIncrementIn { set: vec![g.clone()] };
    vec![
        ("constant_2".into(), RuleSpec::Constant { k: 2 }),
        ("first_increment".into(), first.clone()),
        ("parity".into(), parity(mu.group())),
        (
            "randomized_1_2".into(),
            RuleSpec::RandomizedHorizon {
                theta: vec![(1, 0.5), (2, 0.5)],
            },
        ),
        (
            "willis".into(),
            RuleSpec::Willis {
                alpha,
                beta: vec![(g, beta_weight)],
            },
        ),
        (
            "compose".into(),
            RuleSpec::Compose {
                first: Box::new(RuleSpec::Constant { k: 1 }),
                second: Box::new(first),
            },
        ),
    ]
}

pub fn rule(mu: &Measure, spec: &RuleSpec) -> StoppingRule {
    StoppingRule::build(spec, mu.group()).unwrap()
}

/// `H(μ^{*n})` for F₂ SRW by brute-force word enumeration,
/// independent of the library's convolution.
pub fn brute_force_f2_srw_entropy(n: usize) -> f64 {
    let mut dist: std::collections::HashMap<Vec<u8>, f64> = [(Vec::new(), 1.0)].into_iter().collect();
    for _ in 0..n {
        let mut next = std::collections::HashMap::new();
        for (w, p) in &dist {
            for l in 0u8..4 {
                let mut v = w.clone();
                if v.last() == Some(&(l ^ 1)) {
                    v.pop();
                } else {
                    v.push(l);
                }
                *next.entry(v).or_insert(0.0) += p / 4.0;
            }
        }
        dist = next;
    }
    dist.values().map(|p| -p * p.ln()).sum()
}
