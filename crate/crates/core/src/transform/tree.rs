//! Exact iterated transforms of nearest-neighbour walks on free groups.
//!
//! Each step with increment `t` is marked with probability `r(t)`, and the
//! walk is observed at its `N`-th mark. With `w` counting marks, the
//! first-passage series
//!
//! ```text
//! F_s = step(s) / (1 − Σ_{t≠s} step(t) F_{t⁻¹}),   step(t) = μ(t)((1 − r(t)) + r(t) w)
//! G   = 1 / (1 − Σ_t step(t) F_{t⁻¹})
//! ```
//!
//! give the point mass of `x = x'ℓ` (reduced) as
//!
//! ```text
//! [w^{N−1}] G · Π_{x'} F · (μ(ℓ) r(ℓ) + F_ℓ Σ_{h≠ℓ} μ(h) r(h) F_{h⁻¹})
//! ```
//!
//! and of `e` as `[w^{N−1}] G · Σ_h μ(h) r(h) F_{h⁻¹}`. The series commute,
//! so the mass of a word depends only on how many letters of each class it
//! holds, and the entropy is a sum over class-count vectors weighted by word
//! counts.

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupKind};
use crate::measure::{compensated_sum, Measure};
use crate::stopping::StoppingRule;

/// Truncated power series in the mark variable.
type Series = Vec<f64>;

/// Tree entropy stops once this much mass has been resolved.
pub const RESOLVED_MASS_TARGET: f64 = 1.0 - 1e-12;

const FIXED_POINT_TOLERANCE: f64 = 1e-17;
const FIXED_POINT_ITERATIONS: usize = 1_000_000;

fn mul(a: &[f64], b: &[f64]) -> Series {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b[..n - i].iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 / a`; requires `a[0] ≠ 0`.
fn reciprocal(a: &[f64]) -> Series {
    let n = a.len();
    let mut out = vec![0.0; n];
    out[0] = 1.0 / a[0];
    for k in 1..n {
        let s: f64 = (1..=k).map(|j| a[j] * out[k - j]).sum();
        out[k] = -s / a[0];
    }
    out
}

/// Coefficient `N − 1` of `a · b`.
fn top_coefficient(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    (0..n).map(|i| a[i] * b[n - 1 - i]).sum()
}

/// Step law and marking probabilities of a nearest-neighbour walk on `F_k`,
/// indexed by letter code (`2i` is the `i`-th generator, `2i + 1` its
/// inverse).
#[derive(Clone, Debug, PartialEq)]
pub struct MarkingRule {
    rank: usize,
    mu: Vec<f64>,
    mark: Vec<f64>,
    marks: usize,
}

impl MarkingRule {
    pub fn new(rank: usize, mu: Vec<f64>, mark: Vec<f64>, marks: usize) -> Result<Self> {
        if mu.len() != 2 * rank || mark.len() != 2 * rank {
            return Err(Error::Usage(format!(
                "marking rule on F{rank} needs {} letter weights",
                2 * rank
            )));
        }
        if marks == 0 {
            return Err(Error::Usage("marking rule needs at least one mark".into()));
        }
        if mu.iter().any(|p| !(*p >= 0.0)) || mark.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Usage(
                "letter weights must be nonnegative and marks in [0, 1]".into(),
            ));
        }
        if (compensated_sum(mu.iter().copied()) - 1.0).abs() > 1e-9 {
            return Err(Error::NotProbability(mu.iter().sum()));
        }
        let generators = (0..rank).filter(|i| mu[2 * i] + mu[2 * i + 1] > 0.0).count();
        if generators < 2 {
            return Err(Error::Usage(
                "tree engine needs steps along at least two generators".into(),
            ));
        }
        if mu.iter().zip(&mark).all(|(p, r)| p * r == 0.0) {
            return Err(Error::Usage("no step is ever marked".into()));
        }
        Ok(MarkingRule { rank, mu, mark, marks })
    }

    /// The marking form of `rule` driven by `mu`, when one exists: `mu` must
    /// be supported on single letters of a free group of rank at least two,
    /// and the rule must stop at a fixed number of independently marked steps.
    pub fn from_rule(rule: &StoppingRule, mu: &Measure) -> Option<Self> {
        let GroupKind::Free { rank } = mu.group().kind() else {
            return None;
        };
        if !mu.is_probability() || rule.check_compatible(mu).is_err() {
            return None;
        }
        let (profile, marks) = rule.mark_profile(mu)?;
        let mut weights = vec![0.0; 2 * rank];
        let mut mark = vec![0.0; 2 * rank];
        for ((g, p), (g2, r)) in mu.atoms().iter().zip(&profile) {
            debug_assert_eq!(g, g2);
            let word = g.as_free()?;
            if word.len() != 1 {
                return None;
            }
            weights[word[0] as usize] = *p;
            mark[word[0] as usize] = *r;
        }
        MarkingRule::new(rank, weights, mark, marks).ok()
    }

    pub fn marks(&self) -> usize {
        self.marks
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Exact entropy of the law at the `N`-th mark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeEntropy {
    pub entropy: f64,
    pub resolved_mass: f64,
    /// Longest word length enumerated.
    pub max_length: usize,
}

/// Law of the walk at its `N`-th mark, `N = legs · marks`.
#[derive(Clone, Debug)]
pub struct TreeTransform {
    letters: usize,
    f: Vec<Series>,
    g: Series,
    /// Series completing `G · Π_{x'} F` for a word ending in each letter.
    tails: Vec<Series>,
    identity: Series,
    class_of: Vec<usize>,
    class_rep: Vec<usize>,
}

impl TreeTransform {
    pub fn new(rule: &MarkingRule, legs: usize) -> Result<Self> {
        if legs == 0 {
            return Err(Error::Usage("tree transform needs legs >= 1".into()));
        }
        let n = legs * rule.marks;
        let letters = 2 * rule.rank;
        let steps: Vec<Series> = (0..letters)
            .map(|t| {
                let mut s = vec![0.0; n];
                s[0] = rule.mu[t] * (1.0 - rule.mark[t]);
                if n > 1 {
                    s[1] = rule.mu[t] * rule.mark[t];
                }
                s
            })
            .collect();
        let mut f: Vec<Series> = vec![vec![0.0; n]; letters];
        let mut converged = false;
        for _ in 0..FIXED_POINT_ITERATIONS {
            let next: Vec<Series> = (0..letters)
                .map(|s| {
                    let mut den = vec![0.0; n];
                    den[0] = 1.0;
                    for t in (0..letters).filter(|&t| t != s) {
                        for (d, v) in den.iter_mut().zip(mul(&steps[t], &f[t ^ 1])) {
                            *d -= v;
                        }
                    }
                    mul(&steps[s], &reciprocal(&den))
                })
                .collect();
            let diff = next
                .iter()
                .zip(&f)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            f = next;
            if diff <= FIXED_POINT_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Usage("first-passage series did not converge".into()));
        }
        let mut den = vec![0.0; n];
        den[0] = 1.0;
        for t in 0..letters {
            for (d, v) in den.iter_mut().zip(mul(&steps[t], &f[t ^ 1])) {
                *d -= v;
            }
        }
        if !(den[0] > 0.0) {
            return Err(Error::Usage("walk is not transient".into()));
        }
        let g = reciprocal(&den);
        let marked: Vec<Series> = (0..letters)
            .map(|h| f[h ^ 1].iter().map(|v| v * rule.mu[h] * rule.mark[h]).collect())
            .collect();
        let mut inner = vec![0.0; n];
        for m in &marked {
            for (a, b) in inner.iter_mut().zip(m) {
                *a += b;
            }
        }
        let tails = (0..letters)
            .map(|l| {
                let others: Series = inner.iter().zip(&marked[l]).map(|(a, b)| a - b).collect();
                let mut tail = mul(&f[l], &others);
                tail[0] += rule.mu[l] * rule.mark[l];
                mul(&g, &tail)
            })
            .collect();
        let identity = mul(&g, &inner);
        let mut class_of = vec![0; letters];
        let mut class_rep: Vec<usize> = Vec::new();
        for l in 0..letters {
            let same = class_rep.iter().position(|&c| {
                f[c].iter()
                    .zip(&f[l])
                    .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()))
            });
            class_of[l] = match same {
                Some(i) => i,
                None => {
                    class_rep.push(l);
                    class_rep.len() - 1
                }
            };
        }
        Ok(TreeTransform {
            letters,
            f,
            g,
            tails,
            identity,
            class_of,
            class_rep,
        })
    }

    /// First-passage series to the letter with code `l`.
    pub fn first_passage(&self, l: u8) -> &[f64] {
        &self.f[l as usize]
    }

    /// Green series at the identity.
    pub fn green(&self) -> &[f64] {
        &self.g
    }

    /// Point mass of `x`.
    pub fn probability(&self, x: &GroupElement) -> Result<f64> {
        let word = x
            .as_free()
            .ok_or_else(|| Error::InvalidElement(format!("{x} is not a free-group word")))?;
        if let Some(&l) = word.iter().find(|&&l| l as usize >= self.letters) {
            return Err(Error::InvalidElement(format!(
                "letter code {l} outside the tree's rank"
            )));
        }
        let Some((&last, prefix)) = word.split_last() else {
            return Ok(self.identity[self.identity.len() - 1]);
        };
        let mut base = vec![0.0; self.g.len()];
        base[0] = 1.0;
        for &l in prefix {
            base = mul(&base, &self.f[l as usize]);
        }
        Ok(top_coefficient(&base, &self.tails[last as usize]))
    }

    /// Exact entropy, enumerating words by length until the resolved mass
    /// reaches [`RESOLVED_MASS_TARGET`] or `max_length` is passed.
    pub fn entropy(&self, max_length: usize) -> TreeEntropy {
        let n = self.g.len();
        let classes = self.class_rep.len();
        let p_e = self.identity[n - 1];
        let mut h_layers = vec![if p_e > 0.0 { -p_e * p_e.ln() } else { 0.0 }];
        let mut mass_layers = vec![p_e];
        let mut mass = p_e;

        type Counts = SmallVec<[u16; 4]>;
        let mut unit = vec![0.0; n];
        unit[0] = 1.0;
        let mut polys: FxHashMap<Counts, Series> = FxHashMap::default();
        polys.insert(SmallVec::from_elem(0, classes), unit);
        // (class counts of x', last letter) → number of such words
        let mut layer: Vec<((Counts, u8), f64)> = vec![((SmallVec::from_elem(0, classes), u8::MAX), 1.0)];
        let mut length = 0;
        while !layer.is_empty() && mass < RESOLVED_MASS_TARGET && length < max_length {
            length += 1;
            let mut next: FxHashMap<(Counts, u8), f64> = FxHashMap::default();
            let mut next_polys: FxHashMap<Counts, Series> = FxHashMap::default();
            let mut h_terms = Vec::new();
            let mut m_terms = Vec::new();
            for ((counts, last), words) in &layer {
                let base = &polys[counts];
                for l in 0..self.letters {
                    if *last != u8::MAX && l == (*last ^ 1) as usize {
                        continue;
                    }
                    let p = top_coefficient(base, &self.tails[l]);
                    if p > 0.0 {
                        h_terms.push(-words * p * p.ln());
                        m_terms.push(words * p);
                    }
                    let mut c = counts.clone();
                    c[self.class_of[l]] += 1;
                    let poly = next_polys
                        .entry(c.clone())
                        .or_insert_with(|| mul(base, &self.f[self.class_rep[self.class_of[l]]]));
                    if poly.iter().any(|v| *v != 0.0) {
                        *next.entry((c, l as u8)).or_insert(0.0) += words;
                    }
                }
            }
            let layer_mass = compensated_sum(m_terms);
            mass += layer_mass;
            mass_layers.push(layer_mass);
            h_layers.push(compensated_sum(h_terms));
            let mut entries: Vec<_> = next.into_iter().collect();
            entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            layer = entries;
            polys = next_polys;
        }
        TreeEntropy {
            entropy: compensated_sum(h_layers),
            resolved_mass: compensated_sum(mass_layers),
            max_length: length,
        }
    }
}
