//! Concrete countable groups: `Z^d`, free groups, the lamplighter group
//! `Z_2 wr Z`, and finite cyclic groups.
//!
//! Elements are kept in canonical form at all times, so structural equality,
//! hashing and the derived ordering are all well defined. The text encoding
//! produced by `Display` is bit-exact round-trippable through
//! [`GroupDescriptor::parse`].

use std::collections::VecDeque;
use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Default radius cap for breadth-first word-length computations.
pub const DEFAULT_BFS_RADIUS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    /// Free abelian group of rank `dim`.
    Zd { dim: usize },
    /// Free group on `rank` letters (`a`, `b`, ...; inverses upper case).
    Free { rank: usize },
    /// `Z_2 wr Z`: finitely many lit lamps on `Z` and a marker position.
    Lamplighter,
    /// `Z/nZ`.
    Cyclic { order: u64 },
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Zd { dim } => write!(f, "Z^{dim}"),
            GroupKind::Free { rank } => write!(f, "F{rank}"),
            GroupKind::Lamplighter => write!(f, "Lamplighter"),
            GroupKind::Cyclic { order } => write!(f, "Z/{order}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Repr {
    Zd(SmallVec<[i64; 3]>),
    /// Letter `2i` is the `i`-th generator, `2i + 1` its inverse.
    Free(SmallVec<[u8; 24]>),
    Lamp {
        lit: SmallVec<[i64; 3]>,
        pos: i64,
    },
    Cyclic {
        residue: u64,
        order: u64,
    },
}

/// An element of one of the supported groups, always in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(Repr);

impl GroupElement {
    pub fn zd(coords: impl IntoIterator<Item = i64>) -> Self {
        GroupElement(Repr::Zd(coords.into_iter().collect()))
    }

    /// Builds a free-group element from letter codes, reducing as it goes.
    pub fn free(letters: impl IntoIterator<Item = u8>) -> Self {
        let mut word: SmallVec<[u8; 24]> = SmallVec::new();
        for l in letters {
            push_letter(&mut word, l);
        }
        GroupElement(Repr::Free(word))
    }

    /// Lamp positions are toggled in order, so repeated positions cancel.
    pub fn lamplighter(lit: impl IntoIterator<Item = i64>, pos: i64) -> Self {
        let mut lamps: SmallVec<[i64; 3]> = lit.into_iter().collect();
        lamps.sort_unstable();
        let mut out: SmallVec<[i64; 3]> = SmallVec::new();
        let mut i = 0;
        while i < lamps.len() {
            let mut j = i;
            while j < lamps.len() && lamps[j] == lamps[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                out.push(lamps[i]);
            }
            i = j;
        }
        GroupElement(Repr::Lamp { lit: out, pos })
    }

    pub fn cyclic(residue: i64, order: u64) -> Self {
        let n = order as i64;
        GroupElement(Repr::Cyclic {
            residue: residue.rem_euclid(n) as u64,
            order,
        })
    }

    pub fn as_zd(&self) -> Option<&[i64]> {
        match &self.0 {
            Repr::Zd(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_free(&self) -> Option<&[u8]> {
        match &self.0 {
            Repr::Free(w) => Some(w),
            _ => None,
        }
    }

    pub fn as_lamplighter(&self) -> Option<(&[i64], i64)> {
        match &self.0 {
            Repr::Lamp { lit, pos } => Some((lit, *pos)),
            _ => None,
        }
    }

    pub fn as_cyclic(&self) -> Option<u64> {
        match &self.0 {
            Repr::Cyclic { residue, .. } => Some(*residue),
            _ => None,
        }
    }

    /// Rebuilds the element through its canonicalizing constructor.
    pub fn canonicalize(&self) -> Self {
        match &self.0 {
            Repr::Zd(v) => GroupElement::zd(v.iter().copied()),
            Repr::Free(w) => GroupElement::free(w.iter().copied()),
            Repr::Lamp { lit, pos } => GroupElement::lamplighter(lit.iter().copied(), *pos),
            Repr::Cyclic { residue, order } => GroupElement::cyclic(*residue as i64, *order),
        }
    }
}

fn push_letter(word: &mut SmallVec<[u8; 24]>, l: u8) {
    if word.last() == Some(&(l ^ 1)) {
        word.pop();
    } else {
        word.push(l);
    }
}

fn letter_char(l: u8) -> char {
    let c = (b'a' + l / 2) as char;
    if l.is_multiple_of(2) {
        c
    } else {
        c.to_ascii_uppercase()
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Zd(v) => {
                f.write_str("(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            Repr::Free(w) if w.is_empty() => f.write_str("1"),
            Repr::Free(w) => w.iter().try_for_each(|&l| write!(f, "{}", letter_char(l))),
            Repr::Lamp { lit, pos } => {
                f.write_str("{")?;
                for (i, x) in lit.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}|{pos}")
            }
            Repr::Cyclic { residue, order } => write!(f, "{residue} mod {order}"),
        }
    }
}

/// A group together with a finite symmetric generating set.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupDescriptor {
    kind: GroupKind,
    generators: Vec<GroupElement>,
    standard: bool,
}

impl GroupDescriptor {
    /// The group with its standard generating set.
    pub fn new(kind: GroupKind) -> Result<Self> {
        match kind {
            GroupKind::Zd { dim: 0 } => {
                return Err(Error::InvalidGroup("Z^d needs d >= 1".into()));
            }
            GroupKind::Free { rank } if rank == 0 || rank > 26 => {
                return Err(Error::InvalidGroup(format!(
                    "free group rank must be in 1..=26, got {rank}"
                )));
            }
            GroupKind::Cyclic { order: 0 } => {
                return Err(Error::InvalidGroup("cyclic group order must be >= 1".into()));
            }
            _ => {}
        }
        let generators = standard_generators(kind);
        Ok(GroupDescriptor {
            kind,
            generators,
            standard: true,
        })
    }

    pub fn zd(dim: usize) -> Self {
        Self::new(GroupKind::Zd { dim }).expect("valid dimension")
    }

    pub fn free(rank: usize) -> Self {
        Self::new(GroupKind::Free { rank }).expect("valid rank")
    }

    pub fn lamplighter() -> Self {
        Self::new(GroupKind::Lamplighter).expect("lamplighter")
    }

    pub fn cyclic(order: u64) -> Self {
        Self::new(GroupKind::Cyclic { order }).expect("valid order")
    }

    /// The group with a custom generating set, which must be closed under
    /// inversion and must not contain the identity.
    pub fn with_generators(kind: GroupKind, generators: Vec<GroupElement>) -> Result<Self> {
        let mut g = Self::new(kind)?;
        let e = g.identity();
        for x in &generators {
            g.check(x)?;
            if *x == e {
                return Err(Error::InvalidGroup("identity listed as a generator".into()));
            }
            let inv = g.inverse(x)?;
            if !generators.contains(&inv) {
                return Err(Error::InvalidGroup(format!(
                    "generating set not closed under inversion: {x} has no inverse {inv}"
                )));
            }
        }
        let mut dedup = generators.clone();
        dedup.sort();
        dedup.dedup();
        if dedup.len() != generators.len() {
            return Err(Error::InvalidGroup("duplicate generator".into()));
        }
        let mut std_sorted = standard_generators(kind);
        std_sorted.sort();
        g.standard = std_sorted == dedup;
        g.generators = generators;
        Ok(g)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn has_standard_generators(&self) -> bool {
        self.standard
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind {
            GroupKind::Zd { dim } => GroupElement::zd(std::iter::repeat_n(0, dim)),
            GroupKind::Free { .. } => GroupElement::free([]),
            GroupKind::Lamplighter => GroupElement::lamplighter([], 0),
            GroupKind::Cyclic { order } => GroupElement::cyclic(0, order),
        }
    }

    /// Checks that `g` is a valid element of this group.
    pub fn check(&self, g: &GroupElement) -> Result<()> {
        let ok = match (&self.kind, &g.0) {
            (GroupKind::Zd { dim }, Repr::Zd(v)) => v.len() == *dim,
            (GroupKind::Free { rank }, Repr::Free(w)) => w.iter().all(|&l| ((l / 2) as usize) < *rank),
            (GroupKind::Lamplighter, Repr::Lamp { .. }) => true,
            (GroupKind::Cyclic { order }, Repr::Cyclic { order: o, .. }) => order == o,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::GroupMismatch {
                expected: self.kind.to_string(),
                found: g.to_string(),
            })
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        let out = match (&a.0, &b.0) {
            (Repr::Zd(x), Repr::Zd(y)) if x.len() == y.len() => {
                GroupElement(Repr::Zd(x.iter().zip(y).map(|(p, q)| p + q).collect()))
            }
            (Repr::Free(x), Repr::Free(y)) => {
                let mut w = x.clone();
                for &l in y {
                    push_letter(&mut w, l);
                }
                GroupElement(Repr::Free(w))
            }
            (Repr::Lamp { lit: f, pos: p }, Repr::Lamp { lit: g, pos: q }) => GroupElement(Repr::Lamp {
                lit: symmetric_difference(f, g, *p),
                pos: p + q,
            }),
            (Repr::Cyclic { residue: x, order: n }, Repr::Cyclic { residue: y, order: m }) if n == m => {
                GroupElement(Repr::Cyclic {
                    residue: ((*x as u128 + *y as u128) % *n as u128) as u64,
                    order: *n,
                })
            }
            _ => {
                return Err(Error::GroupMismatch {
                    expected: a.to_string(),
                    found: b.to_string(),
                })
            }
        };
        self.check(&out)?;
        Ok(out)
    }

    /// `x ← x·h`, reusing the allocation of `x` where possible.
    pub fn multiply_in_place(&self, x: &mut GroupElement, h: &GroupElement) -> Result<()> {
        if let (GroupKind::Free { .. }, Repr::Free(_), Repr::Free(y)) = (self.kind, &x.0, &h.0) {
            self.check(h)?;
            let y = y.clone();
            if let Repr::Free(w) = &mut x.0 {
                for l in y {
                    push_letter(w, l);
                }
            }
            return Ok(());
        }
        *x = self.multiply(x, h)?;
        Ok(())
    }

    pub fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check(a)?;
        Ok(match &a.0 {
            Repr::Zd(v) => GroupElement(Repr::Zd(v.iter().map(|x| -x).collect())),
            Repr::Free(w) => GroupElement(Repr::Free(w.iter().rev().map(|l| l ^ 1).collect())),
            Repr::Lamp { lit, pos } => GroupElement(Repr::Lamp {
                lit: lit.iter().map(|x| x - pos).collect(),
                pos: -pos,
            }),
            Repr::Cyclic { residue, order } => GroupElement(Repr::Cyclic {
                residue: (order - residue) % order,
                order: *order,
            }),
        })
    }

    /// `a^{-1} b`.
    pub fn left_divide(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.multiply(&self.inverse(a)?, b)
    }

    pub fn product<'a>(&self, factors: impl IntoIterator<Item = &'a GroupElement>) -> Result<GroupElement> {
        factors
            .into_iter()
            .try_fold(self.identity(), |acc, g| self.multiply(&acc, g))
    }

    /// Parses the canonical text encoding of an element of this group.
    pub fn parse(&self, input: &str) -> Result<GroupElement> {
        let perr = |reason: &str| Error::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim();
        let g = match self.kind {
            GroupKind::Zd { dim } => {
                let inner = s
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| perr("expected (x1,...,xd)"))?;
                let coords = inner
                    .split(',')
                    .map(|t| t.trim().parse::<i64>().map_err(|_| perr("bad integer")))
                    .collect::<Result<Vec<_>>>()?;
                if coords.len() != dim {
                    return Err(perr(&format!("expected {dim} coordinates")));
                }
                GroupElement::zd(coords)
            }
            GroupKind::Free { rank } => {
                if s.is_empty() || s == "1" {
                    return Ok(self.identity());
                }
                let mut letters = Vec::with_capacity(s.len());
                for c in s.chars().filter(|c| !c.is_whitespace()) {
                    let (idx, inv) = match c {
                        'a'..='z' => (c as u8 - b'a', 0),
                        'A'..='Z' => (c as u8 - b'A', 1),
                        _ => return Err(perr("free-group letters must be a-z or A-Z")),
                    };
                    if idx as usize >= rank {
                        return Err(perr(&format!("letter {c} outside rank {rank}")));
                    }
                    letters.push(2 * idx + inv);
                }
                GroupElement::free(letters)
            }
            GroupKind::Lamplighter => {
                let (lamps, pos) = s.split_once('|').ok_or_else(|| perr("expected {lamps}|pos"))?;
                let inner = lamps
                    .trim()
                    .strip_prefix('{')
                    .and_then(|r| r.strip_suffix('}'))
                    .ok_or_else(|| perr("expected braces around lamp set"))?;
                let mut lit = Vec::new();
                if !inner.trim().is_empty() {
                    for t in inner.split(',') {
                        lit.push(t.trim().parse::<i64>().map_err(|_| perr("bad lamp position"))?);
                    }
                }
                let mut sorted = lit.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != lit.len() {
                    return Err(perr("duplicate lamp position"));
                }
                let pos = pos.trim().parse::<i64>().map_err(|_| perr("bad marker position"))?;
                GroupElement::lamplighter(sorted, pos)
            }
            GroupKind::Cyclic { order } => {
                let (k, n) = s.split_once("mod").ok_or_else(|| perr("expected 'k mod n'"))?;
                let k = k.trim().parse::<u64>().map_err(|_| perr("bad residue"))?;
                let n = n.trim().parse::<u64>().map_err(|_| perr("bad modulus"))?;
                if n != order {
                    return Err(perr(&format!("modulus must be {order}")));
                }
                if k >= n {
                    return Err(perr("residue out of range"));
                }
                GroupElement::cyclic(k as i64, order)
            }
        };
        Ok(g)
    }

    /// A shortest word in the generators representing `g`.
    ///
    /// Closed forms are used for the standard generators of `Z^d`, free
    /// groups and cyclic groups; everything else falls back to breadth-first
    /// search capped at `radius`.
    pub fn geodesic(&self, g: &GroupElement, radius: usize) -> Result<Vec<GroupElement>> {
        self.check(g)?;
        if self.standard {
            match &g.0 {
                Repr::Zd(v) => {
                    let dim = v.len();
                    let mut word = Vec::new();
                    for (i, &x) in v.iter().enumerate() {
                        let mut unit = vec![0i64; dim];
                        unit[i] = x.signum();
                        let step = GroupElement::zd(unit);
                        word.extend(std::iter::repeat_n(step, x.unsigned_abs() as usize));
                    }
                    return Ok(word);
                }
                Repr::Free(w) => return Ok(w.iter().map(|&l| GroupElement::free([l])).collect()),
                Repr::Cyclic { residue, order } => {
                    let k = *residue;
                    let (steps, step) = if k <= order - k { (k, 1) } else { (order - k, -1) };
                    let unit = GroupElement::cyclic(step, *order);
                    return Ok(std::iter::repeat_n(unit, steps as usize).collect());
                }
                Repr::Lamp { .. } => {}
            }
        }
        self.bfs_geodesic(g, radius)
    }

    fn bfs_geodesic(&self, target: &GroupElement, radius: usize) -> Result<Vec<GroupElement>> {
        let e = self.identity();
        if *target == e {
            return Ok(Vec::new());
        }
        // parent pointer: (predecessor, generator index)
        let mut seen: FxHashMap<GroupElement, Option<(GroupElement, usize)>> = FxHashMap::default();
        seen.insert(e.clone(), None);
        let mut queue = VecDeque::from([(e, 0usize)]);
        while let Some((x, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for (gi, s) in self.generators.iter().enumerate() {
                let y = self.multiply(&x, s)?;
                if seen.contains_key(&y) {
                    continue;
                }
                seen.insert(y.clone(), Some((x.clone(), gi)));
                if y == *target {
                    let mut word = Vec::with_capacity(d + 1);
                    let mut cur = y;
                    while let Some(Some((prev, gi))) = seen.get(&cur) {
                        word.push(self.generators[*gi].clone());
                        cur = prev.clone();
                    }
                    word.reverse();
                    return Ok(word);
                }
                queue.push_back((y, d + 1));
            }
        }
        Err(Error::Unreachable {
            element: target.to_string(),
            radius,
        })
    }

    /// Word length with respect to the generating set.
    pub fn word_length(&self, g: &GroupElement, radius: usize) -> Result<usize> {
        self.check(g)?;
        if self.standard {
            match &g.0 {
                Repr::Zd(v) => return Ok(v.iter().map(|x| x.unsigned_abs() as usize).sum()),
                Repr::Free(w) => return Ok(w.len()),
                Repr::Cyclic { residue, order } => return Ok((*residue).min(order - residue) as usize),
                Repr::Lamp { .. } => {}
            }
        }
        self.bfs_geodesic(g, radius).map(|w| w.len())
    }

    /// All elements of word length at most `radius`, in breadth-first order.
    pub fn ball(&self, radius: usize) -> Result<Vec<GroupElement>> {
        ball_from(self, &self.generators, radius)
    }
}

#[derive(Serialize, Deserialize)]
struct DescriptorJson {
    #[serde(flatten)]
    kind: GroupKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generators: Option<Vec<String>>,
}

impl Serialize for GroupDescriptor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let generators = (!self.standard).then(|| self.generators.iter().map(|g| g.to_string()).collect());
        DescriptorJson {
            kind: self.kind,
            generators,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroupDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DescriptorJson::deserialize(deserializer)?;
        let base = GroupDescriptor::new(raw.kind).map_err(D::Error::custom)?;
        match raw.generators {
            None => Ok(base),
            Some(gens) => {
                let gens = gens
                    .iter()
                    .map(|s| base.parse(s))
                    .collect::<Result<Vec<_>>>()
                    .map_err(D::Error::custom)?;
                GroupDescriptor::with_generators(raw.kind, gens).map_err(D::Error::custom)
            }
        }
    }
}

/// Elements reachable from the identity by at most `radius` right
/// multiplications by `steps`, in breadth-first order.
pub(crate) fn ball_from(group: &GroupDescriptor, steps: &[GroupElement], radius: usize) -> Result<Vec<GroupElement>> {
    let e = group.identity();
    let mut seen = rustc_hash::FxHashSet::default();
    seen.insert(e.clone());
    let mut out = vec![e.clone()];
    let mut frontier = vec![e];
    for _ in 0..radius {
        let mut next = Vec::new();
        for x in &frontier {
            for s in steps {
                let y = group.multiply(x, s)?;
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

fn symmetric_difference(f: &[i64], g: &[i64], shift: i64) -> SmallVec<[i64; 3]> {
    let mut out = SmallVec::with_capacity(f.len() + g.len());
    let (mut i, mut j) = (0, 0);
    while i < f.len() || j < g.len() {
        let gj = g.get(j).map(|x| x + shift);
        match (f.get(i), gj) {
            (Some(&a), Some(b)) if a == b => {
                i += 1;
                j += 1;
            }
            (Some(&a), Some(b)) if a < b => {
                out.push(a);
                i += 1;
            }
            (Some(_), Some(b)) => {
                out.push(b);
                j += 1;
            }
            (Some(&a), None) => {
                out.push(a);
                i += 1;
            }
            (None, Some(b)) => {
                out.push(b);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn standard_generators(kind: GroupKind) -> Vec<GroupElement> {
    match kind {
        GroupKind::Zd { dim } => (0..dim)
            .flat_map(|i| {
                [1i64, -1].map(|s| {
                    let mut v = vec![0i64; dim];
                    v[i] = s;
                    GroupElement::zd(v)
                })
            })
            .collect(),
        GroupKind::Free { rank } => (0..rank as u8)
            .flat_map(|i| [GroupElement::free([2 * i]), GroupElement::free([2 * i + 1])])
            .collect(),
        GroupKind::Lamplighter => vec![
            GroupElement::lamplighter([], 1),
            GroupElement::lamplighter([], -1),
            GroupElement::lamplighter([0], 0),
        ],
        GroupKind::Cyclic { order } => match order {
            1 => vec![],
            2 => vec![GroupElement::cyclic(1, 2)],
            n => vec![GroupElement::cyclic(1, n), GroupElement::cyclic(-1, n)],
        },
    }
}

/// What a table gauge reports for elements it does not store.
#[derive(Clone, Debug, PartialEq)]
pub enum DefaultRule {
    /// Unstored elements are outside the gauge's domain.
    Undefined,
    /// Sum of stored values along a geodesic of the group, cut greedily into
    /// the longest stored chunks of at most `max_chunk` generators.
    GeodesicChunks { max_chunk: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum GaugeKind {
    WordLength,
    Table {
        values: FxHashMap<GroupElement, f64>,
        default: DefaultRule,
    },
}

/// A length function `|g|` on a group.
#[derive(Clone, Debug, PartialEq)]
pub struct Gauge {
    kind: GaugeKind,
    subadditive: bool,
    bfs_radius: usize,
}

impl Gauge {
    pub fn word_length() -> Self {
        Gauge {
            kind: GaugeKind::WordLength,
            subadditive: true,
            bfs_radius: DEFAULT_BFS_RADIUS,
        }
    }

    pub fn table(values: FxHashMap<GroupElement, f64>, default: DefaultRule, subadditive: bool) -> Result<Self> {
        if let Some((g, v)) = values.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidElement(format!(
                "gauge value {v} at {g} is not a nonnegative real"
            )));
        }
        Ok(Gauge {
            kind: GaugeKind::Table { values, default },
            subadditive,
            bfs_radius: DEFAULT_BFS_RADIUS,
        })
    }

    pub fn with_bfs_radius(mut self, radius: usize) -> Self {
        self.bfs_radius = radius;
        self
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    pub fn is_subadditive(&self) -> bool {
        self.subadditive
    }

    pub fn bfs_radius(&self) -> usize {
        self.bfs_radius
    }

    /// Stored value for table gauges, without applying the default rule.
    pub fn stored(&self, g: &GroupElement) -> Option<f64> {
        match &self.kind {
            GaugeKind::Table { values, .. } => values.get(g).copied(),
            GaugeKind::WordLength => None,
        }
    }

    pub fn value(&self, group: &GroupDescriptor, g: &GroupElement) -> Result<f64> {
        group.check(g)?;
        match &self.kind {
            GaugeKind::WordLength => group.word_length(g, self.bfs_radius).map(|n| n as f64),
            GaugeKind::Table { values, default } => {
                if *g == group.identity() {
                    return Ok(values.get(g).copied().unwrap_or(0.0));
                }
                if let Some(v) = values.get(g) {
                    return Ok(*v);
                }
                match default {
                    DefaultRule::Undefined => Err(Error::GaugeUndefined(g.to_string())),
                    DefaultRule::GeodesicChunks { max_chunk } => {
                        let word = group.geodesic(g, self.bfs_radius)?;
                        chunked_sum(group, values, &word, *max_chunk)
                            .ok_or_else(|| Error::GaugeUndefined(g.to_string()))
                    }
                }
            }
        }
    }
}

fn chunked_sum(
    group: &GroupDescriptor,
    values: &FxHashMap<GroupElement, f64>,
    word: &[GroupElement],
    max_chunk: usize,
) -> Option<f64> {
    let mut total = 0.0;
    let mut i = 0;
    while i < word.len() {
        let longest = max_chunk.min(word.len() - i);
        let mut advanced = false;
        for len in (1..=longest).rev() {
            let chunk = group.product(&word[i..i + len]).ok()?;
            if let Some(v) = values.get(&chunk) {
                total += v;
                i += len;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return None;
        }
    }
    Some(total)
}

/// `|g|` under `gauge`.
pub fn gauge_value(gauge: &Gauge, group: &GroupDescriptor, g: &GroupElement) -> Result<f64> {
    gauge.value(group, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupDescriptor {
        GroupDescriptor::free(2)
    }

    #[test]
    fn zd_product_and_inverse() {
        let g = GroupDescriptor::zd(2);
        let a = g.parse("(1,2)").unwrap();
        let b = g.parse("(3,-1)").unwrap();
        assert_eq!(g.multiply(&a, &b).unwrap().to_string(), "(4,1)");
        assert_eq!(g.inverse(&a).unwrap().to_string(), "(-1,-2)");
    }

    #[test]
    fn free_reduction() {
        let g = f2();
        let x = g.parse("a b").unwrap();
        let y = g.parse("B a").unwrap();
        assert_eq!(g.multiply(&x, &y).unwrap().to_string(), "aa");
        assert_eq!(g.inverse(&g.parse("aB").unwrap()).unwrap().to_string(), "bA");
        assert_eq!(g.parse("aA").unwrap(), g.identity());
        assert_eq!(g.identity().to_string(), "1");
    }

    #[test]
    fn lamplighter_toggle_and_inverse() {
        let g = GroupDescriptor::lamplighter();
        let x = g.parse("{0}|0").unwrap();
        assert_eq!(g.multiply(&x, &x).unwrap(), g.identity());
        let y = g.parse("{1}|2").unwrap();
        let yi = g.inverse(&y).unwrap();
        assert_eq!(yi.to_string(), "{-1}|-2");
        assert_eq!(g.multiply(&y, &yi).unwrap(), g.identity());
        assert_eq!(g.multiply(&yi, &y).unwrap(), g.identity());
    }

    #[test]
    fn lamplighter_inverse_brute_force() {
        // search a box for the unique right inverse of ({1}, 2)
        let g = GroupDescriptor::lamplighter();
        let y = g.parse("{1}|2").unwrap();
        let mut found = Vec::new();
        for pos in -4..=4 {
            for mask in 0u32..(1 << 9) {
                let lit: Vec<i64> = (0..9).filter(|i| mask & (1 << i) != 0).map(|i| i - 4).collect();
                let z = GroupElement::lamplighter(lit, pos);
                if g.multiply(&y, &z).unwrap() == g.identity() {
                    found.push(z);
                }
            }
        }
        assert_eq!(found, vec![g.parse("{-1}|-2").unwrap()]);
    }

    #[test]
    fn cyclic_arithmetic() {
        let g = GroupDescriptor::cyclic(5);
        let a = g.parse("3 mod 5").unwrap();
        assert_eq!(g.multiply(&a, &a).unwrap().to_string(), "1 mod 5");
        assert_eq!(g.inverse(&a).unwrap().to_string(), "2 mod 5");
        assert!(g.parse("5 mod 5").is_err());
        assert!(g.parse("1 mod 4").is_err());
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let z = GroupDescriptor::zd(2);
        let a = z.parse("(1,0)").unwrap();
        let w = f2().parse("a").unwrap();
        assert!(matches!(z.multiply(&a, &w), Err(Error::GroupMismatch { .. })));
        assert!(z.inverse(&w).is_err());
        assert!(z.multiply(&a, &GroupElement::zd([1, 2, 3])).is_err());
    }

    #[test]
    fn word_gauges() {
        let w = Gauge::word_length();
        let g = f2();
        assert_eq!(w.value(&g, &g.parse("aaB").unwrap()).unwrap(), 3.0);
        let z = GroupDescriptor::zd(2);
        assert_eq!(w.value(&z, &z.parse("(2,-3)").unwrap()).unwrap(), 5.0);
        let l = GroupDescriptor::lamplighter();
        assert_eq!(w.value(&l, &l.parse("{1}|0").unwrap()).unwrap(), 3.0);
        for grp in [g, z, l, GroupDescriptor::cyclic(7)] {
            assert_eq!(w.value(&grp, &grp.identity()).unwrap(), 0.0);
        }
    }

    #[test]
    fn lamplighter_bfs_matches_tour_length() {
        // lamps {0, 3}, marker at 1: light 0, walk to 3, light, come back to 1
        let l = GroupDescriptor::lamplighter();
        let x = l.parse("{0,3}|1").unwrap();
        assert_eq!(l.word_length(&x, 20).unwrap(), 2 + 3 + 2);
        let path = l.geodesic(&x, 20).unwrap();
        assert_eq!(l.product(&path).unwrap(), x);
    }

    #[test]
    fn bfs_radius_cap() {
        let l = GroupDescriptor::lamplighter();
        let far = l.parse("{}|6").unwrap();
        assert!(matches!(
            l.word_length(&far, 4),
            Err(Error::Unreachable { radius: 4, .. })
        ));
    }

    #[test]
    fn custom_generators_validated() {
        let k = GroupKind::Zd { dim: 1 };
        let g = GroupDescriptor::with_generators(
            k,
            vec![
                GroupElement::zd([2]),
                GroupElement::zd([-2]),
                GroupElement::zd([3]),
                GroupElement::zd([-3]),
            ],
        )
        .unwrap();
        assert!(!g.has_standard_generators());
        assert_eq!(g.word_length(&GroupElement::zd([1]), 10).unwrap(), 2);
        assert!(GroupDescriptor::with_generators(k, vec![GroupElement::zd([1])]).is_err());
        assert!(GroupDescriptor::with_generators(k, vec![GroupElement::zd([0])]).is_err());
    }

    #[test]
    fn encodings_round_trip() {
        let cases = [
            (GroupDescriptor::zd(2), "(1,-2)"),
            (GroupDescriptor::zd(1), "(0)"),
            (f2(), "aBBa"),
            (f2(), "1"),
            (GroupDescriptor::lamplighter(), "{-1,3}|2"),
            (GroupDescriptor::lamplighter(), "{}|0"),
            (GroupDescriptor::cyclic(9), "4 mod 9"),
        ];
        for (g, s) in cases {
            assert_eq!(g.parse(s).unwrap().to_string(), s);
        }
        assert!(GroupDescriptor::lamplighter().parse("{1,1}|0").is_err());
        assert!(f2().parse("c").is_err());
    }

    #[test]
    fn green_style_table_gauge() {
        let g = f2();
        let mut values = FxHashMap::default();
        for x in g.ball(2).unwrap() {
            values.insert(x.clone(), g.word_length(&x, 10).unwrap() as f64 * 3f64.ln());
        }
        let gauge = Gauge::table(values, DefaultRule::GeodesicChunks { max_chunk: 2 }, true).unwrap();
        let x = g.parse("abab").unwrap();
        assert!((gauge.value(&g, &x).unwrap() - 4.0 * 3f64.ln()).abs() < 1e-12);
        assert_eq!(gauge.value(&g, &g.identity()).unwrap(), 0.0);

        let strict = Gauge::table(FxHashMap::default(), DefaultRule::Undefined, true).unwrap();
        assert!(matches!(strict.value(&g, &x), Err(Error::GaugeUndefined(_))));
    }
}
