//! Functional units over finite state spaces `S_k = {0, .., k-1}`.
//!
//! Derived operations are closed over the space of behaviours
//! `S_k -> (Bool x S_k) + div`: a thread `M[φt, φf]` that first performs
//! a generator `M` and then continues as `φt` or `φf` behaves as
//! `λs. let (b, s') = M(s) in b ? φt(s') : φf(s')`. Starting from the two
//! termination constants and deadlock, the least closed set contains
//! exactly the behaviours of finite threads over the generators; its total
//! members are the derived method operations. Looping threads add nothing
//! on a finite space, since a terminating run of a regular thread can be
//! unfolded into a finite one.
//!
//! Behaviours are coded as integers in base `2k + 1`, one digit per state:
//! `b*k + s'` for `(b, s')` and `2k` for divergence. Total operations
//! are also indexed in base `2k`, which is the lexicographic table order
//! used by [`enumerate_mo`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::funit::{FunctionalUnit, FunitError, MethodOperation, StateSpace};
use crate::isa::BasicInstruction;
use crate::threads::{Action, LinearSpec, ThreadEntry};

/// Largest `k` accepted unless the caller raises the bound.
pub const DEFAULT_MAX_K: usize = 4;

/// A total method operation on `S_k` as a table indexed by state.
pub type MoTable = Vec<(bool, usize)>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FinfuError {
    #[error("state space size must be at least 1")]
    EmptySpace,
    #[error("k = {k} exceeds the bound {max}")]
    TooLarge { k: usize, max: usize },
}

fn check_k(k: usize, max: usize) -> Result<(), FinfuError> {
    if k == 0 {
        Err(FinfuError::EmptySpace)
    } else if k > max {
        Err(FinfuError::TooLarge { k, max })
    } else {
        Ok(())
    }
}

/// A behaviour on `S_k`; `None` marks divergence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BehaviorFn(pub Vec<Option<(bool, usize)>>);

impl BehaviorFn {
    pub fn is_total(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn to_table(&self) -> Option<MoTable> {
        self.0.iter().copied().collect()
    }
}

impl fmt::Display for BehaviorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (s, v) in self.0.iter().enumerate() {
            if s > 0 {
                f.write_str(" ")?;
            }
            match v {
                Some((b, t)) => write!(f, "{}{}", if *b { 'T' } else { 'F' }, t)?,
                None => f.write_str("div")?,
            }
        }
        f.write_str("]")
    }
}

fn digit(v: Option<(bool, usize)>, k: usize) -> u32 {
    match v {
        Some((b, s)) => (usize::from(b) * k + s) as u32,
        None => 2 * k as u32,
    }
}

fn undigit(d: u32, k: usize) -> Option<(bool, usize)> {
    let d = d as usize;
    (d < 2 * k).then(|| (d >= k, d % k))
}

fn digits(code: u32, k: usize) -> Vec<u32> {
    let base = 2 * k as u32 + 1;
    let mut out = vec![0; k];
    let mut c = code;
    for s in (0..k).rev() {
        out[s] = c % base;
        c /= base;
    }
    out
}

fn from_digits(ds: impl IntoIterator<Item = u32>, base: u32) -> u32 {
    ds.into_iter().fold(0, |acc, d| acc * base + d)
}

/// Index of a total table in [`enumerate_mo`] order.
pub fn mo_index(table: &[(bool, usize)]) -> u32 {
    let k = table.len();
    from_digits(table.iter().map(|&v| digit(Some(v), k)), 2 * k as u32)
}

/// Table with the given index in [`enumerate_mo`] order.
pub fn mo_table(k: usize, index: u32) -> MoTable {
    let base = 2 * k as u32;
    let mut out = vec![(false, 0); k];
    let mut c = index;
    for s in (0..k).rev() {
        out[s] = undigit(c % base, k).expect("total digit");
        c /= base;
    }
    out
}

fn mo_count(k: usize) -> u32 {
    (2 * k as u32).pow(k as u32)
}

fn behavior_of_code(code: u32, k: usize) -> BehaviorFn {
    BehaviorFn(digits(code, k).into_iter().map(|d| undigit(d, k)).collect())
}

/// All `(2k)^k` method operations on `S_k`, with `1 <= k <= max_k`.
pub fn enumerate_mo_bounded(k: usize, max_k: usize) -> Result<Vec<MoTable>, FinfuError> {
    check_k(k, max_k)?;
    Ok((0..mo_count(k)).map(|i| mo_table(k, i)).collect())
}

/// `MO(S_k)` in lexicographic table order, up to [`DEFAULT_MAX_K`].
pub fn enumerate_mo(k: usize) -> Result<Vec<MethodOperation>, FinfuError> {
    Ok(enumerate_mo_bounded(k, DEFAULT_MAX_K)?.into_iter().map(MethodOperation::table).collect())
}

/// How a behaviour entered the closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    TermP,
    TermN,
    Div,
    Step { generator: usize, on_true: u32, on_false: u32 },
}

/// The full closure including partial behaviours, with derivations.
struct Closure {
    order: Vec<u32>,
    origin: HashMap<u32, Origin>,
}

fn close(generators: &[MoTable], k: usize) -> Closure {
    let identity = |b: bool| from_digits((0..k).map(|s| digit(Some((b, s)), k)), 2 * k as u32 + 1);
    let div = from_digits((0..k).map(|_| 2 * k as u32), 2 * k as u32 + 1);
    let mut c = Closure { order: Vec::new(), origin: HashMap::new() };
    for (code, o) in [(identity(true), Origin::TermP), (identity(false), Origin::TermN), (div, Origin::Div)] {
        c.origin.insert(code, o);
        c.order.push(code);
    }
    let base = 2 * k as u32 + 1;
    let mut expanded: Vec<Vec<u32>> = c.order.iter().map(|&x| digits(x, k)).collect();
    loop {
        let before = c.order.len();
        for (g, m) in generators.iter().enumerate() {
            // A combination only reads φt at the T-successors of M and φf
            // at the F-successors, so distinct projections suffice.
            let project = |want: bool| {
                let mut seen: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
                for (i, ds) in expanded.iter().enumerate() {
                    let key = m.iter().map(|&(b, t)| if b == want { ds[t] } else { 0 }).collect();
                    seen.entry(key).or_insert(i);
                }
                seen.into_values().collect::<Vec<_>>()
            };
            let (ts, fs) = (project(true), project(false));
            for &it in &ts {
                for &jf in &fs {
                    let code =
                        from_digits(m.iter().map(|&(b, t)| if b { expanded[it][t] } else { expanded[jf][t] }), base);
                    if let std::collections::hash_map::Entry::Vacant(e) = c.origin.entry(code) {
                        e.insert(Origin::Step { generator: g, on_true: c.order[it], on_false: c.order[jf] });
                        c.order.push(code);
                        expanded.push(digits(code, k));
                    }
                }
            }
        }
        if c.order.len() == before {
            return c;
        }
    }
}

/// A closed set of derived method operations, identified by the sorted
/// indices of its members.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClosedSet {
    k: usize,
    members: BTreeSet<u32>,
}

impl ClosedSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, table: &[(bool, usize)]) -> bool {
        table.len() == self.k && self.members.contains(&mo_index(table))
    }

    pub fn contains_index(&self, index: u32) -> bool {
        self.members.contains(&index)
    }

    /// Member indices in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> Vec<MoTable> {
        self.members.iter().map(|&i| mo_table(self.k, i)).collect()
    }

    pub fn is_subset(&self, other: &ClosedSet) -> bool {
        self.k == other.k && self.members.is_subset(&other.members)
    }

    /// Sorted member indices, dot separated.
    pub fn fingerprint(&self) -> String {
        self.members.iter().map(u32::to_string).collect::<Vec<_>>().join(".")
    }
}

/// Total members of the least set containing the termination constants
/// and deadlock, closed under `M[φt, φf]` for every generator `M`.
pub fn derived_closure(generators: &[MoTable], k: usize) -> ClosedSet {
    for g in generators {
        assert!(g.len() == k && g.iter().all(|&(_, t)| t < k), "generator outside MO(S_{k})");
    }
    let c = close(generators, k);
    let total = 2 * k as u32;
    let members = c
        .order
        .iter()
        .filter(|&&code| digits(code, k).iter().all(|&d| d < total))
        .map(|&code| mo_index(&behavior_of_code(code, k).to_table().expect("total")))
        .collect();
    ClosedSet { k, members }
}

fn finite_tables(h: &FunctionalUnit) -> Result<(usize, Vec<MoTable>), FunitError> {
    h.tables().ok_or(FunitError::StateSpaceMismatch)
}

/// Closure of a finite unit's operations.
pub fn unit_closure(h: &FunctionalUnit) -> Result<ClosedSet, FunitError> {
    let (k, tables) = finite_tables(h)?;
    Ok(derived_closure(&tables, k))
}

/// `H ≤ H'`: every operation of `H` lies in the closure of `H'`.
pub fn leq_by_closure(h: &FunctionalUnit, h2: &FunctionalUnit) -> Result<bool, FunitError> {
    let (k, left) = finite_tables(h)?;
    let (k2, right) = finite_tables(h2)?;
    if k != k2 {
        return Err(FunitError::StateSpaceMismatch);
    }
    let closed = derived_closure(&right, k);
    Ok(left.iter().all(|t| closed.contains(t)))
}

/// Every derived operation of a finite unit together with a thread over
/// `focus` that computes it. Each thread is finite and acyclic.
pub fn closure_witnesses(h: &FunctionalUnit, focus: &str) -> Result<Vec<(MoTable, LinearSpec)>, FunitError> {
    let (k, tables) = finite_tables(h)?;
    let names: Vec<&str> = h.interface().collect();
    let actions = names
        .iter()
        .map(|m| BasicInstruction::new(focus, *m).map(Action::Basic))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| FunitError::InvalidMethod(focus.to_string()))?;
    let c = close(&tables, k);
    let mut state_of = HashMap::new();
    let mut entries = Vec::with_capacity(c.order.len());
    for (i, code) in c.order.iter().enumerate() {
        state_of.insert(*code, i);
        entries.push(match c.origin[code] {
            Origin::TermP => ThreadEntry::TermP,
            Origin::TermN => ThreadEntry::TermN,
            Origin::Div => ThreadEntry::Deadlock,
            Origin::Step { generator, on_true, on_false } => ThreadEntry::Post {
                action: actions[generator].clone(),
                on_true: state_of[&on_true],
                on_false: state_of[&on_false],
            },
        });
    }
    let spec = LinearSpec::new(entries, 0).expect("states refer backwards only");
    let mut out = Vec::new();
    for (i, code) in c.order.iter().enumerate() {
        if let Some(table) = behavior_of_code(*code, k).to_table() {
            out.push((table, spec.with_root(i).expect("in range").reachable_part()));
        }
    }
    Ok(out)
}

/// Limits for [`count_degrees`]; `None` means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DegreeLimits {
    pub max_sets: Option<usize>,
    pub max_time: Option<Duration>,
}

/// One degree: its closed set and a generator set of minimal size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Degree {
    pub closed: ClosedSet,
    pub generators: Vec<MoTable>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeCount {
    pub count: usize,
    /// False if a limit cut the search short; `count` is then a lower
    /// bound.
    pub exact: bool,
    /// In discovery order.
    pub degrees: Vec<Degree>,
}

/// Counts the distinct closures `D(H)` for `H ⊆ MO(S_k)`.
pub fn count_degrees(k: usize, limits: &DegreeLimits) -> Result<DegreeCount, FinfuError> {
    check_k(k, DEFAULT_MAX_K)?;
    let order: Vec<u32> = (0..mo_count(k)).collect();
    Ok(count_degrees_ordered(k, limits, &order))
}

/// [`count_degrees`] trying generators in the given order, which must be a
/// permutation of `0..(2k)^k`.
///
/// Breadth-first over closed sets: from each set `C` of a level and each
/// generator `m ∉ C`, the next level gets `D(C ∪ {m})`. A set first met
/// at level `n` needs exactly `n` generators.
pub fn count_degrees_ordered(k: usize, limits: &DegreeLimits, order: &[u32]) -> DegreeCount {
    let start = Instant::now();
    let mut seen: HashMap<ClosedSet, usize> = HashMap::new();
    let mut degrees = vec![Degree { closed: derived_closure(&[], k), generators: Vec::new() }];
    seen.insert(degrees[0].closed.clone(), 0);
    let mut frontier = vec![0usize];
    let full = |n: usize| limits.max_sets.is_some_and(|m| n >= m);
    let late = || limits.max_time.is_some_and(|t| start.elapsed() >= t);
    while !frontier.is_empty() {
        if full(degrees.len()) || late() {
            return DegreeCount { count: degrees.len(), exact: false, degrees };
        }
        let found: Vec<Vec<(ClosedSet, Vec<u32>)>> = frontier
            .par_iter()
            .map(|&d| {
                let Degree { closed, generators } = &degrees[d];
                let mut base: Vec<MoTable> = closed.members();
                let gens: Vec<u32> = generators.iter().map(|g| mo_index(g)).collect();
                let mut out = Vec::new();
                for &m in order {
                    if closed.contains_index(m) {
                        continue;
                    }
                    base.push(mo_table(k, m));
                    let next = derived_closure(&base, k);
                    base.pop();
                    let mut g = gens.clone();
                    g.push(m);
                    out.push((next, g));
                }
                out
            })
            .collect();
        let mut next_frontier = Vec::new();
        for (closed, gens) in found.into_iter().flatten() {
            if seen.contains_key(&closed) {
                continue;
            }
            if full(degrees.len()) {
                return DegreeCount { count: degrees.len(), exact: false, degrees };
            }
            seen.insert(closed.clone(), degrees.len());
            next_frontier.push(degrees.len());
            degrees.push(Degree { closed, generators: gens.iter().map(|&i| mo_table(k, i)).collect() });
        }
        frontier = next_frontier;
    }
    DegreeCount { count: degrees.len(), exact: true, degrees }
}

/// A finite unit with methods `m0, m1, ..` for the given tables.
pub fn table_unit(k: usize, tables: &[MoTable]) -> Result<FunctionalUnit, FunitError> {
    FunctionalUnit::new(
        StateSpace::Finite(k),
        tables.iter().enumerate().map(|(i, t)| (format!("m{i}"), MethodOperation::table(t.clone()))),
    )
}
