//! Symbolic systems: a 0/1 transition matrix, a finite-range potential and a target
//! set made of one-cylinders, plus the higher-block recoding that turns any
//! depth-k potential into a depth-2 one.
//!
//! Symbols are 0-based throughout. A depth-2 potential value is attached to the
//! transition `(x₀, x₁)`, so a path of `n` transitions accumulates `n` values and the
//! transfer matrix is `M[i][j] = a[i][j]·exp(φ(i, j))`.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Potential depending on `depth` consecutive symbols, stored per admissible word.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthKPotential {
    depth: usize,
    values: BTreeMap<Vec<usize>, f64>,
}

impl DepthKPotential {
    /// Wraps a word → value table. Completeness is checked when the table is
    /// attached to a transition matrix in [`SymbolicSystem::new`].
    pub fn new(depth: usize, values: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("potential depth must be at least 1".into()));
        }
        if let Some(w) = values.keys().find(|w| w.len() != depth) {
            return Err(Error::Config(format!("potential word {w:?} does not have length {depth}")));
        }
        if let Some((w, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("potential value {v} on word {w:?} is not finite")));
        }
        Ok(DepthKPotential { depth, values })
    }

    /// Tabulates `f` on every admissible word of length `depth`.
    pub fn from_fn(transitions: &[Vec<u8>], depth: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let values = admissible_words(transitions, depth).into_iter().map(|w| {
            let v = f(&w);
            (w, v)
        });
        DepthKPotential::new(depth, values.collect())
    }

    /// The zero potential of depth 1 (measure of maximal entropy).
    pub fn zero(n_symbols: usize) -> Self {
        DepthKPotential { depth: 1, values: (0..n_symbols).map(|i| (vec![i], 0.0)).collect() }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.values
    }

    pub fn value(&self, word: &[usize]) -> Option<f64> {
        self.values.get(word).copied()
    }

    /// Pointwise `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        DepthKPotential { depth: self.depth, values: self.values.iter().map(|(w, v)| (w.clone(), v + c)).collect() }
    }
}

/// A nonempty proper set of symbols, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSet {
    symbols: Vec<usize>,
}

impl TargetSet {
    pub fn new(mut symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Config("target set must be nonempty".into()));
        }
        symbols.sort_unstable();
        if symbols.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("target set {symbols:?} contains duplicates")));
        }
        Ok(TargetSet { symbols })
    }

    pub fn single(symbol: usize) -> Self {
        TargetSet { symbols: vec![symbol] }
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn contains(&self, s: usize) -> bool {
        self.symbols.binary_search(&s).is_ok()
    }
}

/// Graph diagnostics of a transition matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Diagnostics {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub period: usize,
    pub complement_nonempty: bool,
}

/// A validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicSystem {
    transitions: Vec<Vec<u8>>,
    potential: DepthKPotential,
    target: TargetSet,
    diagnostics: Diagnostics,
}

impl SymbolicSystem {
    /// Checks shapes, potential completeness, target range, irreducibility and that
    /// the target is proper.
    pub fn new(transitions: Vec<Vec<u8>>, potential: DepthKPotential, target: TargetSet) -> Result<Self> {
        check_transition_table(&transitions)?;
        let n = transitions.len();
        if let Some(&s) = target.symbols().iter().find(|&&s| s >= n) {
            return Err(Error::Config(format!("target symbol {s} out of range for {n} symbols")));
        }
        let admissible = admissible_words(&transitions, potential.depth());
        for w in &admissible {
            if potential.value(w).is_none() {
                return Err(Error::Config(format!("potential has no value for admissible word {w:?}")));
            }
        }
        if potential.values().len() != admissible.len() {
            let bad = potential.values().keys().find(|w| !is_admissible(&transitions, w)).unwrap();
            return Err(Error::Config(format!("potential assigns a value to inadmissible word {bad:?}")));
        }
        let diagnostics = diagnose(&transitions, &target);
        if !diagnostics.complement_nonempty {
            return Err(Error::Config("target must be proper: it covers the whole alphabet".into()));
        }
        if !diagnostics.irreducible {
            let (from, to) = unreachable_pair(&transitions).expect("reducible graph has a witness");
            return Err(Error::NotTransitive { from, to });
        }
        Ok(SymbolicSystem { transitions, potential, target, diagnostics })
    }

    /// Builds a system whose potential is `f` tabulated on admissible words.
    pub fn with_potential_fn(
        transitions: Vec<Vec<u8>>,
        depth: usize,
        f: impl Fn(&[usize]) -> f64,
        target: TargetSet,
    ) -> Result<Self> {
        check_transition_table(&transitions)?;
        let pot = DepthKPotential::from_fn(&transitions, depth, f)?;
        SymbolicSystem::new(transitions, pot, target)
    }

    pub fn n_symbols(&self) -> usize {
        self.transitions.len()
    }

    pub fn transitions(&self) -> &[Vec<u8>] {
        &self.transitions
    }

    pub fn potential(&self) -> &DepthKPotential {
        &self.potential
    }

    pub fn target(&self) -> &TargetSet {
        &self.target
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.transitions[i][j] == 1
    }

    /// Same graph and target with potential `φ + c`.
    pub fn with_shifted_potential(&self, c: f64) -> Self {
        SymbolicSystem { potential: self.potential.shifted(c), ..self.clone() }
    }

    /// Same graph and potential with another target.
    pub fn with_target(&self, target: TargetSet) -> Result<Self> {
        SymbolicSystem::new(self.transitions.clone(), self.potential.clone(), target)
    }
}

fn check_transition_table(t: &[Vec<u8>]) -> Result<()> {
    let n = t.len();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 symbols, got {n}")));
    }
    for (i, row) in t.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Config(format!("transition row {i} has length {} (expected {n})", row.len())));
        }
        if let Some(j) = row.iter().position(|&x| x > 1) {
            return Err(Error::Config(format!("transition entry ({i},{j}) is {} (expected 0 or 1)", row[j])));
        }
        if row.iter().all(|&x| x == 0) {
            return Err(Error::Config(format!("transition row {i} has no allowed successor")));
        }
    }
    for j in 0..n {
        if t.iter().all(|row| row[j] == 0) {
            return Err(Error::Config(format!("transition column {j} has no allowed predecessor")));
        }
    }
    Ok(())
}

fn is_admissible(t: &[Vec<u8>], w: &[usize]) -> bool {
    w.iter().all(|&s| s < t.len()) && w.windows(2).all(|p| t[p[0]][p[1]] == 1)
}

/// All admissible words of length `len`, in lexicographic order.
pub fn admissible_words(t: &[Vec<u8>], len: usize) -> Vec<Vec<usize>> {
    let n = t.len();
    let mut words: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for _ in 1..len {
        words = words
            .into_iter()
            .flat_map(|w| {
                let last = *w.last().unwrap();
                (0..n).filter(move |&j| t[last][j] == 1).map(move |j| {
                    let mut nw = w.clone();
                    nw.push(j);
                    nw
                })
            })
            .collect();
    }
    words
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn adjacency(t: &[Vec<u8>]) -> Vec<Vec<usize>> {
    t.iter().map(|row| (0..row.len()).filter(|&j| row[j] == 1).collect()).collect()
}

fn reverse_adjacency(t: &[Vec<u8>]) -> Vec<Vec<usize>> {
    let n = t.len();
    (0..n).map(|j| (0..n).filter(|&i| t[i][j] == 1).collect()).collect()
}

/// A pair `(from, to)` such that `to` is unreachable from `from`, if any.
fn unreachable_pair(t: &[Vec<u8>]) -> Option<(usize, usize)> {
    let fwd = reachable(&adjacency(t), 0);
    if let Some(j) = fwd.iter().position(|&r| !r) {
        return Some((0, j));
    }
    let back = reachable(&reverse_adjacency(t), 0);
    back.iter().position(|&r| !r).map(|j| (j, 0))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Graph diagnostics by breadth-first search.
///
/// The period is the gcd of `level(u) + 1 − level(v)` over all edges `u → v`, with
/// levels taken from a BFS rooted at symbol 0; it is only meaningful for
/// irreducible graphs and is reported as 0 otherwise.
pub fn diagnose(t: &[Vec<u8>], target: &TargetSet) -> Diagnostics {
    let n = t.len();
    let adj = adjacency(t);
    let irreducible = unreachable_pair(t).is_none();
    let complement_nonempty = (0..n).any(|s| !target.contains(s));
    let mut period = 0;
    if irreducible {
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for u in 0..n {
            for &v in &adj[u] {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    Diagnostics { irreducible, aperiodic: period == 1, period, complement_nonempty }
}

/// Graph diagnostics of a constructed system.
pub fn validate_system(sys: &SymbolicSystem) -> Diagnostics {
    diagnose(sys.transitions(), sys.target())
}

/// τ(A): length of the shortest path of length ≥ 1 from a target symbol to a target symbol.
pub fn minimal_return_time(sys: &SymbolicSystem) -> usize {
    let n = sys.n_symbols();
    let adj = adjacency(sys.transitions());
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &a in sys.target().symbols() {
        for &b in &adj[a] {
            if dist[b] == usize::MAX {
                dist[b] = 1;
                queue.push_back(b);
            }
        }
    }
    while let Some(u) = queue.pop_front() {
        if sys.target().contains(u) {
            return dist[u];
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    unreachable!("irreducible systems always return to the target")
}

/// Higher-block presentation with a depth-2 potential.
#[derive(Clone, Debug, PartialEq)]
pub struct RecodedSystem {
    block_states: Vec<Vec<usize>>,
    transitions: Vec<Vec<u8>>,
    potential2: Matrix,
    target_blocks: Vec<usize>,
    block_length: usize,
}

impl RecodedSystem {
    pub fn n_states(&self) -> usize {
        self.block_states.len()
    }

    pub fn block_states(&self) -> &[Vec<usize>] {
        &self.block_states
    }

    pub fn transitions(&self) -> &[Vec<u8>] {
        &self.transitions
    }

    /// Depth-2 potential; entries on forbidden transitions are 0 and never used.
    pub fn potential2(&self) -> &Matrix {
        &self.potential2
    }

    /// Indices of target block states (sorted).
    pub fn target_blocks(&self) -> &[usize] {
        &self.target_blocks
    }

    /// Indices of non-target block states (sorted).
    pub fn complement_blocks(&self) -> Vec<usize> {
        (0..self.n_states()).filter(|s| self.target_blocks.binary_search(s).is_err()).collect()
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.target_blocks.binary_search(&s).is_ok()
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.iter().flatten().filter(|&&x| x == 1).count()
    }

    /// `M[i][j] = a[i][j]·exp(φ₂(i, j))`.
    pub fn weighted_matrix(&self) -> Matrix {
        let n = self.n_states();
        Matrix::from_fn(n, n, |i, j| if self.transitions[i][j] == 1 { self.potential2[(i, j)].exp() } else { 0.0 })
    }

    /// Sliding-window encoding of an admissible word of original symbols into block
    /// states. The result has `word.len() − block_length + 1` entries.
    pub fn encode_word(&self, word: &[usize]) -> Option<Vec<usize>> {
        let l = self.block_length;
        if word.len() < l {
            return Some(Vec::new());
        }
        word.windows(l)
            .map(|w| self.block_states.binary_search_by(|b| b.as_slice().cmp(w)).ok())
            .collect()
    }

    /// Minimal first-return durations between target states: entry `(a, b)` is the
    /// length of the shortest path `a → … → b` whose interior avoids the target.
    pub fn min_return_durations(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.n_states();
        let adj = adjacency(&self.transitions);
        let index_of: BTreeMap<usize, usize> = self.target_blocks.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        self.target_blocks
            .iter()
            .map(|&a| {
                let mut out = vec![None; self.target_blocks.len()];
                let mut dist = vec![usize::MAX; n];
                let mut queue = VecDeque::new();
                for &b in &adj[a] {
                    if let Some(&k) = index_of.get(&b) {
                        out[k] = Some(1);
                    } else if dist[b] == usize::MAX {
                        dist[b] = 1;
                        queue.push_back(b);
                    }
                }
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[u] {
                        if let Some(&k) = index_of.get(&v) {
                            if out[k].is_none() {
                                out[k] = Some(dist[u] + 1);
                            }
                        } else if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// Higher-block recoding. Depth ≤ 2 keeps the original symbols; depth k > 2 uses the
/// admissible (k−1)-words as states, linked when they overlap in k−2 symbols.
pub fn recode_higher_block(sys: &SymbolicSystem) -> RecodedSystem {
    let k = sys.potential().depth();
    let t = sys.transitions();
    let n = sys.n_symbols();
    if k <= 2 {
        let pot = sys.potential();
        let potential2 = Matrix::from_fn(n, n, |i, j| {
            if t[i][j] == 0 {
                0.0
            } else if k == 1 {
                pot.value(&[i]).unwrap()
            } else {
                pot.value(&[i, j]).unwrap()
            }
        });
        return RecodedSystem {
            block_states: (0..n).map(|i| vec![i]).collect(),
            transitions: t.to_vec(),
            potential2,
            target_blocks: sys.target().symbols().to_vec(),
            block_length: 1,
        };
    }
    let blocks = admissible_words(t, k - 1);
    let m = blocks.len();
    let mut transitions = vec![vec![0u8; m]; m];
    let mut potential2 = Matrix::zeros(m, m);
    for (i, w) in blocks.iter().enumerate() {
        for (j, w2) in blocks.iter().enumerate() {
            if w[1..] == w2[..k - 2] {
                transitions[i][j] = 1;
                let mut word = w.clone();
                word.push(*w2.last().unwrap());
                potential2[(i, j)] = sys.potential().value(&word).unwrap();
            }
        }
    }
    let target_blocks = (0..m).filter(|&i| sys.target().contains(blocks[i][0])).collect();
    RecodedSystem { block_states: blocks, transitions, potential2, target_blocks, block_length: k - 1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n: usize) -> Vec<Vec<u8>> {
        vec![vec![1; n]; n]
    }

    fn golden() -> Vec<Vec<u8>> {
        vec![vec![1, 1], vec![1, 0]]
    }

    #[test]
    fn diagnostics_examples() {
        let d = diagnose(&full(2), &TargetSet::single(0));
        assert!(d.irreducible && d.aperiodic && d.period == 1 && d.complement_nonempty);
        let d = diagnose(&golden(), &TargetSet::single(1));
        assert!(d.irreducible && d.aperiodic);
        let d = diagnose(&[vec![0, 1], vec![1, 0]], &TargetSet::single(0));
        assert!(d.irreducible && !d.aperiodic && d.period == 2);
    }

    #[test]
    fn reducible_graph_names_witness() {
        let t = vec![vec![1, 1], vec![0, 1]];
        let err = SymbolicSystem::new(t, DepthKPotential::zero(2), TargetSet::single(0)).unwrap_err();
        assert_eq!(err, Error::NotTransitive { from: 1, to: 0 });
    }

    #[test]
    fn whole_alphabet_target_rejected() {
        let err = SymbolicSystem::new(full(2), DepthKPotential::zero(2), TargetSet::new(vec![0, 1]).unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("target must be proper"));
    }

    #[test]
    fn malformed_rows_rejected() {
        let err = SymbolicSystem::new(vec![vec![1, 1], vec![1]], DepthKPotential::zero(2), TargetSet::single(0))
            .unwrap_err();
        assert!(err.to_string().contains("row 1"));
        let err = SymbolicSystem::new(vec![vec![1, 2], vec![1, 1]], DepthKPotential::zero(2), TargetSet::single(0))
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn incomplete_or_excess_potential_rejected() {
        let mut v = BTreeMap::new();
        v.insert(vec![0, 0], 0.0);
        v.insert(vec![0, 1], 0.0);
        v.insert(vec![1, 0], 0.0);
        let pot = DepthKPotential::new(2, v.clone()).unwrap();
        assert!(SymbolicSystem::new(golden(), pot, TargetSet::single(1)).is_ok());
        let pot = DepthKPotential::new(2, v.clone()).unwrap();
        assert!(SymbolicSystem::new(full(2), pot, TargetSet::single(1)).is_err());
        v.insert(vec![1, 1], 0.0);
        let pot = DepthKPotential::new(2, v).unwrap();
        let err = SymbolicSystem::new(golden(), pot, TargetSet::single(1)).unwrap_err();
        assert!(err.to_string().contains("inadmissible"));
    }

    #[test]
    fn nan_potential_rejected() {
        let mut v = BTreeMap::new();
        v.insert(vec![0], f64::NAN);
        assert!(DepthKPotential::new(1, v).is_err());
    }

    #[test]
    fn recode_passthrough_depth_one() {
        let sys = SymbolicSystem::with_potential_fn(full(2), 1, |w| w[0] as f64 + 0.5, TargetSet::single(0)).unwrap();
        let r = recode_higher_block(&sys);
        assert_eq!(r.n_states(), 2);
        assert_eq!(r.potential2()[(1, 0)], 1.5);
        assert_eq!(r.potential2()[(1, 1)], 1.5);
        assert_eq!(r.potential2()[(0, 1)], 0.5);
    }

    #[test]
    fn recode_depth_three_full_and_golden() {
        let sys = SymbolicSystem::with_potential_fn(full(2), 3, |_| 0.0, TargetSet::single(0)).unwrap();
        let r = recode_higher_block(&sys);
        assert_eq!(r.block_states(), &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(r.n_transitions(), 8);
        assert_eq!(r.target_blocks(), &[0, 1]);

        let sys = SymbolicSystem::with_potential_fn(golden(), 3, |_| 0.0, TargetSet::single(1)).unwrap();
        let r = recode_higher_block(&sys);
        assert_eq!(r.block_states(), &[vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(r.target_blocks(), &[2]);
    }

    #[test]
    fn recode_potential_on_extended_word() {
        let sys = SymbolicSystem::with_potential_fn(full(2), 3, |w| (w[0] * 4 + w[1] * 2 + w[2]) as f64, TargetSet::single(0))
            .unwrap();
        let r = recode_higher_block(&sys);
        // 01 -> 11 carries the word 011.
        assert_eq!(r.potential2()[(1, 3)], 3.0);
        assert_eq!(r.transitions()[1][0], 0);
    }

    #[test]
    fn minimal_return_time_examples() {
        let sys = SymbolicSystem::new(full(2), DepthKPotential::zero(2), TargetSet::single(0)).unwrap();
        assert_eq!(minimal_return_time(&sys), 1);
        let sys = SymbolicSystem::new(golden(), DepthKPotential::zero(2), TargetSet::single(1)).unwrap();
        assert_eq!(minimal_return_time(&sys), 2);
        let cycle = vec![vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]];
        let sys = SymbolicSystem::new(cycle, DepthKPotential::zero(3), TargetSet::single(0)).unwrap();
        assert_eq!(minimal_return_time(&sys), 3);
        assert!(!sys.diagnostics().aperiodic);
    }

    #[test]
    fn min_return_durations_golden() {
        let sys = SymbolicSystem::new(golden(), DepthKPotential::zero(2), TargetSet::single(1)).unwrap();
        let r = recode_higher_block(&sys);
        assert_eq!(r.min_return_durations(), vec![vec![Some(2)]]);
    }
}
