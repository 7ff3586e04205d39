//! Combinatorial sparsity models.
//!
//! A model of order `k` on `p` coordinates is generated by a family of
//! supports, each of cardinality at most `k`. A vector belongs to the model
//! when its support is a subset of some generator. Generators are stored
//! maximal-only and in lexicographic order so that every downstream
//! tie-break is deterministic.

use std::fmt;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of coordinate indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Support(Vec<usize>);

impl Support {
    /// Builds a support from arbitrary indices, sorting and removing duplicates.
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Support(indices))
    }

    /// Caller guarantees `indices` is strictly increasing.
    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Support(indices)
    }

    pub fn empty() -> Self {
        Support(Vec::new())
    }

    /// Support of a vector: the coordinates holding a non-zero value.
    pub fn of_vector(v: &DVector<f64>) -> Self {
        Support(
            v.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn is_subset_of(&self, other: &Support) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.0.iter();
        'outer: for &a in &self.0 {
            for &b in it.by_ref() {
                if b == a {
                    continue 'outer;
                }
                if b > a {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn union(&self, other: &Support) -> Support {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            if a < b {
                out.push(a);
                i += 1;
            } else if b < a {
                out.push(b);
                j += 1;
            } else {
                out.push(a);
                i += 1;
                j += 1;
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Support(out)
    }

    /// `v` with every coordinate outside the support set to zero.
    pub fn restrict(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for &i in &self.0 {
            out[i] = v[i];
        }
        out
    }

    /// Squared Euclidean norm of `v` restricted to the support, summed in
    /// index order.
    pub fn restricted_norm_squared(&self, v: &DVector<f64>) -> f64 {
        self.0.iter().map(|&i| v[i] * v[i]).sum()
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl From<Support> for Vec<usize> {
    fn from(s: Support) -> Self {
        s.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// Every support of cardinality at most `k`.
    PlainK { k: usize },
    /// Unions of `active` cells of a partition of the coordinates. Cells are
    /// kept in lexicographic order; a cell's position is its tie-break rank.
    DisjointGroups { cells: Vec<Support>, active: usize },
    /// An explicit, canonical list of maximal generators.
    Explicit { generators: Vec<Support> },
}

/// A sparsity model `M(C)` on `ambient_dim` coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct SparsityModel {
    dim: usize,
    kind: ModelKind,
    // Cell index per coordinate, only for DisjointGroups.
    cell_of: Vec<usize>,
}

impl SparsityModel {
    pub fn plain_k(dim: usize, k: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("ambient dimension must be positive".into()));
        }
        if k == 0 || k > dim {
            return Err(Error::InvalidModel(format!(
                "plain sparsity level {k} must lie in [1, {dim}]"
            )));
        }
        Ok(SparsityModel {
            dim,
            kind: ModelKind::PlainK { k },
            cell_of: Vec::new(),
        })
    }

    pub fn disjoint_groups(dim: usize, cells: Vec<Vec<usize>>, active: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("ambient dimension must be positive".into()));
        }
        let mut cells = cells
            .into_iter()
            .map(|c| Support::new(c, dim))
            .collect::<Result<Vec<_>>>()?;
        if cells.iter().any(Support::is_empty) {
            return Err(Error::InvalidModel("group cells must be nonempty".into()));
        }
        cells.sort();
        let mut cell_of = vec![usize::MAX; dim];
        for (c, cell) in cells.iter().enumerate() {
            for &i in cell.indices() {
                if cell_of[i] != usize::MAX {
                    return Err(Error::InvalidModel(format!(
                        "coordinate {i} belongs to more than one group"
                    )));
                }
                cell_of[i] = c;
            }
        }
        if let Some(i) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidModel(format!(
                "coordinate {i} is not covered by any group"
            )));
        }
        if active == 0 || active > cells.len() {
            return Err(Error::InvalidModel(format!(
                "active group count {active} must lie in [1, {}]",
                cells.len()
            )));
        }
        Ok(SparsityModel {
            dim,
            kind: ModelKind::DisjointGroups { cells, active },
            cell_of,
        })
    }

    /// Canonical explicit family: duplicates and every generator contained
    /// in another are dropped, the rest sorted lexicographically.
    pub fn canonicalize_family(dim: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("ambient dimension must be positive".into()));
        }
        if supports.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let sets = supports
            .into_iter()
            .map(|s| Support::new(s, dim))
            .collect::<Result<Vec<_>>>()?;
        if sets.iter().any(Support::is_empty) {
            return Err(Error::InvalidModel("generator sets must be nonempty".into()));
        }
        Ok(SparsityModel {
            dim,
            kind: ModelKind::Explicit {
                generators: maximal_sets(sets),
            },
            cell_of: Vec::new(),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Largest cardinality of any generator.
    pub fn order(&self) -> usize {
        match &self.kind {
            ModelKind::PlainK { k } => *k,
            ModelKind::DisjointGroups { cells, active } => {
                let mut sizes: Vec<usize> = cells.iter().map(Support::len).collect();
                sizes.sort_unstable_by(|a, b| b.cmp(a));
                sizes.iter().take(*active).sum()
            }
            ModelKind::Explicit { generators } => {
                generators.iter().map(Support::len).max().unwrap_or(0)
            }
        }
    }

    /// True iff `s` is a subset of some generator. Indices outside the
    /// ambient dimension are never contained.
    pub fn contains(&self, s: &Support) -> bool {
        if s.indices().iter().any(|&i| i >= self.dim) {
            return false;
        }
        match &self.kind {
            ModelKind::PlainK { k } => s.len() <= *k,
            ModelKind::DisjointGroups { active, .. } => {
                let mut touched: Vec<usize> = s.indices().iter().map(|&i| self.cell_of[i]).collect();
                touched.sort_unstable();
                touched.dedup();
                touched.len() <= *active
            }
            ModelKind::Explicit { generators } => {
                s.is_empty() || generators.iter().any(|g| s.is_subset_of(g))
            }
        }
    }

    /// The model generated by the `j`-fold family union `C ⋓ ... ⋓ C`.
    pub fn expand(&self, j: usize) -> Result<Self> {
        if !(1..=3).contains(&j) {
            return Err(Error::InvalidArgument(format!(
                "expansion order {j} must be 1, 2 or 3"
            )));
        }
        if j == 1 {
            return Ok(self.clone());
        }
        let kind = match &self.kind {
            ModelKind::PlainK { k } => ModelKind::PlainK {
                k: (j * k).min(self.dim),
            },
            ModelKind::DisjointGroups { cells, active } => ModelKind::DisjointGroups {
                cells: cells.clone(),
                active: (j * active).min(cells.len()),
            },
            ModelKind::Explicit { generators } => {
                let m = generators.len();
                let mut unions = Vec::new();
                if j == 2 {
                    for a in 0..m {
                        for b in a..m {
                            unions.push(generators[a].union(&generators[b]));
                        }
                    }
                } else {
                    for a in 0..m {
                        for b in a..m {
                            let ab = generators[a].union(&generators[b]);
                            for c in b..m {
                                unions.push(ab.union(&generators[c]));
                            }
                        }
                    }
                }
                ModelKind::Explicit {
                    generators: maximal_sets(unions),
                }
            }
        };
        Ok(SparsityModel {
            dim: self.dim,
            kind,
            cell_of: self.cell_of.clone(),
        })
    }

    /// Exact number of maximal generators, saturating at `u128::MAX`.
    pub fn generator_count(&self) -> u128 {
        match &self.kind {
            ModelKind::PlainK { k } => binomial(self.dim, *k),
            ModelKind::DisjointGroups { cells, active } => binomial(cells.len(), *active),
            ModelKind::Explicit { generators } => generators.len() as u128,
        }
    }

    /// All maximal generators in lexicographic order, or an error carrying
    /// the exact count when there are more than `cap`.
    pub fn enumerate_supports(&self, cap: usize) -> Result<Vec<Support>> {
        let count = self.generator_count();
        if count > cap as u128 {
            return Err(Error::EnumerationBudget { count, cap });
        }
        Ok(match &self.kind {
            ModelKind::PlainK { k } => combinations(self.dim, *k)
                .into_iter()
                .map(Support::from_sorted)
                .collect(),
            ModelKind::DisjointGroups { cells, active } => {
                let mut out: Vec<Support> = combinations(cells.len(), *active)
                    .into_iter()
                    .map(|combo| {
                        combo
                            .iter()
                            .fold(Support::empty(), |acc, &c| acc.union(&cells[c]))
                    })
                    .collect();
                out.sort();
                out
            }
            ModelKind::Explicit { generators } => generators.clone(),
        })
    }

    /// A generator drawn uniformly at random, without enumerating the family.
    pub fn sample_generator<R: Rng + ?Sized>(&self, rng: &mut R) -> Support {
        match &self.kind {
            ModelKind::PlainK { k } => {
                let mut idx = sample(rng, self.dim, *k).into_vec();
                idx.sort_unstable();
                Support::from_sorted(idx)
            }
            ModelKind::DisjointGroups { cells, active } => sample(rng, cells.len(), *active)
                .into_iter()
                .fold(Support::empty(), |acc, c| acc.union(&cells[c])),
            ModelKind::Explicit { generators } => {
                generators[rng.random_range(0..generators.len())].clone()
            }
        }
    }
}

impl fmt::Display for SparsityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ModelKind::PlainK { k } => write!(f, "plain_k(p={}, k={k})", self.dim),
            ModelKind::DisjointGroups { cells, active } => write!(
                f,
                "disjoint_groups(p={}, cells={}, active={active})",
                self.dim,
                cells.len()
            ),
            ModelKind::Explicit { generators } => {
                write!(f, "explicit(p={}, generators={})", self.dim, generators.len())
            }
        }
    }
}

/// Drops duplicates and sets contained in another set; returns the rest in
/// lexicographic order.
fn maximal_sets(mut sets: Vec<Support>) -> Vec<Support> {
    sets.sort();
    sets.dedup();
    // A proper superset is strictly longer, so only longer sets need checking.
    let mut by_len: Vec<usize> = (0..sets.len()).collect();
    by_len.sort_by(|&a, &b| sets[b].len().cmp(&sets[a].len()));
    let mut keep = vec![true; sets.len()];
    for (pos, &i) in by_len.iter().enumerate() {
        for &j in &by_len[..pos] {
            if keep[j] && sets[j].len() > sets[i].len() && sets[i].is_subset_of(&sets[j]) {
                keep[i] = false;
                break;
            }
        }
    }
    sets.into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Rightmost position that can still advance.
        let Some(pos) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[pos] += 1;
        for i in pos + 1..k {
            cur[i] = cur[i - 1] + 1;
        }
    }
}

/// On-disk model description; indices are 0-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelDocKind {
    PlainK { k: usize },
    DisjointGroups { groups: Vec<Vec<usize>>, active: usize },
    Explicit { supports: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelDoc {
    p: usize,
    #[serde(flatten)]
    kind: ModelDocKind,
}

impl TryFrom<ModelDoc> for SparsityModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        match doc.kind {
            ModelDocKind::PlainK { k } => SparsityModel::plain_k(doc.p, k),
            ModelDocKind::DisjointGroups { groups, active } => {
                SparsityModel::disjoint_groups(doc.p, groups, active)
            }
            ModelDocKind::Explicit { supports } => SparsityModel::canonicalize_family(doc.p, supports),
        }
    }
}

impl From<SparsityModel> for ModelDoc {
    fn from(m: SparsityModel) -> Self {
        let kind = match m.kind {
            ModelKind::PlainK { k } => ModelDocKind::PlainK { k },
            ModelKind::DisjointGroups { cells, active } => ModelDocKind::DisjointGroups {
                groups: cells.into_iter().map(Vec::from).collect(),
                active,
            },
            ModelKind::Explicit { generators } => ModelDocKind::Explicit {
                supports: generators.into_iter().map(Vec::from).collect(),
            },
        };
        ModelDoc { p: m.dim, kind }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sup(v: &[usize]) -> Support {
        Support::from_sorted(v.to_vec())
    }

    fn explicit(p: usize, sets: &[&[usize]]) -> SparsityModel {
        SparsityModel::canonicalize_family(p, sets.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    fn generators(m: &SparsityModel) -> Vec<Vec<usize>> {
        m.enumerate_supports(usize::MAX)
            .unwrap()
            .into_iter()
            .map(Vec::from)
            .collect()
    }

    #[test]
    fn canonicalize_drops_contained_sets() {
        assert_eq!(generators(&explicit(3, &[&[0], &[0, 1]])), vec![vec![0, 1]]);
        assert_eq!(generators(&explicit(3, &[&[0], &[1]])), vec![vec![0], vec![1]]);
        assert_eq!(
            generators(&explicit(4, &[&[0, 1], &[1, 0], &[2]])),
            vec![vec![0, 1], vec![2]]
        );
    }

    #[test]
    fn canonicalize_errors() {
        assert!(matches!(
            SparsityModel::canonicalize_family(3, vec![]),
            Err(Error::EmptyFamily)
        ));
        assert!(matches!(
            SparsityModel::canonicalize_family(3, vec![vec![0, 3]]),
            Err(Error::IndexOutOfRange { index: 3, dim: 3 })
        ));
        assert!(SparsityModel::canonicalize_family(3, vec![vec![]]).is_err());
    }

    #[test]
    fn membership() {
        let m = SparsityModel::plain_k(5, 2).unwrap();
        assert!(m.contains(&sup(&[1, 3])));
        assert!(!m.contains(&sup(&[0, 1, 2])));
        assert!(m.contains(&Support::empty()));

        let e = explicit(4, &[&[0, 1], &[2, 3]]);
        assert!(!e.contains(&sup(&[1, 2])));
        assert!(e.contains(&sup(&[3])));
        assert!(e.contains(&Support::empty()));

        let g = SparsityModel::disjoint_groups(5, vec![vec![0, 1], vec![2], vec![3, 4]], 2).unwrap();
        assert!(g.contains(&sup(&[0, 1, 2])));
        assert!(!g.contains(&sup(&[0, 2, 4])));
    }

    #[test]
    fn model_validation() {
        assert!(SparsityModel::plain_k(3, 4).is_err());
        assert!(SparsityModel::plain_k(3, 0).is_err());
        assert!(SparsityModel::disjoint_groups(4, vec![vec![0, 1], vec![1, 2, 3]], 1).is_err());
        assert!(SparsityModel::disjoint_groups(4, vec![vec![0, 1], vec![2]], 1).is_err());
        assert!(SparsityModel::disjoint_groups(4, vec![vec![0, 1], vec![2, 3]], 3).is_err());
    }

    #[test]
    fn expansion() {
        let m = SparsityModel::plain_k(10, 2).unwrap();
        assert_eq!(m.expand(3).unwrap(), SparsityModel::plain_k(10, 6).unwrap());
        assert_eq!(
            SparsityModel::plain_k(4, 2).unwrap().expand(3).unwrap(),
            SparsityModel::plain_k(4, 4).unwrap()
        );
        assert_eq!(m.expand(1).unwrap(), m);
        assert!(m.expand(0).is_err());
        assert!(m.expand(4).is_err());

        let e = explicit(3, &[&[0], &[1], &[2]]);
        assert_eq!(
            generators(&e.expand(2).unwrap()),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(generators(&e.expand(3).unwrap()), vec![vec![0, 1, 2]]);

        let g = SparsityModel::disjoint_groups(6, vec![vec![0, 1], vec![2, 3], vec![4, 5]], 2).unwrap();
        match g.expand(2).unwrap().kind() {
            ModelKind::DisjointGroups { active, .. } => assert_eq!(*active, 3),
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn enumeration() {
        let m = SparsityModel::plain_k(4, 2).unwrap();
        assert_eq!(
            generators(&m),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );

        let big = SparsityModel::plain_k(30, 10).unwrap();
        match big.enumerate_supports(1000) {
            Err(Error::EnumerationBudget { count, cap }) => {
                assert_eq!(count, 30_045_015);
                assert_eq!(cap, 1000);
            }
            other => panic!("expected budget error, got {other:?}"),
        }

        let g = SparsityModel::disjoint_groups(6, vec![vec![4, 5], vec![0, 1], vec![2, 3]], 2).unwrap();
        assert_eq!(
            generators(&g),
            vec![vec![0, 1, 2, 3], vec![0, 1, 4, 5], vec![2, 3, 4, 5]]
        );
    }

    #[test]
    fn binomial_matches_pascal() {
        let mut row = vec![1u128];
        for n in 1..=40usize {
            let mut next = vec![1u128; n + 1];
            for k in 1..n {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for (k, &want) in row.iter().enumerate() {
                assert_eq!(binomial(n, k), want, "C({n},{k})");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let doc = r#"{"p": 6, "kind": "disjoint_groups", "groups": [[2,3],[0,1],[4,5]], "active": 1}"#;
        let m: SparsityModel = serde_json::from_str(doc).unwrap();
        assert_eq!(m.order(), 2);
        let back: SparsityModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);

        let bad = r#"{"p": 3, "kind": "plain_k", "k": 5}"#;
        assert!(serde_json::from_str::<SparsityModel>(bad).is_err());
        let e: SparsityModel =
            serde_json::from_str(r#"{"p": 3, "kind": "explicit", "supports": [[0],[0,1]]}"#).unwrap();
        assert_eq!(generators(&e), vec![vec![0, 1]]);
    }

    fn arb_model() -> impl Strategy<Value = SparsityModel> {
        prop_oneof![
            (1usize..=8).prop_flat_map(|p| (Just(p), 1..=p))
                .prop_map(|(p, k)| SparsityModel::plain_k(p, k).unwrap()),
            (2usize..=8, 1usize..=3).prop_flat_map(|(p, seed)| {
                // contiguous cells of length seed.min(p)
                let w = seed.min(p);
                let cells: Vec<Vec<usize>> = (0..p).collect::<Vec<_>>().chunks(w).map(|c| c.to_vec()).collect();
                let n = cells.len();
                (Just(p), Just(cells), 1..=n)
            }).prop_map(|(p, cells, g)| SparsityModel::disjoint_groups(p, cells, g).unwrap()),
            (1usize..=8).prop_flat_map(|p| (
                Just(p),
                prop::collection::vec(prop::collection::btree_set(0..p, 1..=p.min(4)), 1..6)
            )).prop_map(|(p, sets)| SparsityModel::canonicalize_family(
                p, sets.into_iter().map(|s| s.into_iter().collect()).collect()).unwrap()),
        ]
    }

    fn all_subsets(p: usize) -> Vec<Support> {
        (0u32..(1 << p))
            .map(|mask| Support::from_sorted((0..p).filter(|i| mask & (1 << i) != 0).collect()))
            .collect()
    }

    proptest! {
        #[test]
        fn membership_is_downward_closed(m in arb_model()) {
            let p = m.ambient_dim();
            for s in all_subsets(p).into_iter().filter(|s| m.contains(s)) {
                for t in all_subsets(p).into_iter().filter(|t| t.is_subset_of(&s)) {
                    prop_assert!(m.contains(&t), "{s} in model but subset {t} is not");
                }
            }
        }

        #[test]
        fn expansion_contains_pairwise_unions(m in arb_model()) {
            let p = m.ambient_dim();
            let m2 = m.expand(2).unwrap();
            let inside: Vec<Support> = all_subsets(p).into_iter().filter(|s| m.contains(s)).collect();
            for a in &inside {
                for b in &inside {
                    prop_assert!(m2.contains(&a.union(b)));
                }
            }
            // and nothing else: every member of the expansion splits into two members
            for s in all_subsets(p).into_iter().filter(|s| m2.contains(s)) {
                let splits = inside.iter().any(|a| inside.iter().any(|b| a.union(b) == s));
                prop_assert!(splits, "{s} in expansion but is no union of two members");
            }
        }

        #[test]
        fn canonicalize_is_idempotent(
            p in 1usize..=8,
            sets in prop::collection::vec(prop::collection::vec(0usize..8, 1..5), 1..8),
        ) {
            let sets: Vec<Vec<usize>> = sets.into_iter()
                .map(|s| s.into_iter().map(|i| i % p).collect()).collect();
            let once = SparsityModel::canonicalize_family(p, sets.clone()).unwrap();
            let twice = SparsityModel::canonicalize_family(p, generators(&once)).unwrap();
            prop_assert_eq!(&once, &twice);
            // same generated model as the raw family
            for s in all_subsets(p) {
                let raw = sets.iter().any(|g| s.indices().iter().all(|i| g.contains(i)));
                prop_assert_eq!(once.contains(&s), raw || s.is_empty());
            }
        }

        #[test]
        fn enumerated_generators_are_members_and_sorted(m in arb_model()) {
            let gens = m.enumerate_supports(usize::MAX).unwrap();
            prop_assert_eq!(gens.len() as u128, m.generator_count());
            prop_assert!(gens.windows(2).all(|w| w[0] < w[1]));
            for g in &gens {
                prop_assert!(m.contains(g));
                prop_assert!(g.len() <= m.order());
            }
        }
    }
}
