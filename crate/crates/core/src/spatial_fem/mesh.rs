//! Dyadic meshes of `(0, 1)` drawn from one binary refinement tree.
//!
//! A vertex is stored as an integer tick `k` meaning `x = k / 2^D` with `D`
//! the hierarchy depth, so mesh overlays and common coarsenings are exact
//! set operations.

use std::sync::Arc;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: u32 = 20;
const DEPTH_LIMIT: u32 = 52;

/// The binary refinement tree of `(0, 1)` truncated at `max_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceHierarchy {
    max_depth: u32,
}

impl Default for SpaceHierarchy {
    fn default() -> Self {
        SpaceHierarchy {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl SpaceHierarchy {
    pub fn new(max_depth: u32) -> Result<Self> {
        if max_depth > DEPTH_LIMIT {
            return Err(Error::InvalidMesh(format!(
                "max depth {max_depth} exceeds {DEPTH_LIMIT}"
            )));
        }
        Ok(SpaceHierarchy { max_depth })
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    fn scale(&self) -> u64 {
        1u64 << self.max_depth
    }

    /// Uniform mesh with `2^level` elements.
    pub fn uniform(&self, level: u32) -> Result<FeSpace> {
        if level > self.max_depth {
            return Err(Error::InvalidMesh(format!(
                "level {level} exceeds max depth {}",
                self.max_depth
            )));
        }
        let step = 1u64 << (self.max_depth - level);
        let ticks = (0..=(1u64 << level)).map(|k| k * step).collect();
        FeSpace::from_ticks(*self, ticks)
    }

    /// Mesh with the given interior vertices (dyadic rationals, any order).
    pub fn from_cuts(&self, cuts: &[f64]) -> Result<FeSpace> {
        let mut ticks = vec![0, self.scale()];
        for &c in cuts {
            ticks.push(self.tick_of(c).ok_or_else(|| {
                Error::InvalidMesh(format!("cut {c} is not a dyadic point of depth {}", self.max_depth))
            })?);
        }
        ticks.sort_unstable();
        ticks.dedup();
        FeSpace::from_ticks(*self, ticks)
    }

    /// Tick index of `x` if it is a representable vertex position.
    pub fn tick_of(&self, x: f64) -> Option<u64> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        let k = x * self.scale() as f64;
        (k.fract() == 0.0).then_some(k as u64)
    }
}

/// Conforming P1 space with homogeneous Dirichlet conditions on a dyadic mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    hierarchy: SpaceHierarchy,
    ticks: Vec<u64>,
    coords: Vec<f64>,
}

impl PartialEq for FeSpace {
    fn eq(&self, other: &Self) -> bool {
        self.hierarchy == other.hierarchy && self.ticks == other.ticks
    }
}

impl Eq for FeSpace {}

pub type SpaceRef = Arc<FeSpace>;

impl FeSpace {
    /// Builds a space from sorted vertex ticks including both end points.
    pub fn from_ticks(hierarchy: SpaceHierarchy, ticks: Vec<u64>) -> Result<Self> {
        let end = hierarchy.scale();
        if ticks.len() < 2 || ticks[0] != 0 || *ticks.last().unwrap() != end {
            return Err(Error::InvalidMesh("mesh must span [0, 1]".into()));
        }
        for w in ticks.windows(2) {
            let len = w[1].checked_sub(w[0]).filter(|l| *l > 0).ok_or_else(|| {
                Error::InvalidMesh("vertices must increase strictly".into())
            })?;
            if !len.is_power_of_two() || w[0] % len != 0 {
                return Err(Error::InvalidMesh(format!(
                    "element [{}, {}] is not a node of the refinement tree",
                    w[0] as f64 / end as f64,
                    w[1] as f64 / end as f64
                )));
            }
        }
        let coords = ticks.iter().map(|&k| k as f64 / end as f64).collect();
        Ok(FeSpace {
            hierarchy,
            ticks,
            coords,
        })
    }

    pub fn hierarchy(&self) -> SpaceHierarchy {
        self.hierarchy
    }

    pub fn ticks(&self) -> &[u64] {
        &self.ticks
    }

    /// All vertex coordinates, boundary included.
    pub fn vertices(&self) -> &[f64] {
        &self.coords
    }

    /// Number of interior vertices.
    pub fn dim(&self) -> usize {
        self.coords.len() - 2
    }

    pub fn n_elements(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.coords[e], self.coords[e + 1])
    }

    pub fn h(&self, e: usize) -> f64 {
        self.coords[e + 1] - self.coords[e]
    }

    pub fn max_h(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.h(e)).fold(0.0, f64::max)
    }

    /// Element containing `x`; a vertex belongs to the element on its right
    /// except at `x = 1`.
    pub fn locate(&self, x: f64) -> usize {
        let k = self.coords.partition_point(|&v| v <= x);
        k.clamp(1, self.n_elements()) - 1
    }

    pub fn has_vertex(&self, x: f64) -> bool {
        self.hierarchy
            .tick_of(x)
            .is_some_and(|k| self.ticks.binary_search(&k).is_ok())
    }

    /// True if every vertex of `coarse` is a vertex of `self`.
    pub fn refines(&self, coarse: &FeSpace) -> bool {
        if self.hierarchy != coarse.hierarchy {
            return false;
        }
        let mut it = self.ticks.iter().peekable();
        coarse.ticks.iter().all(|k| {
            while it.peek().is_some_and(|v| *v < k) {
                it.next();
            }
            it.peek() == Some(&k)
        })
    }

    /// Splits every element into `2^levels` equal children.
    pub fn refine(&self, levels: u32) -> Result<FeSpace> {
        let mut ticks = Vec::with_capacity(self.n_elements() << levels + 1);
        for w in self.ticks.windows(2) {
            let len = w[1] - w[0];
            if len >> levels == 0 || (len >> levels) << levels != len {
                return Err(Error::InvalidMesh(format!(
                    "refining by {levels} levels exceeds max depth {}",
                    self.hierarchy.max_depth
                )));
            }
            let step = len >> levels;
            ticks.extend((0..(1u64 << levels)).map(|j| w[0] + j * step));
        }
        ticks.push(*self.ticks.last().unwrap());
        FeSpace::from_ticks(self.hierarchy, ticks)
    }

    pub fn into_ref(self) -> SpaceRef {
        Arc::new(self)
    }
}

fn check_same_tree(a: &FeSpace, b: &FeSpace) -> Result<()> {
    if a.hierarchy != b.hierarchy {
        return Err(Error::IncompatibleMeshTrees(
            a.hierarchy.max_depth,
            b.hierarchy.max_depth,
        ));
    }
    Ok(())
}

/// Smallest common superspace: the overlay of both meshes.
pub fn superspace(a: &FeSpace, b: &FeSpace) -> Result<FeSpace> {
    check_same_tree(a, b)?;
    let mut ticks = Vec::with_capacity(a.ticks.len() + b.ticks.len());
    let (mut i, mut j) = (0, 0);
    while i < a.ticks.len() || j < b.ticks.len() {
        let next = match (a.ticks.get(i), b.ticks.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        ticks.push(next);
    }
    FeSpace::from_ticks(a.hierarchy, ticks)
}

/// Largest common subspace: the common coarsening of both meshes.
pub fn subspace(a: &FeSpace, b: &FeSpace) -> Result<FeSpace> {
    check_same_tree(a, b)?;
    let ticks: Vec<u64> = a
        .ticks
        .iter()
        .copied()
        .filter(|k| b.ticks.binary_search(k).is_ok())
        .collect();
    FeSpace::from_ticks(a.hierarchy, ticks)
        .map_err(|e| Error::Invariant(format!("common coarsening is not a tree mesh: {e}")))
}

/// `superspace` on shared handles, reusing an input when it already contains the other.
pub fn superspace_ref(a: &SpaceRef, b: &SpaceRef) -> Result<SpaceRef> {
    if Arc::ptr_eq(a, b) || a.refines(b) {
        check_same_tree(a, b)?;
        return Ok(a.clone());
    }
    if b.refines(a) {
        return Ok(b.clone());
    }
    superspace(a, b).map(Arc::new)
}

pub fn subspace_ref(a: &SpaceRef, b: &SpaceRef) -> Result<SpaceRef> {
    if Arc::ptr_eq(a, b) || b.refines(a) {
        check_same_tree(a, b)?;
        return Ok(a.clone());
    }
    if a.refines(b) {
        return Ok(b.clone());
    }
    subspace(a, b).map(Arc::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h() -> SpaceHierarchy {
        SpaceHierarchy::default()
    }

    fn cuts(s: &FeSpace) -> Vec<f64> {
        let v = s.vertices();
        v[1..v.len() - 1].to_vec()
    }

    #[test]
    fn superspace_examples() {
        let a = h().from_cuts(&[0.5]).unwrap();
        let b = h().from_cuts(&[0.25, 0.5]).unwrap();
        let c = h().from_cuts(&[0.5, 0.75]).unwrap();
        assert_eq!(superspace(&a, &a).unwrap(), a);
        assert_eq!(cuts(&superspace(&a, &b).unwrap()), vec![0.25, 0.5]);
        assert_eq!(cuts(&superspace(&b, &c).unwrap()), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn subspace_examples() {
        let a = h().from_cuts(&[0.5]).unwrap();
        let b = h().from_cuts(&[0.25, 0.5]).unwrap();
        let c = h().from_cuts(&[0.5, 0.75]).unwrap();
        assert_eq!(subspace(&b, &b).unwrap(), b);
        assert_eq!(subspace(&a, &b).unwrap(), a);
        assert_eq!(cuts(&subspace(&b, &c).unwrap()), vec![0.5]);
    }

    #[test]
    fn different_trees_are_incompatible() {
        let a = SpaceHierarchy::new(10).unwrap().uniform(2).unwrap();
        let b = SpaceHierarchy::new(12).unwrap().uniform(2).unwrap();
        let err = superspace(&a, &b).unwrap_err();
        assert_eq!(err, Error::IncompatibleMeshTrees(10, 12));
        assert!(err.to_string().starts_with("incompatible mesh trees"));
        assert!(subspace(&a, &b).is_err());
    }

    #[test]
    fn non_tree_meshes_are_rejected() {
        // [0, 3/8] is not a node of the binary tree
        assert!(h().from_cuts(&[0.375]).is_err());
        assert!(h().from_cuts(&[0.1]).is_err());
        assert!(h().from_cuts(&[0.25, 0.375, 0.5]).is_ok());
    }

    #[test]
    fn uniform_and_refine() {
        let s = h().uniform(3).unwrap();
        assert_eq!(s.dim(), 7);
        assert_eq!(s.n_elements(), 8);
        let r = s.refine(2).unwrap();
        assert_eq!(r, h().uniform(5).unwrap());
        assert!(r.refines(&s) && !s.refines(&r));
        assert_eq!(s.locate(0.0), 0);
        assert_eq!(s.locate(0.125), 1);
        assert_eq!(s.locate(1.0), 7);
        assert!(SpaceHierarchy::new(4).unwrap().uniform(3).unwrap().refine(2).is_err());
    }

    fn random_mesh(seed: Vec<bool>) -> FeSpace {
        // grow a tree by splitting leaves according to the seed bits
        let hier = SpaceHierarchy::new(8).unwrap();
        let mut leaves = vec![(0u64, 256u64)];
        let mut bits = seed.into_iter();
        for _ in 0..6 {
            let mut next = Vec::new();
            for (a, b) in leaves {
                if b - a > 1 && bits.next().unwrap_or(false) {
                    let m = (a + b) / 2;
                    next.push((a, m));
                    next.push((m, b));
                } else {
                    next.push((a, b));
                }
            }
            leaves = next;
        }
        let mut ticks: Vec<u64> = leaves.iter().map(|l| l.0).collect();
        ticks.push(256);
        FeSpace::from_ticks(hier, ticks).unwrap()
    }

    proptest! {
        #[test]
        fn sub_and_super_are_nested(a in proptest::collection::vec(any::<bool>(), 64),
                                    b in proptest::collection::vec(any::<bool>(), 64)) {
            let va = random_mesh(a);
            let vb = random_mesh(b);
            let sup = superspace(&va, &vb).unwrap();
            let sub = subspace(&va, &vb).unwrap();
            prop_assert!(sup.refines(&va) && sup.refines(&vb));
            prop_assert!(va.refines(&sub) && vb.refines(&sub));
            prop_assert!(sub.dim() <= va.dim().min(vb.dim()));
            prop_assert!(va.dim().max(vb.dim()) <= sup.dim());
            // the common coarsening is maximal: adding any vertex of one
            // space that the other lacks breaks containment
            for &x in sub.vertices() {
                prop_assert!(va.has_vertex(x) && vb.has_vertex(x));
            }
        }
    }
}
