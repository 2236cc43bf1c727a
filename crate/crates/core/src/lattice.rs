//! Geometry of the square volume Λ(N), its dual lattice, the boundary chain,
//! and the distance/hull primitives every other module consumes.
//!
//! Dual sites live on Z² + (1/2, 1/2) and are stored with doubled integer
//! coordinates (2x+1, 2y+1), so all equality tests and orderings are exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A site of the primal lattice Z².
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site(pub i32, pub i32);

/// A dual-lattice site, stored in doubled coordinates: `DualSite(a, b)`
/// represents (a/2, b/2) with `a`, `b` odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DualSite(pub i32, pub i32);

impl DualSite {
    pub fn is_valid(&self) -> bool {
        self.0.rem_euclid(2) == 1 && self.1.rem_euclid(2) == 1
    }

    /// ℓ1 distance in dual-lattice steps (doubled coordinates halved).
    pub fn l1(&self, other: &DualSite) -> u32 {
        (((self.0 - other.0).abs() + (self.1 - other.1).abs()) / 2) as u32
    }
}

/// An unordered dual bond with canonically ordered endpoints (`a < b`
/// lexicographically), so equality and hashing are well defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DualBond {
    pub a: DualSite,
    pub b: DualSite,
}

impl DualBond {
    pub fn new(p: DualSite, q: DualSite) -> Self {
        debug_assert!(p.is_valid() && q.is_valid());
        debug_assert_eq!((p.0 - q.0).abs() + (p.1 - q.1).abs(), 2, "not nearest-neighbour dual sites");
        if p <= q {
            DualBond { a: p, b: q }
        } else {
            DualBond { a: q, b: p }
        }
    }

    /// The dual bond crossing the primal bond ⟨x,y⟩ (nearest neighbours).
    pub fn crossing(x: Site, y: Site) -> Self {
        debug_assert_eq!((x.0 - y.0).abs() + (x.1 - y.1).abs(), 1);
        if x.1 == y.1 {
            // horizontal primal bond -> vertical dual bond
            let mx = x.0.max(y.0); // doubled x-coordinate of the dual line is 2*min+1 = 2*max-1
            let dx = 2 * mx - 1;
            let dy = 2 * x.1;
            DualBond::new(DualSite(dx, dy - 1), DualSite(dx, dy + 1))
        } else {
            let my = x.1.max(y.1);
            let dy = 2 * my - 1;
            let dx = 2 * x.0;
            DualBond::new(DualSite(dx - 1, dy), DualSite(dx + 1, dy))
        }
    }

    pub fn endpoints(&self) -> [DualSite; 2] {
        [self.a, self.b]
    }

    /// The two primal sites separated by this dual bond.
    pub fn separated_sites(&self) -> [Site; 2] {
        if self.a.0 == self.b.0 {
            // vertical dual bond -> horizontal primal bond at the midpoint height
            let y = (self.a.1 + 1) / 2; // b.1 = a.1 + 2, midpoint doubled y = a.1 + 1
            let x_left = (self.a.0 - 1) / 2;
            [Site(x_left, y), Site(x_left + 1, y)]
        } else {
            // horizontal dual bond -> vertical primal bond
            let x = (self.a.0 + 1) / 2;
            let y_low = (self.a.1 - 1) / 2;
            [Site(x, y_low), Site(x, y_low + 1)]
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("half-side N must be at least 1, got {0}")]
    InvalidHalfSide(i32),
    #[error("half-side N = {0} too large")]
    HalfSideOverflow(i32),
    #[error("empty boundary set")]
    EmptyBoundarySet,
    #[error("bond not on the boundary of this volume")]
    NotABoundaryBond,
    #[error("empty set passed to a distance computation")]
    EmptyDistanceInput,
}

/// The square volume Λ(N) = {x ∈ Z²: ‖x‖∞ ≤ N} together with its boundary
/// chain of dual bonds and the exterior collar.
///
/// The boundary chain is ordered counterclockwise starting from the bond whose
/// exterior site is (N+1, −N); collar sites and boundary bonds are in
/// bijection and share indices.
#[derive(Debug, Clone)]
pub struct Volume {
    n: i32,
    side: i32,
    chain: Vec<DualBond>,
    collar: Vec<Site>,
    corners: [DualSite; 4],
}

impl Volume {
    pub fn new(n: i32) -> Result<Self, LatticeError> {
        if n < 1 {
            return Err(LatticeError::InvalidHalfSide(n));
        }
        if n > 10_000 {
            return Err(LatticeError::HalfSideOverflow(n));
        }
        Ok(Self::build(n))
    }

    /// Unchecked constructor used by unit-test fixtures (allows N = 0, a
    /// single-spin volume with four boundary bonds).
    pub(crate) fn unchecked(n: i32) -> Self {
        Self::build(n)
    }

    fn build(n: i32) -> Self {
        let side = 2 * n + 1;
        let mut chain = Vec::with_capacity(4 * side as usize);
        let mut collar = Vec::with_capacity(4 * side as usize);
        // right wall, upward
        for k in 0..side {
            let y = -n + k;
            chain.push(DualBond::crossing(Site(n, y), Site(n + 1, y)));
            collar.push(Site(n + 1, y));
        }
        // top wall, leftward
        for k in 0..side {
            let x = n - k;
            chain.push(DualBond::crossing(Site(x, n), Site(x, n + 1)));
            collar.push(Site(x, n + 1));
        }
        // left wall, downward
        for k in 0..side {
            let y = n - k;
            chain.push(DualBond::crossing(Site(-n, y), Site(-n - 1, y)));
            collar.push(Site(-n - 1, y));
        }
        // bottom wall, rightward
        for k in 0..side {
            let x = -n + k;
            chain.push(DualBond::crossing(Site(x, -n), Site(x, -n - 1)));
            collar.push(Site(x, -n - 1));
        }
        let c = 2 * n + 1;
        let corners = [
            DualSite(-c, -c),
            DualSite(c, -c),
            DualSite(c, c),
            DualSite(-c, c),
        ];
        Volume { n, side, chain, collar, corners }
    }

    pub fn half_side(&self) -> i32 {
        self.n
    }

    pub fn side(&self) -> i32 {
        self.side
    }

    pub fn site_count(&self) -> usize {
        (self.side * self.side) as usize
    }

    pub fn contains(&self, s: Site) -> bool {
        s.0.abs() <= self.n && s.1.abs() <= self.n
    }

    /// Row-major index of a site: (x, y) ↦ (y+N)·side + (x+N).
    pub fn site_index(&self, s: Site) -> usize {
        debug_assert!(self.contains(s));
        ((s.1 + self.n) * self.side + (s.0 + self.n)) as usize
    }

    pub fn site_at(&self, idx: usize) -> Site {
        let idx = idx as i32;
        Site(idx % self.side - self.n, idx / self.side - self.n)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.site_count()).map(|i| self.site_at(i))
    }

    /// The four corner dual sites, indexed 1..4 as
    /// (−N−½,−N−½), (N+½,−N−½), (N+½,N+½), (−N−½,N+½).
    pub fn corners(&self) -> [DualSite; 4] {
        self.corners
    }

    /// The corner site of Λ adjacent to corner dual site i (0-based).
    pub fn corner_site(&self, i: usize) -> Site {
        match i {
            0 => Site(-self.n, -self.n),
            1 => Site(self.n, -self.n),
            2 => Site(self.n, self.n),
            _ => Site(-self.n, self.n),
        }
    }

    /// Boundary bonds ∂Λ in counterclockwise chain order.
    pub fn boundary_chain(&self) -> &[DualBond] {
        &self.chain
    }

    pub fn boundary_len(&self) -> usize {
        self.chain.len()
    }

    /// Exterior collar sites; `collar()[k]` is the exterior endpoint of
    /// `boundary_chain()[k]`.
    pub fn collar(&self) -> &[Site] {
        &self.collar
    }

    pub fn chain_index(&self, bond: &DualBond) -> Option<usize> {
        // walls are ranges; resolve arithmetically
        let c = 2 * self.n + 1;
        let [p, q] = bond.endpoints();
        if p.0 == q.0 && p.0 == c {
            let k = (p.1.min(q.1) + c) / 2;
            if (0..self.side).contains(&k) {
                return Some(k as usize);
            }
        } else if p.1 == q.1 && p.1 == c {
            let k = (c - p.0.max(q.0)) / 2;
            if (0..self.side).contains(&k) {
                return Some((self.side + k) as usize);
            }
        } else if p.0 == q.0 && p.0 == -c {
            let k = (c - p.1.max(q.1)) / 2;
            if (0..self.side).contains(&k) {
                return Some((2 * self.side + k) as usize);
            }
        } else if p.1 == q.1 && p.1 == -c {
            let k = (p.0.min(q.0) + c) / 2;
            if (0..self.side).contains(&k) {
                return Some((3 * self.side + k) as usize);
            }
        }
        None
    }

    pub fn is_boundary_bond(&self, bond: &DualBond) -> bool {
        self.chain_index(bond).is_some()
    }

    /// P̲: the exterior sites of a set of boundary bonds (one per bond).
    pub fn boundary_underline(&self, bonds: &[DualBond]) -> Result<Vec<Site>, LatticeError> {
        let mut out = Vec::with_capacity(bonds.len());
        for b in bonds {
            let k = self.chain_index(b).ok_or(LatticeError::NotABoundaryBond)?;
            out.push(self.collar[k]);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn boundary_set(&self, bonds: &[DualBond]) -> Result<BoundarySet, LatticeError> {
        let mut idx = Vec::with_capacity(bonds.len());
        for b in bonds {
            idx.push(self.chain_index(b).ok_or(LatticeError::NotABoundaryBond)?);
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(BoundarySet { chain_len: self.chain.len(), side: self.side as usize, indices: idx })
    }
}

/// A subset of ∂Λ held as sorted chain indices, with its maximal
/// boundary-interval decomposition and connected hull cn(P).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySet {
    chain_len: usize,
    side: usize,
    indices: Vec<usize>,
}

impl BoundarySet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn bonds<'v>(&self, v: &'v Volume) -> Vec<DualBond> {
        self.indices.iter().map(|&k| v.boundary_chain()[k]).collect()
    }

    /// Maximal boundary intervals: runs of chain-consecutive bonds whose
    /// exterior sites stay ℓ1-adjacent, i.e. runs that do not cross a corner.
    /// Corner-adjacent bonds on different walls belong to different intervals.
    pub fn intervals(&self) -> Vec<Vec<usize>> {
        let mut runs: Vec<Vec<usize>> = Vec::new();
        for &k in &self.indices {
            match runs.last_mut() {
                Some(run) if Self::same_interval_step(*run.last().unwrap(), k, self.side) => {
                    run.push(k)
                }
                _ => runs.push(vec![k]),
            }
        }
        // no wrap-around merge: chain index 0 starts the right wall and the
        // last index ends the bottom wall, so the seam always crosses a corner
        runs
    }

    fn same_interval_step(prev: usize, next: usize, side: usize) -> bool {
        next == prev + 1 && (prev % side) != side - 1
    }

    /// cn(P): the minimal connected superset of P within ∂Λ (connectivity of
    /// dual bonds, which passes through corners). On the cyclic chain this
    /// fills every gap except the largest; ties go to the lexicographically
    /// first bond list.
    pub fn connected_hull(&self, v: &Volume) -> Result<BoundarySet, LatticeError> {
        if self.indices.is_empty() {
            return Err(LatticeError::EmptyBoundarySet);
        }
        let m = self.chain_len;
        if self.indices.len() == m {
            return Ok(self.clone());
        }
        // gaps between cyclically consecutive members
        let k = self.indices.len();
        let mut best: Option<(usize, Vec<usize>)> = None; // (gap size, candidate indices)
        for i in 0..k {
            let cur = self.indices[i];
            let next = self.indices[(i + 1) % k];
            let gap = (next + m - cur - 1) % m;
            if gap == 0 {
                continue;
            }
            // candidate hull: everything except the open gap (cur, next)
            let mut cand: Vec<usize> = Vec::with_capacity(m - gap);
            let mut j = next;
            loop {
                cand.push(j);
                if j == cur {
                    break;
                }
                j = (j + 1) % m;
            }
            cand.sort_unstable();
            let better = match &best {
                None => true,
                Some((bg, bc)) => gap > *bg || (gap == *bg && cand < *bc),
            };
            if better {
                best = Some((gap, cand));
            }
        }
        let indices = match best {
            Some((_, cand)) => cand,
            // single run with no gap: P itself is connected
            None => self.indices.clone(),
        };
        let _ = v;
        Ok(BoundarySet { chain_len: m, side: self.side, indices })
    }

    /// |P|_con = |cn(P)|.
    pub fn hull_len(&self, v: &Volume) -> Result<usize, LatticeError> {
        Ok(self.connected_hull(v)?.len())
    }
}

/// d[A*, B*]: length of the shortest dual-lattice chain joining the dual-site
/// sets of two dual-bond sets; 0 iff they share a dual site.
pub fn dual_distance(a: &[DualBond], b: &[DualBond]) -> Result<u32, LatticeError> {
    if a.is_empty() || b.is_empty() {
        return Err(LatticeError::EmptyDistanceInput);
    }
    let mut best = u32::MAX;
    for ba in a {
        for pa in ba.endpoints() {
            for bb in b {
                for pb in bb.endpoints() {
                    best = best.min(pa.l1(&pb));
                }
            }
        }
    }
    Ok(best)
}

/// Distance of a dual site to a set of dual bonds.
pub fn dual_site_to_bonds(p: DualSite, b: &[DualBond]) -> Result<u32, LatticeError> {
    if b.is_empty() {
        return Err(LatticeError::EmptyDistanceInput);
    }
    Ok(b.iter()
        .flat_map(|bb| bb.endpoints())
        .map(|q| p.l1(&q))
        .min()
        .unwrap())
}

/// ℓ1 distance between nonempty site sets.
pub fn site_distance(a: &[Site], b: &[Site]) -> Result<u32, LatticeError> {
    if a.is_empty() || b.is_empty() {
        return Err(LatticeError::EmptyDistanceInput);
    }
    let mut best = u32::MAX;
    for x in a {
        for y in b {
            best = best.min(((x.0 - y.0).abs() + (x.1 - y.1).abs()) as u32);
        }
    }
    Ok(best)
}
