//! The two-to-one correspondence between spin configurations and contour
//! families: broken bonds, the rounding-corner split into pre-contours,
//! interior/exterior classification, gluing of boundary-matching
//! pre-contours into contours, contour weights, and interface detection.
//!
//! Rounding convention at degree-4 dual vertices: the four incident bond
//! slots pair as (W,S) and (N,E). Two diagonally adjacent minus spins on the
//! NE/SW diagonal then split into two closed curves; the conjugate diagonal
//! produces one self-touching curve, whose sides are still well defined via
//! the walk orientation.

use crate::lattice::{dual_site_to_bonds, DualBond, DualSite, Site, Volume};
use crate::model::{BoundaryCondition, CouplingParams, SpinConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContourError {
    #[error("broken-bond set has odd degree at an interior dual vertex (not realizable)")]
    ParityViolation,
    #[error("walk consistency failure during curve extraction")]
    WalkFailure,
    #[error("side assignment conflict during classification")]
    SideConflict,
    #[error("height is defined only for small boundary contours")]
    HeightUndefined,
    #[error("contours in a family must be pairwise compatible")]
    IncompatibleFamily,
    #[error("bond is not a bulk dual bond of this volume")]
    NotABulkBond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreContourClass {
    Bulk,
    SmallBoundary,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContourClass {
    Bulk,
    SimpleSmall,
    CornerSmall,
    LargeBoundary,
}

/// A simple (open or closed) curve of dual bonds from the rounding-corner
/// split, with its interior/exterior decomposition of Λ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreContour {
    pub curve: Vec<DualBond>,
    pub closed: bool,
    pub class: PreContourClass,
    /// Site indices (row-major) of the interior, sorted.
    pub interior: Vec<u32>,
    /// Chain indices of ∂γ = ∂Int(γ), sorted.
    pub boundary: Vec<u32>,
}

impl PreContour {
    pub fn len(&self) -> usize {
        self.curve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve.is_empty()
    }
}

/// A maximal boundary-matching group of pre-contours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub precontours: Vec<PreContour>,
    pub class: ContourClass,
    /// Chain indices of ∂Γ, sorted.
    pub boundary: Vec<u32>,
    /// Chain indices of ∂Γ⁻ / ∂Γ⁺ (signs read from the σ ∈ Ω⁺ realization
    /// with D(σ) = {Γ}), sorted. Disjoint union is `boundary`.
    pub boundary_minus: Vec<u32>,
    pub boundary_plus: Vec<u32>,
    /// Site indices of Int(Γ), sorted.
    pub interior: Vec<u32>,
}

impl Contour {
    /// |Γ| = total number of dual bonds over all member curves.
    pub fn len(&self) -> usize {
        self.precontours.iter().map(|g| g.curve.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.precontours.is_empty()
    }

    /// Canonical identity: the sorted list of all curve bonds.
    pub fn key(&self) -> Vec<DualBond> {
        let mut k: Vec<DualBond> = self
            .precontours
            .iter()
            .flat_map(|g| g.curve.iter().cloned())
            .collect();
        k.sort_unstable();
        k
    }

    pub fn all_bonds(&self) -> impl Iterator<Item = &DualBond> {
        self.precontours.iter().flat_map(|g| g.curve.iter())
    }

    pub fn is_boundary(&self) -> bool {
        !self.boundary.is_empty()
    }
}

/// Δ_Λ(σ): dual bonds of unequal nearest-neighbour pairs inside Λ.
pub fn broken_bonds(sigma: &SpinConfig, v: &Volume) -> Vec<DualBond> {
    let n = v.half_side();
    let mut out = Vec::new();
    for s in v.sites() {
        let sv = sigma.get(s);
        if s.0 < n && sv != sigma.get(Site(s.0 + 1, s.1)) {
            out.push(DualBond::crossing(s, Site(s.0 + 1, s.1)));
        }
        if s.1 < n && sv != sigma.get(Site(s.0, s.1 + 1)) {
            out.push(DualBond::crossing(s, Site(s.0, s.1 + 1)));
        }
    }
    out
}

// direction slots: 0 = E, 1 = N, 2 = W, 3 = S
const DIR_STEP: [(i32, i32); 4] = [(2, 0), (0, 2), (-2, 0), (0, -2)];

fn opposite(d: usize) -> usize {
    (d + 2) % 4
}

/// Degree-4 pairing: (W,S) together and (N,E) together.
fn paired_slot(d: usize) -> usize {
    match d {
        0 => 1, // E <-> N
        1 => 0,
        2 => 3, // W <-> S
        _ => 2,
    }
}

struct DualGrid {
    c: i32, // 2N+1: ring coordinate magnitude
    vdim: i32,
}

impl DualGrid {
    fn new(v: &Volume) -> Self {
        let c = 2 * v.half_side() + 1;
        DualGrid { c, vdim: c + 1 }
    }

    fn vertex_index(&self, p: DualSite) -> usize {
        let gx = (p.0 + self.c) / 2;
        let gy = (p.1 + self.c) / 2;
        (gy * self.vdim + gx) as usize
    }

    fn vertex_at(&self, idx: usize) -> DualSite {
        let gx = idx as i32 % self.vdim;
        let gy = idx as i32 / self.vdim;
        DualSite(2 * gx - self.c, 2 * gy - self.c)
    }

    fn on_ring(&self, p: DualSite) -> bool {
        p.0.abs() == self.c || p.1.abs() == self.c
    }

    fn count(&self) -> usize {
        (self.vdim * self.vdim) as usize
    }
}

/// A directed walk step: start vertex and direction slot.
type Step = (DualSite, u8);

struct RawCurve {
    bonds: Vec<DualBond>,
    steps: Vec<Step>,
    closed: bool,
}

fn extract_raw_curves(delta: &[DualBond], v: &Volume) -> Result<Vec<RawCurve>, ContourError> {
    let grid = DualGrid::new(v);
    let mut incident = vec![0u8; grid.count()]; // bitmask over direction slots
    for b in delta {
        let [p, q] = b.endpoints();
        let d = if q.0 > p.0 {
            0
        } else if q.1 > p.1 {
            1
        } else if q.0 < p.0 {
            2
        } else {
            3
        };
        incident[grid.vertex_index(p)] |= 1 << d;
        incident[grid.vertex_index(q)] |= 1 << opposite(d);
    }
    // parity: interior dual vertices must have even degree
    for idx in 0..grid.count() {
        let p = grid.vertex_at(idx);
        if !grid.on_ring(p) && (incident[idx].count_ones() % 2 == 1) {
            return Err(ContourError::ParityViolation);
        }
    }
    let original = incident.clone();
    let mut unused = incident;
    let mut curves = Vec::new();

    let mut walk = |start: DualSite,
                    first_dir: usize,
                    unused: &mut Vec<u8>|
     -> Result<RawCurve, ContourError> {
        let mut bonds = Vec::new();
        let mut steps = Vec::new();
        let mut cur = start;
        let mut dir = first_dir;
        loop {
            let ci = grid.vertex_index(cur);
            if unused[ci] & (1 << dir) == 0 {
                return Err(ContourError::WalkFailure);
            }
            let (dx, dy) = DIR_STEP[dir];
            let next = DualSite(cur.0 + dx, cur.1 + dy);
            let ni = grid.vertex_index(next);
            unused[ci] &= !(1 << dir);
            unused[ni] &= !(1 << opposite(dir));
            bonds.push(DualBond::new(cur, next));
            steps.push((cur, dir as u8));
            // continuation out of `next`
            let in_slot = opposite(dir);
            let deg = original[ni].count_ones();
            let cont = if deg == 4 {
                paired_slot(in_slot)
            } else {
                // degree 2 (or walk end): the other original slot if any
                let others = original[ni] & !(1 << in_slot);
                if others == 0 {
                    // open end on the ring
                    return Ok(RawCurve { bonds, steps, closed: false });
                }
                others.trailing_zeros() as usize
            };
            if unused[ni] & (1 << cont) == 0 {
                // closed: continuation already consumed (we are back at the start)
                if next == start && !bonds.is_empty() {
                    return Ok(RawCurve { bonds, steps, closed: true });
                }
                if grid.on_ring(next) {
                    return Ok(RawCurve { bonds, steps, closed: false });
                }
                return Err(ContourError::WalkFailure);
            }
            cur = next;
            dir = cont;
        }
    };

    // open curves first: start from ring vertices with an unused edge
    for idx in 0..grid.count() {
        let p = grid.vertex_at(idx);
        if grid.on_ring(p) && unused[idx] != 0 {
            let d = unused[idx].trailing_zeros() as usize;
            curves.push(walk(p, d, &mut unused)?);
        }
    }
    // remaining edges form closed curves
    for idx in 0..grid.count() {
        while unused[idx] != 0 {
            let p = grid.vertex_at(idx);
            let d = unused[idx].trailing_zeros() as usize;
            curves.push(walk(p, d, &mut unused)?);
        }
    }
    Ok(curves)
}

/// Left/right primal sites of a directed dual step.
fn step_sides(from: DualSite, dir: usize) -> (Site, Site) {
    match dir {
        0 => {
            // east: crosses vertical primal bond; left = north site
            let x = (from.0 + 1) / 2;
            let yl = (from.1 - 1) / 2;
            (Site(x, yl + 1), Site(x, yl))
        }
        1 => {
            // north: crosses horizontal primal bond; left = west site
            let y = (from.1 + 1) / 2;
            let xl = (from.0 - 1) / 2;
            (Site(xl, y), Site(xl + 1, y))
        }
        2 => {
            // west
            let x = (from.0 - 1) / 2;
            let yl = (from.1 - 1) / 2;
            (Site(x, yl), Site(x, yl + 1))
        }
        _ => {
            // south
            let y = (from.1 - 1) / 2;
            let xl = (from.0 - 1) / 2;
            (Site(xl + 1, y), Site(xl, y))
        }
    }
}

fn bulk_bond_id(v: &Volume, a: Site, b: Site) -> u32 {
    // id = 2 * site_index(lower endpoint) + orientation
    if a.1 == b.1 {
        let left = if a.0 < b.0 { a } else { b };
        2 * v.site_index(left) as u32
    } else {
        let low = if a.1 < b.1 { a } else { b };
        2 * v.site_index(low) as u32 + 1
    }
}

/// Classify one raw curve: flood-fill the two sides, assign Ext/Int per the
/// corner rules, and read off the boundary component ∂γ.
fn classify_raw(raw: &RawCurve, v: &Volume) -> Result<PreContour, ContourError> {
    let nsites = v.site_count();
    let mut blocked = vec![false; 2 * nsites]; // by bulk bond id
    for b in &raw.bonds {
        let [x, y] = b.separated_sites();
        if !v.contains(x) || !v.contains(y) {
            return Err(ContourError::NotABulkBond);
        }
        blocked[bulk_bond_id(v, x, y) as usize] = true;
    }
    // flood fill components with an explicit work queue
    let mut label = vec![u32::MAX; nsites];
    let mut ncomp = 0u32;
    let mut queue: Vec<u32> = Vec::new();
    let n = v.half_side();
    for start in 0..nsites {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = ncomp;
        queue.clear();
        queue.push(start as u32);
        while let Some(cur) = queue.pop() {
            let s = v.site_at(cur as usize);
            let mut try_step = |t: Site, label: &mut Vec<u32>, queue: &mut Vec<u32>| {
                let id = bulk_bond_id(v, s, t) as usize;
                if !blocked[id] {
                    let ti = v.site_index(t);
                    if label[ti] == u32::MAX {
                        label[ti] = ncomp;
                        queue.push(ti as u32);
                    }
                }
            };
            if s.0 < n {
                try_step(Site(s.0 + 1, s.1), &mut label, &mut queue);
            }
            if s.0 > -n {
                try_step(Site(s.0 - 1, s.1), &mut label, &mut queue);
            }
            if s.1 < n {
                try_step(Site(s.0, s.1 + 1), &mut label, &mut queue);
            }
            if s.1 > -n {
                try_step(Site(s.0, s.1 - 1), &mut label, &mut queue);
            }
        }
        ncomp += 1;
    }
    // side marks from the walk orientation: 1 = left, 2 = right
    let mut side_of_comp = vec![0u8; ncomp as usize];
    for &(from, dir) in &raw.steps {
        let (l, r) = step_sides(from, dir as usize);
        for (site, mark) in [(l, 1u8), (r, 2u8)] {
            if v.contains(site) {
                let c = label[v.site_index(site)] as usize;
                if side_of_comp[c] != 0 && side_of_comp[c] != mark {
                    return Err(ContourError::SideConflict);
                }
                side_of_comp[c] = mark;
            }
        }
    }
    if side_of_comp.iter().any(|&m| m == 0) {
        return Err(ContourError::SideConflict);
    }
    // gather the two sides
    let mut left_sites: Vec<u32> = Vec::new();
    let mut right_sites: Vec<u32> = Vec::new();
    for i in 0..nsites {
        if side_of_comp[label[i] as usize] == 1 {
            left_sites.push(i as u32);
        } else {
            right_sites.push(i as u32);
        }
    }
    // boundary bonds of each side
    let mut left_bnd: Vec<u32> = Vec::new();
    let mut right_bnd: Vec<u32> = Vec::new();
    for (k, bond) in v.boundary_chain().iter().enumerate() {
        let [x, y] = bond.separated_sites();
        let inner = if v.contains(x) { x } else { y };
        if side_of_comp[label[v.site_index(inner)] as usize] == 1 {
            left_bnd.push(k as u32);
        } else {
            right_bnd.push(k as u32);
        }
    }
    // corner membership by corner site
    let corners_left = (0..4)
        .filter(|&i| side_of_comp[label[v.site_index(v.corner_site(i))] as usize] == 1)
        .count();

    // decide exterior/interior
    let (class, left_is_ext) = if raw.closed {
        // closed curve: the interior never touches the wall
        let left_ext = !left_bnd.is_empty();
        debug_assert!(left_bnd.is_empty() || right_bnd.is_empty());
        (PreContourClass::Bulk, left_ext)
    } else {
        let cl = corners_left;
        let cr = 4 - cl;
        if cl >= 3 {
            (PreContourClass::SmallBoundary, true)
        } else if cr >= 3 {
            (PreContourClass::SmallBoundary, false)
        } else {
            // interface: larger side wins; tie decided by corner 1 = (−N,−N)
            let ext_left = match left_sites.len().cmp(&right_sites.len()) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => {
                    side_of_comp[label[v.site_index(v.corner_site(0))] as usize] == 1
                }
            };
            (PreContourClass::Interface, ext_left)
        }
    };
    let (interior, boundary) = if left_is_ext {
        (right_sites, right_bnd)
    } else {
        (left_sites, left_bnd)
    };
    Ok(PreContour { curve: raw.bonds.clone(), closed: raw.closed, class, interior, boundary })
}

/// Rounding-corner split of a broken-bond set into pre-contours.
pub fn split_precontours(delta: &[DualBond], v: &Volume) -> Result<Vec<PreContour>, ContourError> {
    let raws = extract_raw_curves(delta, v)?;
    raws.iter().map(|r| classify_raw(r, v)).collect()
}

/// Pre-contours of a configuration.
pub fn extract_precontours(sigma: &SpinConfig, v: &Volume) -> Result<Vec<PreContour>, ContourError> {
    split_precontours(&broken_bonds(sigma, v), v)
}

/// Chain dual-site closure of a set of boundary bonds, as sorted ring-vertex
/// indices (bond k has ring vertices k and k+1 mod m).
fn chain_closure(boundary: &[u32], m: usize) -> Vec<u32> {
    let mut s: Vec<u32> = boundary
        .iter()
        .flat_map(|&k| [k, (k + 1) % m as u32])
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

fn closures_intersect(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    false
}

/// Glue boundary-matching pre-contours (shared dual sites between their ∂γ
/// closures) into contours and classify them.
pub fn glue_contours(precontours: Vec<PreContour>, v: &Volume) -> Vec<Contour> {
    let m = v.boundary_len();
    let closures: Vec<Vec<u32>> = precontours
        .iter()
        .map(|g| chain_closure(&g.boundary, m))
        .collect();
    let k = precontours.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = i;
        while parent[c] != r {
            let nxt = parent[c];
            parent[c] = r;
            c = nxt;
        }
        r
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if !closures[i].is_empty()
                && !closures[j].is_empty()
                && closures_intersect(&closures[i], &closures[j])
            {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..k {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut order: Vec<Vec<usize>> = groups.into_values().collect();
    // deterministic ordering by smallest first bond
    order.sort_by_key(|g| {
        g.iter()
            .map(|&i| precontours[i].curve.first().cloned())
            .min()
            .flatten()
    });
    let mut taken: Vec<Option<PreContour>> = precontours.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|idxs| {
            let members: Vec<PreContour> =
                idxs.into_iter().map(|i| taken[i].take().unwrap()).collect();
            assemble_contour(members, v)
        })
        .collect()
}

fn assemble_contour(members: Vec<PreContour>, v: &Volume) -> Contour {
    let mut boundary: Vec<u32> = members.iter().flat_map(|g| g.boundary.iter().cloned()).collect();
    boundary.sort_unstable();
    boundary.dedup();
    let mut interior: Vec<u32> = members.iter().flat_map(|g| g.interior.iter().cloned()).collect();
    interior.sort_unstable();
    interior.dedup();
    let class = if members.iter().any(|g| g.class == PreContourClass::Interface) {
        ContourClass::LargeBoundary
    } else if boundary.is_empty() {
        ContourClass::Bulk
    } else {
        let m = v.boundary_len();
        let closure = chain_closure(&boundary, m);
        let side = v.side() as u32;
        let corner_ring = [0u32, side, 2 * side, 3 * side]; // SE, NE, NW, SW ring vertices
        let ncorners = corner_ring
            .iter()
            .filter(|&&r| closure.binary_search(&r).is_ok())
            .count();
        match ncorners {
            0 => ContourClass::SimpleSmall,
            1 => ContourClass::CornerSmall,
            // ≥ 2 corners in ∂Γ implies an interface member; unreachable here
            _ => ContourClass::LargeBoundary,
        }
    };
    // read ∂Γ^± from the single-contour realization σ ∈ Ω⁺ with D(σ) = {Γ}
    let mut realized = SpinConfig::all_plus(v);
    for g in &members {
        for &si in &g.interior {
            let s = v.site_at(si as usize);
            realized.flip(s);
        }
    }
    let mut boundary_minus = Vec::new();
    let mut boundary_plus = Vec::new();
    for &k in &boundary {
        let [x, y] = v.boundary_chain()[k as usize].separated_sites();
        let inner = if v.contains(x) { x } else { y };
        if realized.get(inner) == -1 {
            boundary_minus.push(k);
        } else {
            boundary_plus.push(k);
        }
    }
    Contour { precontours: members, class, boundary, boundary_minus, boundary_plus, interior }
}

/// Full extraction: configuration → compatible contour family D_Λ(σ).
pub fn extract_contours(sigma: &SpinConfig, v: &Volume) -> Result<Vec<Contour>, ContourError> {
    Ok(glue_contours(extract_precontours(sigma, v)?, v))
}

/// The exterior spin value of σ (sign of σ on ext(D_Λ(σ))).
///
/// Uses σ(x) = sign · (−1)^{#interiors containing x} at the reference site
/// (−N, −N).
pub fn exterior_sign(sigma: &SpinConfig, v: &Volume) -> i8 {
    let pres = extract_precontours(sigma, v).expect("configuration always extracts");
    let x_ref = v.site_index(Site(-v.half_side(), -v.half_side())) as u32;
    let depth = pres
        .iter()
        .filter(|g| g.interior.binary_search(&x_ref).is_ok())
        .count();
    let s = sigma.get(Site(-v.half_side(), -v.half_side()));
    if depth % 2 == 0 {
        s
    } else {
        -s
    }
}

/// True iff some pre-contour of σ is an interface.
pub fn detect_interface(sigma: &SpinConfig, v: &Volume) -> bool {
    extract_precontours(sigma, v)
        .map(|ps| ps.iter().any(|g| g.class == PreContourClass::Interface))
        .unwrap_or(false)
}

/// log ρ^η(Γ) = −2β|Γ| − 2λβ Σ_{x ∈ ∂Γ⁻̲} ηx; bulk contours have no
/// boundary term.
pub fn contour_weight(gamma: &Contour, eta: &BoundaryCondition, p: &CouplingParams) -> f64 {
    let field: i32 = gamma
        .boundary_minus
        .iter()
        .map(|&k| eta.collar(k as usize) as i32)
        .sum();
    -2.0 * p.beta * gamma.len() as f64 - 2.0 * p.lambda * p.beta * field as f64
}

/// The unique σ ∈ Ω^sign with D_Λ(σ) = family.
pub fn config_from_contours(
    family: &[&Contour],
    sign: i8,
    v: &Volume,
) -> Result<SpinConfig, ContourError> {
    let mut sigma = if sign == 1 { SpinConfig::all_plus(v) } else { SpinConfig::all_minus(v) };
    for c in family {
        for g in &c.precontours {
            for &si in &g.interior {
                sigma.flip(v.site_at(si as usize));
            }
        }
    }
    Ok(sigma)
}

/// Compatibility of two contours: they jointly occur in some configuration.
/// Checked definitionally by reconstructing and re-extracting.
pub fn compatible(a: &Contour, b: &Contour, v: &Volume) -> bool {
    // overlapping bond sets are never compatible
    let ka = a.key();
    let kb = b.key();
    {
        let (mut i, mut j) = (0, 0);
        while i < ka.len() && j < kb.len() {
            match ka[i].cmp(&kb[j]) {
                std::cmp::Ordering::Equal => return false,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
    }
    let sigma = match config_from_contours(&[a, b], 1, v) {
        Ok(s) => s,
        Err(_) => return false,
    };
    match extract_contours(&sigma, v) {
        Ok(extracted) => {
            if extracted.len() != 2 {
                return false;
            }
            let mut keys: Vec<Vec<DualBond>> = extracted.iter().map(|c| c.key()).collect();
            keys.sort();
            let mut expect = vec![ka, kb];
            expect.sort();
            keys == expect
        }
        Err(_) => false,
    }
}

/// Pairwise compatibility of a whole family.
pub fn family_compatible(family: &[&Contour], v: &Volume) -> bool {
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            if !compatible(family[i], family[j], v) {
                return false;
            }
        }
    }
    true
}

/// Height of a small boundary contour: distance of the farthest curve point
/// from ∂Γ (simple) or from the corner rectangle R(Γ) (corner).
pub fn height(gamma: &Contour, v: &Volume) -> Result<u32, ContourError> {
    match gamma.class {
        ContourClass::SimpleSmall => {
            let bnd: Vec<DualBond> = gamma
                .boundary
                .iter()
                .map(|&k| v.boundary_chain()[k as usize])
                .collect();
            let mut h = 0;
            for b in gamma.all_bonds() {
                for p in b.endpoints() {
                    h = h.max(dual_site_to_bonds(p, &bnd).unwrap());
                }
            }
            Ok(h)
        }
        ContourClass::CornerSmall => {
            // R(Γ): rectangle spanned by the two arc endpoints and the corner
            let m = v.boundary_len();
            let closure = chain_closure(&gamma.boundary, m);
            let side = v.side() as u32;
            let corner_ring = [0u32, side, 2 * side, 3 * side];
            let corner_idx = corner_ring
                .iter()
                .position(|&r| closure.binary_search(&r).is_ok())
                .expect("corner small contour has a corner in its boundary closure");
            let corners = v.corners();
            // paper corner order: ring SE=corner 2, NE=3, NW=4, SW=1
            let corner = match corner_idx {
                0 => corners[1],
                1 => corners[2],
                2 => corners[3],
                _ => corners[0],
            };
            // arc endpoints: extreme ring vertices of the closure, as dual sites
            let ring_vertex = |r: u32| -> DualSite {
                let b = v.boundary_chain()[(r as usize) % m];
                let nb = v.boundary_chain()[((r as usize) + m - 1) % m];
                // the vertex shared by bonds r−1 and r
                let shared = b
                    .endpoints()
                    .into_iter()
                    .find(|p| nb.endpoints().contains(p))
                    .expect("consecutive chain bonds share a vertex");
                shared
            };
            // endpoints: ring vertices of the closure with only one incident
            // boundary bond inside ∂Γ's hull; take extremes along the arc
            let hull = crate::lattice::Volume::boundary_set(v, &gamma
                .boundary
                .iter()
                .map(|&k| v.boundary_chain()[k as usize])
                .collect::<Vec<_>>())
            .unwrap()
            .connected_hull(v)
            .unwrap();
            let hs = hull.indices();
            // arc runs from first to last+1 in cyclic order; find the gap
            let mut start = hs[0] as u32;
            let mut end = (*hs.last().unwrap() as u32 + 1) % m as u32;
            if hs.len() < m {
                // locate the cyclic gap to orient the arc
                let mut present = vec![false; m];
                for &i in hs {
                    present[i] = true;
                }
                for w in 0..m {
                    if present[w] && !present[(w + m - 1) % m] {
                        start = w as u32;
                    }
                    if present[w] && !present[(w + 1) % m] {
                        end = (w as u32 + 1) % m as u32;
                    }
                }
            }
            let e1 = ring_vertex(start);
            let e2 = ring_vertex(end);
            let xs = [e1.0, e2.0, corner.0];
            let ys = [e1.1, e2.1, corner.1];
            let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
            let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
            let mut h = 0u32;
            for b in gamma.all_bonds() {
                for p in b.endpoints() {
                    let dx = if p.0 < x0 {
                        x0 - p.0
                    } else if p.0 > x1 {
                        p.0 - x1
                    } else {
                        0
                    };
                    let dy = if p.1 < y0 {
                        y0 - p.1
                    } else if p.1 > y1 {
                        p.1 - y1
                    } else {
                        0
                    };
                    h = h.max(((dx + dy) / 2) as u32);
                }
            }
            Ok(h)
        }
        _ => Err(ContourError::HeightUndefined),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1() -> Volume {
        Volume::new(1).unwrap()
    }

    fn cfg(v: &Volume, minus: &[Site]) -> SpinConfig {
        let mut s = SpinConfig::all_plus(v);
        for &m in minus {
            s.set(m, -1);
        }
        s
    }

    #[test]
    fn broken_bonds_examples() {
        let v = v1();
        assert!(broken_bonds(&SpinConfig::all_plus(&v), &v).is_empty());
        let single = cfg(&v, &[Site(0, 0)]);
        assert_eq!(broken_bonds(&single, &v).len(), 4);
        // checkerboard on Λ(1): all 12 internal dual bonds
        let mut cb = SpinConfig::all_plus(&v);
        for s in v.sites() {
            if (s.0 + s.1).rem_euclid(2) == 1 {
                cb.set(s, -1);
            }
        }
        assert_eq!(broken_bonds(&cb, &v).len(), 12);
    }

    #[test]
    fn single_square_is_one_bulk_precontour() {
        let v = v1();
        let pres = extract_precontours(&cfg(&v, &[Site(0, 0)]), &v).unwrap();
        assert_eq!(pres.len(), 1);
        assert!(pres[0].closed);
        assert_eq!(pres[0].len(), 4);
        assert_eq!(pres[0].class, PreContourClass::Bulk);
        assert_eq!(pres[0].interior, vec![v.site_index(Site(0, 0)) as u32]);
        assert!(pres[0].boundary.is_empty());
    }

    #[test]
    fn two_disjoint_squares() {
        let v = Volume::new(2).unwrap();
        let pres = extract_precontours(&cfg(&v, &[Site(0, 0), Site(0, -2)]), &v).unwrap();
        // (0,-2) touches the wall: open curve; (0,0) bulk square
        assert_eq!(pres.len(), 2);
        let v3 = Volume::new(3).unwrap();
        let pres = extract_precontours(&cfg(&v3, &[Site(0, 0), Site(2, 2)]), &v3).unwrap();
        assert_eq!(pres.len(), 2);
        assert!(pres.iter().all(|g| g.closed && g.len() == 4));
    }

    #[test]
    fn ne_sw_diagonal_splits_into_two_closed_curves() {
        let v = Volume::new(2).unwrap();
        // minus pair on the NE/SW diagonal
        let pres = extract_precontours(&cfg(&v, &[Site(0, 0), Site(1, 1)]), &v).unwrap();
        assert_eq!(pres.len(), 2);
        assert!(pres.iter().all(|g| g.closed && g.len() == 4));
        // round trip: reconstruct from the glued family
        let contours = glue_contours(pres, &v);
        assert_eq!(contours.len(), 2);
        let refs: Vec<&Contour> = contours.iter().collect();
        let sigma = config_from_contours(&refs, 1, &v).unwrap();
        assert_eq!(sigma, cfg(&v, &[Site(0, 0), Site(1, 1)]));
    }

    #[test]
    fn nw_se_diagonal_is_one_self_touching_curve() {
        let v = Volume::new(2).unwrap();
        let pres = extract_precontours(&cfg(&v, &[Site(0, 1), Site(1, 0)]), &v).unwrap();
        assert_eq!(pres.len(), 1);
        assert!(pres[0].closed);
        assert_eq!(pres[0].len(), 8);
        assert_eq!(pres[0].interior.len(), 2);
    }

    #[test]
    fn interface_classification() {
        let v = Volume::new(2).unwrap();
        // top-half plus / bottom-half minus: horizontal cut
        let mut s = SpinConfig::all_plus(&v);
        for site in v.sites() {
            if site.1 <= 0 {
                s.set(site, -1);
            }
        }
        let pres = extract_precontours(&s, &v).unwrap();
        assert_eq!(pres.len(), 1);
        assert_eq!(pres[0].class, PreContourClass::Interface);
        // Ext is the larger half (15 sites, y ≤ 0)
        assert_eq!(pres[0].interior.len(), 10);
        assert!(detect_interface(&s, &v));
        assert!(!detect_interface(&SpinConfig::all_plus(&v), &v));
    }

    #[test]
    fn small_boundary_classification() {
        let v = Volume::new(2).unwrap();
        // cut one corner region off: minus at the corner site (2,2)
        let pres = extract_precontours(&cfg(&v, &[Site(2, 2)]), &v).unwrap();
        assert_eq!(pres.len(), 1);
        assert!(!pres[0].closed);
        assert_eq!(pres[0].class, PreContourClass::SmallBoundary);
        assert_eq!(pres[0].interior, vec![v.site_index(Site(2, 2)) as u32]);
        assert_eq!(pres[0].boundary.len(), 2);
    }

    #[test]
    fn exterior_sign_examples() {
        let v = v1();
        assert_eq!(exterior_sign(&SpinConfig::all_plus(&v), &v), 1);
        assert_eq!(exterior_sign(&SpinConfig::all_minus(&v), &v), -1);
        assert_eq!(exterior_sign(&cfg(&v, &[Site(0, 0)]), &v), 1);
    }

    #[test]
    fn contour_classes_and_weights() {
        let v = Volume::new(2).unwrap();
        let p = CouplingParams::new(1.0).unwrap();
        // bulk square
        let contours = extract_contours(&cfg(&v, &[Site(0, 0)]), &v).unwrap();
        assert_eq!(contours.len(), 1);
        assert_eq!(contours[0].class, ContourClass::Bulk);
        let eta = BoundaryCondition::uniform(&v, 1);
        assert!((contour_weight(&contours[0], &eta, &p) - (-8.0)).abs() < 1e-12);
        // simple small contour over three wall sites: |Γ| = 5, ∂Γ⁻ 3 sites
        let strip = cfg(&v, &[Site(-1, -2), Site(0, -2), Site(1, -2)]);
        let contours = extract_contours(&strip, &v).unwrap();
        assert_eq!(contours.len(), 1);
        assert_eq!(contours[0].class, ContourClass::SimpleSmall);
        assert_eq!(contours[0].len(), 5);
        assert_eq!(contours[0].boundary_minus.len(), 3);
        assert!(contours[0].boundary_plus.is_empty());
        let mut collar = vec![1i8; v.boundary_len()];
        for &k in &contours[0].boundary_minus {
            collar[k as usize] = -1;
        }
        let eta_m = BoundaryCondition::from_values(&v, collar).unwrap();
        assert!((contour_weight(&contours[0], &eta_m, &p) - (-4.0)).abs() < 1e-12);
        assert!((contour_weight(&contours[0], &eta, &p) - (-16.0)).abs() < 1e-12);
    }

    #[test]
    fn glue_rules() {
        let v = Volume::new(2).unwrap();
        // two bulk squares: two contours
        let contours = extract_contours(&cfg(&v, &[Site(0, 0), Site(0, -2)]), &v).unwrap();
        assert_eq!(contours.len(), 2);
        // nested wall structure: one glued contour from two pre-contours
        let sigma = cfg(&v, &[Site(-1, -2), Site(0, -2), Site(1, -2), Site(-1, -1), Site(0, -1), Site(1, -1)]);
        let mut sigma = sigma;
        sigma.set(Site(0, -2), 1); // plus hole at the wall inside the minus block
        let contours = extract_contours(&sigma, &v).unwrap();
        assert_eq!(contours.len(), 1);
        assert!(contours[0].precontours.len() >= 2);
        assert!(!contours[0].boundary_plus.is_empty());
        assert!(!contours[0].boundary_minus.is_empty());
    }

    #[test]
    fn heights() {
        let v = Volume::new(3).unwrap();
        // 1×3 strip on the bottom wall
        let strip = cfg(&v, &[Site(-1, -3), Site(0, -3), Site(1, -3)]);
        let c = extract_contours(&strip, &v).unwrap();
        assert_eq!(height(&c[0], &v).unwrap(), 1);
        // bump of depth 3: a 1-wide column of minuses going 3 deep
        let bump = cfg(&v, &[Site(0, -3), Site(0, -2), Site(0, -1)]);
        let c = extract_contours(&bump, &v).unwrap();
        assert_eq!(c[0].class, ContourClass::SimpleSmall);
        assert_eq!(height(&c[0], &v).unwrap(), 3);
        // corner contour lying on its rectangle
        let corner = cfg(&v, &[Site(3, 3)]);
        let c = extract_contours(&corner, &v).unwrap();
        assert_eq!(c[0].class, ContourClass::CornerSmall);
        assert_eq!(height(&c[0], &v).unwrap(), 0);
        // bulk contour has no height
        let bulk = extract_contours(&cfg(&v, &[Site(0, 0)]), &v).unwrap();
        assert!(height(&bulk[0], &v).is_err());
    }

    #[test]
    fn compatibility_definitional() {
        let v = Volume::new(2).unwrap();
        let a = extract_contours(&cfg(&v, &[Site(0, 0)]), &v).unwrap().remove(0);
        let b = extract_contours(&cfg(&v, &[Site(0, -2)]), &v).unwrap().remove(0);
        assert!(compatible(&a, &b, &v));
        // a contour is never compatible with itself
        assert!(!compatible(&a, &a, &v));
    }

    #[test]
    fn exhaustive_two_to_one_at_n1() {
        let v = v1();
        use std::collections::HashMap;
        let mut seen: HashMap<Vec<Vec<DualBond>>, Vec<u32>> = HashMap::new();
        for mask in 0u32..512 {
            let sigma = SpinConfig::from_mask(&v, mask as u64);
            let contours = extract_contours(&sigma, &v).unwrap();
            let mut keys: Vec<Vec<DualBond>> = contours.iter().map(|c| c.key()).collect();
            keys.sort();
            seen.entry(keys).or_default().push(mask);
            // D(σ) = D(−σ)
            let neg = sigma.negate();
            let ncontours = extract_contours(&neg, &v).unwrap();
            let mut nkeys: Vec<Vec<DualBond>> = ncontours.iter().map(|c| c.key()).collect();
            nkeys.sort();
            let mut okeys: Vec<Vec<DualBond>> = contours.iter().map(|c| c.key()).collect();
            okeys.sort();
            assert_eq!(nkeys, okeys, "mask {mask}");
        }
        // exactly two configurations per family
        assert_eq!(seen.len(), 256);
        for (_, masks) in seen {
            assert_eq!(masks.len(), 2);
        }
    }

    #[test]
    fn exhaustive_reconstruction_at_n1() {
        let v = v1();
        for mask in 0u32..512 {
            let sigma = SpinConfig::from_mask(&v, mask as u64);
            if exterior_sign(&sigma, &v) != 1 {
                continue;
            }
            let contours = extract_contours(&sigma, &v).unwrap();
            let refs: Vec<&Contour> = contours.iter().collect();
            let back = config_from_contours(&refs, 1, &v).unwrap();
            assert_eq!(back, sigma, "mask {mask}");
        }
    }
}
