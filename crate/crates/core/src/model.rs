//! Hamiltonian, boundary conditions, exact and sampled finite-volume Gibbs
//! measures, and the seminorm used to compare measures on finite windows.
//!
//! The Hamiltonian is
//!   H = −β Σ_{⟨x,y⟩⊂Λ} (σx σy − 1) − λβ Σ_{x∈Λ, y∈Λᶜ} σx ηy
//! with λ = 1 the plain model and λ ∈ [0,1) the rescaled boundary coupling.

use crate::enumerate;
use crate::lattice::{Site, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("lambda must lie in [-1, 1], got {0}")]
    InvalidLambda(f64),
    #[error("spin configuration does not match the volume ({expected} sites, got {got})")]
    DomainMismatch { expected: usize, got: usize },
    #[error("boundary condition does not cover the collar ({expected} sites, got {got})")]
    CollarMismatch { expected: usize, got: usize },
    #[error("spin values must be ±1")]
    InvalidSpin,
    #[error("volume too large for exhaustive enumeration (needs (2N+1)² ≤ {cap}, got {got})")]
    EnumerationGuard { cap: usize, got: usize },
    #[error("volume too wide for the transfer matrix (needs 2N+1 ≤ {cap}, got {got})")]
    TransferGuard { cap: i32, got: i32 },
    #[error("observable window too large (|X| ≤ {cap}, got {got})")]
    WindowGuard { cap: usize, got: usize },
}

/// Inverse-temperature coupling β > 0 and boundary rescaling λ ∈ [−1, 1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingParams {
    pub beta: f64,
    pub lambda: f64,
}

impl CouplingParams {
    pub fn new(beta: f64) -> Result<Self, ModelError> {
        Self::with_lambda(beta, 1.0)
    }

    pub fn with_lambda(beta: f64, lambda: f64) -> Result<Self, ModelError> {
        if !(beta > 0.0) {
            return Err(ModelError::InvalidBeta(beta));
        }
        if !(-1.0..=1.0).contains(&lambda) {
            return Err(ModelError::InvalidLambda(lambda));
        }
        Ok(CouplingParams { beta, lambda })
    }
}

/// A ±1 spin field on the sites of a volume, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    n: i32,
    values: Vec<i8>,
}

impl SpinConfig {
    pub fn all_plus(v: &Volume) -> Self {
        SpinConfig { n: v.half_side(), values: vec![1; v.site_count()] }
    }

    pub fn all_minus(v: &Volume) -> Self {
        SpinConfig { n: v.half_side(), values: vec![-1; v.site_count()] }
    }

    pub fn from_values(v: &Volume, values: Vec<i8>) -> Result<Self, ModelError> {
        if values.len() != v.site_count() {
            return Err(ModelError::DomainMismatch { expected: v.site_count(), got: values.len() });
        }
        if values.iter().any(|&s| s != 1 && s != -1) {
            return Err(ModelError::InvalidSpin);
        }
        Ok(SpinConfig { n: v.half_side(), values })
    }

    /// Unpack from a bitmask, bit i set ⟺ σ(site i) = −1 (row-major index).
    pub fn from_mask(v: &Volume, mask: u64) -> Self {
        let values = (0..v.site_count())
            .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
            .collect();
        SpinConfig { n: v.half_side(), values }
    }

    pub fn mask(&self) -> u64 {
        debug_assert!(self.values.len() <= 64);
        self.values
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &s)| if s == -1 { m | 1 << i } else { m })
    }

    pub fn half_side(&self) -> i32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn index(&self, s: Site) -> usize {
        let side = 2 * self.n + 1;
        ((s.1 + self.n) * side + (s.0 + self.n)) as usize
    }

    pub fn get(&self, s: Site) -> i8 {
        self.values[self.index(s)]
    }

    pub fn set(&mut self, s: Site, val: i8) {
        let i = self.index(s);
        self.values[i] = val;
    }

    pub fn flip(&mut self, s: Site) {
        let i = self.index(s);
        self.values[i] = -self.values[i];
    }

    pub fn negate(&self) -> Self {
        SpinConfig { n: self.n, values: self.values.iter().map(|&s| -s).collect() }
    }

    /// Row-major ±1 values (the snapshot wire format).
    pub fn values(&self) -> &[i8] {
        &self.values
    }
}

/// A ±1 boundary condition on the exterior collar, stored in the canonical
/// counterclockwise order starting at site (N+1, −N).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    n: i32,
    values: Vec<i8>,
}

impl BoundaryCondition {
    pub fn uniform(v: &Volume, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        BoundaryCondition { n: v.half_side(), values: vec![sign; v.boundary_len()] }
    }

    pub fn from_values(v: &Volume, values: Vec<i8>) -> Result<Self, ModelError> {
        if values.len() != v.boundary_len() {
            return Err(ModelError::CollarMismatch { expected: v.boundary_len(), got: values.len() });
        }
        if values.iter().any(|&s| s != 1 && s != -1) {
            return Err(ModelError::InvalidSpin);
        }
        Ok(BoundaryCondition { n: v.half_side(), values })
    }

    /// i.i.d. symmetric ±1 collar sampled from a seeded stream.
    pub fn random(v: &Volume, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let values = (0..v.boundary_len())
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        BoundaryCondition { n: v.half_side(), values }
    }

    /// Dobrushin-style condition: +1 on the upper part of the collar (y > 0),
    /// −1 on the lower part (y < 0), +1 at mid-height on the side walls.
    pub fn dobrushin(v: &Volume) -> Self {
        let values = v
            .collar()
            .iter()
            .map(|s| if s.1 < 0 { -1 } else { 1 })
            .collect();
        BoundaryCondition { n: v.half_side(), values }
    }

    pub fn negate(&self) -> Self {
        BoundaryCondition { n: self.n, values: self.values.iter().map(|&s| -s).collect() }
    }

    pub fn collar_values(&self) -> &[i8] {
        &self.values
    }

    pub fn collar(&self, k: usize) -> i8 {
        self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at an exterior collar site, by coordinates.
    pub fn at_site(&self, s: Site) -> Option<i8> {
        let n = self.n;
        let side = 2 * n + 1;
        let k = if s.0 == n + 1 && s.1.abs() <= n {
            s.1 + n
        } else if s.1 == n + 1 && s.0.abs() <= n {
            side + (n - s.0)
        } else if s.0 == -n - 1 && s.1.abs() <= n {
            2 * side + (n - s.1)
        } else if s.1 == -n - 1 && s.0.abs() <= n {
            3 * side + (s.0 + n)
        } else {
            return None;
        };
        Some(self.values[k as usize])
    }

    /// Σ of η over the collar sites selected by a chain-index bitmask.
    pub fn masked_sum(&self, mask: u32) -> i32 {
        let mut s = 0;
        for (k, &val) in self.values.iter().enumerate() {
            if mask >> k & 1 == 1 {
                s += val as i32;
            }
        }
        s
    }

    pub fn total(&self) -> i32 {
        self.values.iter().map(|&x| x as i32).sum()
    }
}

fn check_domains(sigma: &SpinConfig, eta: &BoundaryCondition, v: &Volume) -> Result<(), ModelError> {
    if sigma.len() != v.site_count() || sigma.half_side() != v.half_side() {
        return Err(ModelError::DomainMismatch { expected: v.site_count(), got: sigma.len() });
    }
    if eta.len() != v.boundary_len() {
        return Err(ModelError::CollarMismatch { expected: v.boundary_len(), got: eta.len() });
    }
    Ok(())
}

/// Energy of a configuration under a boundary condition.
pub fn hamiltonian(
    sigma: &SpinConfig,
    eta: &BoundaryCondition,
    v: &Volume,
    p: &CouplingParams,
) -> Result<f64, ModelError> {
    check_domains(sigma, eta, v)?;
    let n = v.half_side();
    let mut bulk = 0i64; // Σ (σx σy − 1) over bulk bonds
    for s in v.sites() {
        let sv = sigma.get(s) as i64;
        if s.0 < n {
            bulk += sv * sigma.get(Site(s.0 + 1, s.1)) as i64 - 1;
        }
        if s.1 < n {
            bulk += sv * sigma.get(Site(s.0, s.1 + 1)) as i64 - 1;
        }
    }
    let mut boundary = 0i64; // Σ σx ηy over boundary pairs
    for (k, bond) in v.boundary_chain().iter().enumerate() {
        let [x, y] = bond.separated_sites();
        let inner = if v.contains(x) { x } else { y };
        boundary += sigma.get(inner) as i64 * eta.collar(k) as i64;
    }
    Ok(-p.beta * bulk as f64 - p.lambda * p.beta * boundary as f64)
}

/// log Z by exhaustive enumeration; guard (2N+1)² ≤ 25.
pub fn exact_log_partition(
    v: &Volume,
    eta: &BoundaryCondition,
    p: &CouplingParams,
) -> Result<f64, ModelError> {
    enumerate::exact_log_partition(v, eta, p)
}

/// (log Z⁺, log Z⁻): partition functions constrained to exterior sign ±.
pub fn constrained_log_z(
    v: &Volume,
    eta: &BoundaryCondition,
    p: &CouplingParams,
) -> Result<(f64, f64), ModelError> {
    enumerate::constrained_log_z(v, eta, p)
}

/// Exterior sign of a configuration (membership σ ∈ Ω_Λ^±).
pub fn constrained_split(sigma: &SpinConfig, v: &Volume) -> i8 {
    crate::contour::exterior_sign(sigma, v)
}

/// Residual of the convex-combination identity
/// μ(f) = [1+Z⁻/Z⁺]⁻¹ ν⁺(f) + [1+Z⁺/Z⁻]⁻¹ ν⁻(f), exact mode.
pub fn mixture_decomposition_check(
    v: &Volume,
    eta: &BoundaryCondition,
    p: &CouplingParams,
    f: &LocalObservable,
) -> Result<f64, ModelError> {
    enumerate::mixture_residual(v, eta, p, f)
}

const TRANSFER_WIDTH_CAP: i32 = 13;

/// log Z via a row-to-row transfer matrix with boundary fields; exact oracle
/// for widths 2N+1 ≤ 13.
pub fn transfer_matrix_log_z(
    v: &Volume,
    eta: &BoundaryCondition,
    p: &CouplingParams,
) -> Result<f64, ModelError> {
    if eta.len() != v.boundary_len() {
        return Err(ModelError::CollarMismatch { expected: v.boundary_len(), got: eta.len() });
    }
    let w = v.side();
    if w > TRANSFER_WIDTH_CAP {
        return Err(ModelError::TransferGuard { cap: TRANSFER_WIDTH_CAP, got: w });
    }
    let n = v.half_side();
    let wu = w as usize;
    let states = 1usize << wu;
    let beta = p.beta;
    let lb = p.lambda * beta;
    let spin = |s: usize, i: usize| -> f64 {
        if s >> i & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    };
    // log-weight of a row configuration at height y: horizontal bonds, side
    // collar fields, and top/bottom collar fields on the extremal rows
    let row_logw = |s: usize, y: i32| -> f64 {
        let mut e = 0.0;
        for i in 0..wu - 1 {
            e += beta * (spin(s, i) * spin(s, i + 1) - 1.0);
        }
        let left = eta.at_site(Site(-n - 1, y)).unwrap() as f64;
        let right = eta.at_site(Site(n + 1, y)).unwrap() as f64;
        e += lb * (spin(s, 0) * left + spin(s, wu - 1) * right);
        if y == -n {
            for i in 0..wu {
                let b = eta.at_site(Site(i as i32 - n, -n - 1)).unwrap() as f64;
                e += lb * spin(s, i) * b;
            }
        }
        if y == n {
            for i in 0..wu {
                let t = eta.at_site(Site(i as i32 - n, n + 1)).unwrap() as f64;
                e += lb * spin(s, i) * t;
            }
        }
        e
    };

    let mut log_scale = 0.0f64;
    let mut vcur: Vec<f64> = (0..states).map(|s| row_logw(s, -n)).collect();
    let shift = vcur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    log_scale += shift;
    for x in vcur.iter_mut() {
        *x = (*x - shift).exp();
    }
    let t_flip = (-2.0 * beta).exp();
    for y in (-n + 1)..=n {
        // vertical bonds: factorized single-bit transfer
        for i in 0..wu {
            let bit = 1usize << i;
            for s in 0..states {
                if s & bit == 0 {
                    let a = vcur[s];
                    let b = vcur[s | bit];
                    vcur[s] = a + t_flip * b;
                    vcur[s | bit] = b + t_flip * a;
                }
            }
        }
        // row fields, with a max-shift renormalization
        let mut mx = f64::NEG_INFINITY;
        for s in 0..states {
            let lw = row_logw(s, y) + vcur[s].ln();
            vcur[s] = lw;
            mx = mx.max(lw);
        }
        log_scale += mx;
        for x in vcur.iter_mut() {
            *x = (*x - mx).exp();
        }
    }
    Ok(log_scale + vcur.iter().sum::<f64>().ln())
}

/// Single-site Metropolis chain with a deterministic per-seed stream.
///
/// Sweeps run in raster order and one uniform variate is drawn per proposal,
/// so the stream depends only on (seed, replica), never on threading.
pub struct MetropolisSampler {
    v: Volume,
    eta_field: Vec<f64>, // λ·(collar values adjacent to each site), premultiplied
    state: SpinConfig,
    beta: f64,
    rng: ChaCha12Rng,
}

impl MetropolisSampler {
    pub fn new(
        v: &Volume,
        eta: &BoundaryCondition,
        p: &CouplingParams,
        seed: u64,
        replica: u64,
    ) -> Result<Self, ModelError> {
        if eta.len() != v.boundary_len() {
            return Err(ModelError::CollarMismatch { expected: v.boundary_len(), got: eta.len() });
        }
        let mut eta_field = vec![0.0f64; v.site_count()];
        for (k, bond) in v.boundary_chain().iter().enumerate() {
            let [x, y] = bond.separated_sites();
            let inner = if v.contains(x) { x } else { y };
            eta_field[v.site_index(inner)] += p.lambda * eta.collar(k) as f64;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        Ok(MetropolisSampler {
            v: v.clone(),
            eta_field,
            state: SpinConfig::all_plus(v),
            beta: p.beta,
            rng,
        })
    }

    pub fn state(&self) -> &SpinConfig {
        &self.state
    }

    pub fn sweep(&mut self) {
        let n = self.v.half_side();
        for idx in 0..self.v.site_count() {
            let s = self.v.site_at(idx);
            let sv = self.state.get(s) as f64;
            let mut nb = 0.0;
            if s.0 > -n {
                nb += self.state.get(Site(s.0 - 1, s.1)) as f64;
            }
            if s.0 < n {
                nb += self.state.get(Site(s.0 + 1, s.1)) as f64;
            }
            if s.1 > -n {
                nb += self.state.get(Site(s.0, s.1 - 1)) as f64;
            }
            if s.1 < n {
                nb += self.state.get(Site(s.0, s.1 + 1)) as f64;
            }
            let dh = 2.0 * self.beta * sv * (nb + self.eta_field[idx]);
            let u: f64 = self.rng.random();
            if dh <= 0.0 || u < (-dh).exp() {
                self.state.flip(s);
            }
        }
    }

    /// Run `sweeps` sweeps, invoking `f` on the state every `thin` sweeps.
    pub fn run(&mut self, sweeps: usize, thin: usize, mut f: impl FnMut(&SpinConfig)) {
        let thin = thin.max(1);
        for i in 1..=sweeps {
            self.sweep();
            if i % thin == 0 {
                f(&self.state);
            }
        }
    }
}

const WINDOW_CAP: usize = 8;

/// A local observable: a finite window X and a value table on {−1,+1}^X,
/// indexed by the bitmask with bit i set ⟺ σ(window[i]) = −1.
#[derive(Debug, Clone)]
pub struct LocalObservable {
    window: Vec<Site>,
    table: Vec<f64>,
}

impl LocalObservable {
    pub fn new(window: Vec<Site>, table: Vec<f64>) -> Result<Self, ModelError> {
        if window.len() > WINDOW_CAP {
            return Err(ModelError::WindowGuard { cap: WINDOW_CAP, got: window.len() });
        }
        assert_eq!(table.len(), 1 << window.len());
        Ok(LocalObservable { window, table })
    }

    /// The observable σ ↦ σ(site).
    pub fn spin_at(site: Site) -> Self {
        LocalObservable { window: vec![site], table: vec![1.0, -1.0] }
    }

    pub fn constant(c: f64) -> Self {
        LocalObservable { window: vec![], table: vec![c] }
    }

    pub fn window(&self) -> &[Site] {
        &self.window
    }

    pub fn eval(&self, sigma: &SpinConfig) -> f64 {
        self.table[self.mask_of(sigma)]
    }

    pub fn value_at_mask(&self, mask: usize) -> f64 {
        self.table[mask]
    }

    pub fn mask_of(&self, sigma: &SpinConfig) -> usize {
        let mut m = 0usize;
        for (i, &s) in self.window.iter().enumerate() {
            if sigma.get(s) == -1 {
                m |= 1 << i;
            }
        }
        m
    }

    pub fn sup_norm(&self) -> f64 {
        self.table.iter().cloned().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Empirical PMF of the X-marginal of a sample set.
pub fn marginal_pmf(samples: &[SpinConfig], window: &[Site]) -> Result<Vec<f64>, ModelError> {
    if window.len() > WINDOW_CAP {
        return Err(ModelError::WindowGuard { cap: WINDOW_CAP, got: window.len() });
    }
    let mut pmf = vec![0.0; 1 << window.len()];
    if samples.is_empty() {
        return Ok(pmf);
    }
    for s in samples {
        let mut m = 0usize;
        for (i, &x) in window.iter().enumerate() {
            if s.get(x) == -1 {
                m |= 1 << i;
            }
        }
        pmf[m] += 1.0;
    }
    let tot = samples.len() as f64;
    for p in pmf.iter_mut() {
        *p /= tot;
    }
    Ok(pmf)
}

/// ‖μ−ν‖_X as the L1 distance of X-marginal PMFs (twice the total variation);
/// this equals the seminorm sup over ‖f‖ = 1, D_f ⊂ X. Lies in [0, 2].
pub fn seminorm_distance(pmf_mu: &[f64], pmf_nu: &[f64]) -> f64 {
    debug_assert_eq!(pmf_mu.len(), pmf_nu.len());
    pmf_mu.iter().zip(pmf_nu).map(|(a, b)| (a - b).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1() -> Volume {
        Volume::new(1).unwrap()
    }

    #[test]
    fn hamiltonian_all_plus() {
        let v = v1();
        let p = CouplingParams::new(1.0).unwrap();
        let plus = SpinConfig::all_plus(&v);
        let eta_p = BoundaryCondition::uniform(&v, 1);
        let eta_m = BoundaryCondition::uniform(&v, -1);
        assert_eq!(hamiltonian(&plus, &eta_p, &v, &p).unwrap(), -12.0);
        assert_eq!(hamiltonian(&plus, &eta_m, &v, &p).unwrap(), 12.0);
        let mut one_minus = plus.clone();
        one_minus.flip(Site(0, 0));
        assert_eq!(hamiltonian(&one_minus, &eta_p, &v, &p).unwrap(), -12.0 + 8.0);
    }

    #[test]
    fn hamiltonian_flip_covariance() {
        let v = v1();
        let p = CouplingParams::with_lambda(0.7, 0.4).unwrap();
        for seed in 0..20u64 {
            let eta = BoundaryCondition::random(&v, seed);
            let mask = seed.wrapping_mul(0x9e3779b97f4a7c15) & 0x1ff;
            let sigma = SpinConfig::from_mask(&v, mask);
            let h1 = hamiltonian(&sigma, &eta, &v, &p).unwrap();
            let h2 = hamiltonian(&sigma.negate(), &eta.negate(), &v, &p).unwrap();
            assert!((h1 - h2).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_free_entropy_at_tiny_beta() {
        let v = Volume::new(2).unwrap();
        let p = CouplingParams::new(1e-12).unwrap();
        let eta = BoundaryCondition::random(&v, 7);
        let lz = transfer_matrix_log_z(&v, &eta, &p).unwrap();
        assert!((lz - 25.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn transfer_lambda_zero_decouples() {
        let v = v1();
        let p = CouplingParams::with_lambda(0.8, 0.0).unwrap();
        let a = transfer_matrix_log_z(&v, &BoundaryCondition::random(&v, 3), &p).unwrap();
        let b = transfer_matrix_log_z(&v, &BoundaryCondition::random(&v, 99), &p).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn transfer_global_flip_symmetry() {
        let v = Volume::new(2).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let p = CouplingParams::new(beta).unwrap();
            let eta = BoundaryCondition::uniform(&v, 1);
            let a = transfer_matrix_log_z(&v, &eta, &p).unwrap();
            let b = transfer_matrix_log_z(&v, &eta.negate(), &p).unwrap();
            assert!((a - b).abs() < 1e-10, "beta={beta}");
        }
    }

    #[test]
    fn transfer_width_guard() {
        let v = Volume::new(7).unwrap();
        let p = CouplingParams::new(1.0).unwrap();
        let eta = BoundaryCondition::uniform(&v, 1);
        assert!(matches!(
            transfer_matrix_log_z(&v, &eta, &p),
            Err(ModelError::TransferGuard { .. })
        ));
    }

    #[test]
    fn metropolis_deterministic_stream() {
        let v = Volume::new(2).unwrap();
        let p = CouplingParams::new(0.6).unwrap();
        let eta = BoundaryCondition::random(&v, 5);
        let mut a = MetropolisSampler::new(&v, &eta, &p, 42, 0).unwrap();
        let mut b = MetropolisSampler::new(&v, &eta, &p, 42, 0).unwrap();
        let mut sa = Vec::new();
        let mut sb = Vec::new();
        a.run(50, 5, |s| sa.push(s.clone()));
        b.run(50, 5, |s| sb.push(s.clone()));
        assert_eq!(sa, sb);
        let mut c = MetropolisSampler::new(&v, &eta, &p, 42, 1).unwrap();
        let mut sc = Vec::new();
        c.run(50, 5, |s| sc.push(s.clone()));
        assert_ne!(sa, sc, "distinct replicas must get distinct streams");
    }

    #[test]
    fn metropolis_small_beta_magnetization() {
        let v = Volume::new(2).unwrap();
        let p = CouplingParams::with_lambda(1e-9, 0.0).unwrap();
        let eta = BoundaryCondition::uniform(&v, 1);
        let mut s = MetropolisSampler::new(&v, &eta, &p, 11, 0).unwrap();
        let mut tot = 0i64;
        let mut cnt = 0i64;
        s.run(4000, 2, |cfg| {
            tot += cfg.values().iter().map(|&x| x as i64).sum::<i64>();
            cnt += cfg.values().len() as i64;
        });
        let m = tot as f64 / cnt as f64;
        assert!(m.abs() < 0.05, "m = {m}");
    }

    #[test]
    fn seminorm_extremes() {
        let v = v1();
        let plus = SpinConfig::all_plus(&v);
        let minus = SpinConfig::all_minus(&v);
        let x = vec![Site(0, 0), Site(1, 0)];
        let pa = marginal_pmf(&[plus], &x).unwrap();
        let pb = marginal_pmf(&[minus], &x).unwrap();
        assert_eq!(seminorm_distance(&pa, &pb), 2.0);
        assert_eq!(seminorm_distance(&pa, &pa), 0.0);
    }

    #[test]
    fn observable_eval() {
        let v = v1();
        let f = LocalObservable::spin_at(Site(0, 0));
        let plus = SpinConfig::all_plus(&v);
        assert_eq!(f.eval(&plus), 1.0);
        assert_eq!(f.eval(&plus.negate()), -1.0);
        assert_eq!(f.sup_norm(), 1.0);
    }

    #[test]
    fn boundary_condition_lookup() {
        let v = Volume::new(2).unwrap();
        let eta = BoundaryCondition::random(&v, 17);
        for (k, &site) in v.collar().iter().enumerate() {
            assert_eq!(eta.at_site(site), Some(eta.collar(k)));
        }
        assert_eq!(eta.at_site(Site(0, 0)), None);
    }
}
