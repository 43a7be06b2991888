//! States on UHF_n: Cuntz states, product states, the nearest-neighbor state
//! and finite mixtures, their window density matrices, and the series tests
//! that decide membership, equivalence and conjugacy of product states.

use crate::endo::MatrixObservable;
use crate::cuntz_rep::{rotation_to_e0, IsometryFamily, Summability, UnitarySequence, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::lattice::{char_value, CylinderVector, Word, TOL};
use crate::linalg::{self, cx, pow};
use faer::{c64, Mat};

/// Overlaps within this distance of 1 are rounding noise and count as 1.
pub const OVERLAP_ROUNDING: f64 = 4.0 * f64::EPSILON;

fn check_unit(v: &[c64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Shape { got: v.len(), want: n });
    }
    let s = linalg::norm(v);
    if (s - 1.0).abs() > TOL {
        return Err(Error::NotUnit(s));
    }
    Ok(())
}

fn e0(n: usize) -> Vec<c64> {
    let mut v = vec![cx(0.0, 0.0); n];
    v[0] = cx(1.0, 0.0);
    v
}

/// |⟨a, b⟩| with rounding noise near 1 removed.
fn overlap(a: &[c64], b: &[c64]) -> f64 {
    let c = linalg::inner(a, b).norm();
    if c >= 1.0 - OVERLAP_ROUNDING {
        1.0
    } else {
        c
    }
}

/// θ_k of the ladder 1, 1/2, 1/2, 1/3, 1/3, 1/3, … (k ≥ 1).
pub fn theta_harmonic(k: usize) -> f64 {
    1.0 / theta_block(k) as f64
}

/// The q with q(q−1)/2 < k ≤ q(q+1)/2.
fn theta_block(k: usize) -> usize {
    let k = k.max(1);
    let mut q = (((8.0 * k as f64 + 1.0).sqrt() - 1.0) / 2.0).ceil() as usize;
    while q * (q + 1) / 2 < k {
        q += 1;
    }
    while q > 1 && (q - 1) * q / 2 >= k {
        q -= 1;
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceKind {
    ThetaHarmonic,
    InverseSqrt,
    Geometric { r: f64 },
    ExplicitList(Vec<Vec<c64>>),
    Constant(Vec<c64>),
}

/// A generator k ↦ h_k of unit vectors in ℂⁿ, indexed from k = 1.
///
/// The rotational families use h_k = cos θ_k e_0 + sin θ_k e_1.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFamily {
    n: usize,
    kind: SequenceKind,
}

impl SequenceFamily {
    pub fn theta_harmonic(n: usize) -> Result<Self> {
        crate::lattice::check_base(n)?;
        Ok(SequenceFamily { n, kind: SequenceKind::ThetaHarmonic })
    }

    pub fn inverse_sqrt(n: usize) -> Result<Self> {
        crate::lattice::check_base(n)?;
        Ok(SequenceFamily { n, kind: SequenceKind::InverseSqrt })
    }

    pub fn geometric(n: usize, r: f64) -> Result<Self> {
        crate::lattice::check_base(n)?;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Invalid(format!("geometric ratio must lie in (0, 1), got {r}")));
        }
        Ok(SequenceFamily { n, kind: SequenceKind::Geometric { r } })
    }

    /// A finite list h_1, …, h_L; later indices repeat h_L.
    pub fn explicit(vectors: Vec<Vec<c64>>) -> Result<Self> {
        let n = vectors.first().map(|v| v.len()).ok_or_else(|| Error::Invalid("empty vector list".into()))?;
        crate::lattice::check_base(n)?;
        for v in &vectors {
            check_unit(v, n)?;
        }
        Ok(SequenceFamily { n, kind: SequenceKind::ExplicitList(vectors) })
    }

    pub fn constant(h: Vec<c64>) -> Result<Self> {
        let n = h.len();
        crate::lattice::check_base(n)?;
        check_unit(&h, n)?;
        Ok(SequenceFamily { n, kind: SequenceKind::Constant(h) })
    }

    pub fn base(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SequenceKind::ThetaHarmonic => "theta-harmonic",
            SequenceKind::InverseSqrt => "inverse-sqrt",
            SequenceKind::Geometric { .. } => "geometric",
            SequenceKind::ExplicitList(_) => "explicit-list",
            SequenceKind::Constant(_) => "constant",
        }
    }

    /// θ_k for the rotational families.
    pub fn angle(&self, k: usize) -> Option<f64> {
        let k = k.max(1);
        match self.kind {
            SequenceKind::ThetaHarmonic => Some(theta_harmonic(k)),
            SequenceKind::InverseSqrt => Some((k as f64).sqrt().recip()),
            SequenceKind::Geometric { r } => Some(r.powi(k as i32)),
            _ => None,
        }
    }

    /// h_k for k ≥ 1.
    pub fn vector(&self, k: usize) -> Vec<c64> {
        match &self.kind {
            SequenceKind::ExplicitList(l) => l[(k.max(1) - 1).min(l.len() - 1)].clone(),
            SequenceKind::Constant(h) => h.clone(),
            _ => {
                let t = self.angle(k).unwrap_or(0.0);
                let mut v = vec![cx(0.0, 0.0); self.n];
                v[0] = cx(t.cos(), 0.0);
                v[1] = cx(t.sin(), 0.0);
                v
            }
        }
    }

    /// h_1, …, h_count.
    pub fn vectors(&self, count: usize) -> Vec<Vec<c64>> {
        (1..=count).map(|k| self.vector(k)).collect()
    }

    /// Number of distinct stored vectors, if finite.
    pub fn horizon(&self) -> Option<usize> {
        match &self.kind {
            SequenceKind::ExplicitList(l) => Some(l.len()),
            _ => None,
        }
    }

    /// The declared limit h = lim h_k.
    pub fn limit(&self) -> Option<Vec<c64>> {
        match &self.kind {
            SequenceKind::ExplicitList(_) => None,
            SequenceKind::Constant(h) => Some(h.clone()),
            _ => Some(e0(self.n)),
        }
    }

    /// The unitaries with h_p = U_p h_{p+1} up to phase, as a gauge sequence
    /// whose site vectors are e_0, h_1, …, h_horizon.
    pub fn unitary_sequence(&self, horizon: usize) -> Result<UnitarySequence> {
        let declared = match self.kind {
            SequenceKind::InverseSqrt => Summability::Quadratic,
            _ => Summability::Linear,
        };
        Ok(UnitarySequence::from_site_vectors(self.n, &self.vectors(horizon))?
            .with_declared(declared)
            .with_label(self.name()))
    }
}

#[derive(Debug, Clone)]
pub enum SiteSource {
    /// Site m carries h_{m+1}.
    Family(SequenceFamily),
    /// Site m carries U_0^*⋯U_{m−1}^* e_0, converted to point coordinates.
    Gauge(UnitarySequence),
}

/// ⊗_m ω_{ξ_m} with ω_ξ(A) = ⟨ξ, Aξ⟩; an optional fixed unitary acts on every site.
#[derive(Debug, Clone)]
pub struct ProductState {
    n: usize,
    source: SiteSource,
    twist: Option<Mat<c64>>,
}

impl ProductState {
    pub fn from_family(fam: SequenceFamily) -> Self {
        ProductState { n: fam.base(), source: SiteSource::Family(fam), twist: None }
    }

    pub fn from_gauge(u: UnitarySequence) -> Self {
        ProductState { n: u.base(), source: SiteSource::Gauge(u), twist: None }
    }

    pub fn base(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &SiteSource {
        &self.source
    }

    fn twisted(&self, v: Vec<c64>) -> Vec<c64> {
        match &self.twist {
            Some(g) => linalg::matvec(g.as_ref(), &v),
            None => v,
        }
    }

    /// ξ_m for m ≥ 0.
    pub fn site(&self, m: usize) -> Vec<c64> {
        match &self.source {
            SiteSource::Family(f) => self.twisted(f.vector(m + 1)),
            SiteSource::Gauge(_) => self.sites(m + 1).pop().unwrap_or_default(),
        }
    }

    /// ξ_0, …, ξ_{count−1}.
    pub fn sites(&self, count: usize) -> Vec<Vec<c64>> {
        match &self.source {
            SiteSource::Family(f) => (1..=count).map(|k| self.twisted(f.vector(k))).collect(),
            SiteSource::Gauge(u) => {
                let f = linalg::fourier_matrix(self.n);
                let mut r = linalg::identity(self.n);
                let mut out = Vec::with_capacity(count);
                let e = e0(self.n);
                for m in 0..count {
                    if m > 0 {
                        r = &r * u.char_matrix(m - 1).adjoint();
                    }
                    let v = linalg::matvec((&f * &r).as_ref(), &e);
                    out.push(self.twisted(v));
                }
                out
            }
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match &self.source {
            SiteSource::Family(f) => f.horizon(),
            SiteSource::Gauge(_) => None,
        }
    }

    pub fn declared_limit(&self) -> Option<Vec<c64>> {
        match &self.source {
            SiteSource::Family(f) => f.limit().map(|h| self.twisted(h)),
            SiteSource::Gauge(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum StateKind {
    /// ω_η(s_I s_J^*) = η_I η̄_J.
    Cuntz { eta: Vec<c64> },
    Product(ProductState),
    /// The state ⟨1, · 1⟩ of the nearest-neighbor family.
    NearestNeighbor,
    /// Σ λ_i ω_i ⊗ ω_i ⊗ ⋯ on the slots from `anchor` on.
    FiniteMix { anchor: usize, weights: Vec<f64>, vectors: Vec<Vec<c64>> },
}

#[derive(Debug, Clone)]
pub struct StateSpec {
    n: usize,
    kind: StateKind,
}

impl StateSpec {
    pub fn cuntz(eta: Vec<c64>) -> Result<Self> {
        let n = eta.len();
        crate::lattice::check_base(n)?;
        check_unit(&eta, n)?;
        Ok(StateSpec { n, kind: StateKind::Cuntz { eta } })
    }

    pub fn product(p: ProductState) -> Self {
        StateSpec { n: p.base(), kind: StateKind::Product(p) }
    }

    pub fn nearest_neighbor(n: usize) -> Result<Self> {
        crate::lattice::check_base(n)?;
        Ok(StateSpec { n, kind: StateKind::NearestNeighbor })
    }

    pub fn finite_mix(anchor: usize, weights: Vec<f64>, vectors: Vec<Vec<c64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != vectors.len() {
            return Err(Error::Invalid("a mix needs one weight per vector".into()));
        }
        let n = vectors[0].len();
        crate::lattice::check_base(n)?;
        if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(Error::Invalid("mix weights must be positive".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > TOL {
            return Err(Error::Invalid(format!("mix weights sum to {s}")));
        }
        for v in &vectors {
            check_unit(v, n)?;
        }
        for i in 0..vectors.len() {
            for j in 0..i {
                if linalg::inner(&vectors[i], &vectors[j]).norm() >= 1.0 - TOL {
                    return Err(Error::Invalid(format!("mix vectors {j} and {i} define the same state")));
                }
            }
        }
        Ok(StateSpec { n, kind: StateKind::FiniteMix { anchor, weights, vectors } })
    }

    pub fn base(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            StateKind::Cuntz { .. } => "cuntz",
            StateKind::Product(_) => "product",
            StateKind::NearestNeighbor => "nearest-neighbor",
            StateKind::FiniteMix { .. } => "finite-mix",
        }
    }

    /// First slot of the state's domain.
    pub fn anchor(&self) -> usize {
        match self.kind {
            StateKind::FiniteMix { anchor, .. } => anchor,
            _ => 0,
        }
    }

    fn as_product(&self) -> Result<&ProductState> {
        match &self.kind {
            StateKind::Product(p) => Ok(p),
            _ => Err(Error::Invalid(format!("expected a product state, got {}", self.name()))),
        }
    }
}

fn check_words(n: usize, i: &Word, j: &Word) -> Result<()> {
    if i.len() != j.len() {
        return Err(Error::LengthMismatch(i.len(), j.len()));
    }
    if i.base() != n || j.base() != n {
        return Err(Error::Incompatible("word base differs from state base".into()));
    }
    Ok(())
}

/// ⟨ξ, e_{i_1 j_1} ξ⟩⋯ for one site vector per letter.
fn product_value<'a>(sites: impl Iterator<Item = &'a [c64]>, i: &[usize], j: &[usize]) -> c64 {
    sites.zip(i.iter().zip(j)).fold(cx(1.0, 0.0), |acc, (xi, (&a, &b))| acc * xi[a].conj() * xi[b])
}

/// (1/n^k) δ_{i_k j_k} Π⟨i_t, i_{t+1}⟩ · conj Π⟨j_t, j_{t+1}⟩.
pub fn nearest_neighbor_value(n: usize, i: &[usize], j: &[usize]) -> c64 {
    let k = i.len();
    if k == 0 {
        return cx(1.0, 0.0);
    }
    if i[k - 1] != j[k - 1] {
        return cx(0.0, 0.0);
    }
    let mut v = cx((n as f64).powi(-(k as i32)), 0.0);
    for t in 0..k - 1 {
        v *= char_value(i[t], i[t + 1], n) * char_value(j[t], j[t + 1], n).conj();
    }
    v
}

/// ⟨1, T_{i_1}⋯T_{i_k} T_{j_k}^*⋯T_{j_1}^* 1⟩ from the operators themselves.
pub fn nearest_neighbor_brute_force(n: usize, i: &Word, j: &Word) -> Result<c64> {
    check_words(n, i, j)?;
    let fam = IsometryFamily::nearest_neighbor(n)?;
    let one = CylinderVector::constant(fam.measure(), 0);
    let mut w = one.clone();
    for &b in j.digits() {
        w = fam.apply_s_star(b, &w)?;
    }
    for &a in i.digits().iter().rev() {
        w = fam.apply_s(a, &w)?;
    }
    one.inner(&w)
}

/// The value of the state on e_{i_1 j_1} ⊗ ⋯ ⊗ e_{i_k j_k}.
pub fn eval_state(spec: &StateSpec, i: &Word, j: &Word) -> Result<c64> {
    eval_state_at(spec, 0, i, j)
}

/// The value on the same matrix unit placed on slots [offset, offset + k).
pub fn eval_state_at(spec: &StateSpec, offset: usize, i: &Word, j: &Word) -> Result<c64> {
    check_words(spec.n, i, j)?;
    let (a, b) = (i.digits(), j.digits());
    match &spec.kind {
        StateKind::Cuntz { eta } => {
            let v: Vec<c64> = eta.iter().map(|e| e.conj()).collect();
            Ok(product_value(std::iter::repeat_n(v.as_slice(), a.len()), a, b))
        }
        StateKind::Product(p) => {
            let sites: Vec<Vec<c64>> = match &p.source {
                SiteSource::Gauge(_) => p.sites(offset + a.len()).split_off(offset),
                SiteSource::Family(_) => (offset..offset + a.len()).map(|m| p.site(m)).collect(),
            };
            Ok(product_value(sites.iter().map(|s| s.as_slice()), a, b))
        }
        StateKind::NearestNeighbor => {
            let mut acc = cx(0.0, 0.0);
            for pre in Word::all(offset, spec.n) {
                let ia: Vec<usize> = pre.digits().iter().chain(a).copied().collect();
                let jb: Vec<usize> = pre.digits().iter().chain(b).copied().collect();
                acc += nearest_neighbor_value(spec.n, &ia, &jb);
            }
            Ok(acc)
        }
        StateKind::FiniteMix { anchor, weights, vectors } => {
            if offset < *anchor {
                return Err(Error::Domain(format!("mix is defined on slots ≥ {anchor}, window starts at {offset}")));
            }
            Ok(weights
                .iter()
                .zip(vectors)
                .map(|(&w, v)| product_value(std::iter::repeat_n(v.as_slice(), a.len()), a, b) * w)
                .sum())
        }
    }
}

fn projector(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
}

fn kron_power(p: &Mat<c64>, k: usize) -> Mat<c64> {
    let mut m = linalg::identity(1);
    for _ in 0..k {
        m = linalg::kron(m.as_ref(), p.as_ref());
    }
    m
}

/// The density matrix ρ of the restriction to slots [offset, offset + k),
/// with ω(A) = tr(ρA).
pub fn density_window(spec: &StateSpec, offset: usize, k: usize) -> Result<MatrixObservable> {
    let n = spec.n;
    let d = pow(n, k);
    if d > DEFAULT_BUDGET {
        return Err(Error::Budget { dim: d, budget: DEFAULT_BUDGET });
    }
    let rho = match &spec.kind {
        StateKind::Cuntz { eta } => {
            let v: Vec<c64> = eta.iter().map(|e| e.conj()).collect();
            kron_power(&projector(&v), k)
        }
        StateKind::Product(p) => {
            let sites = p.sites(offset + k);
            sites[offset..].iter().fold(linalg::identity(1), |m, s| linalg::kron(m.as_ref(), projector(s).as_ref()))
        }
        StateKind::FiniteMix { anchor, weights, vectors } => {
            if offset < *anchor {
                return Err(Error::Domain(format!("mix is defined on slots ≥ {anchor}, window starts at {offset}")));
            }
            let mut acc = linalg::zeros(d, d);
            for (&w, v) in weights.iter().zip(vectors) {
                acc += kron_power(&projector(v), k) * faer::Scale(cx(w, 0.0));
            }
            acc
        }
        StateKind::NearestNeighbor => {
            let mut rho = linalg::zeros(d, d);
            for i in Word::all(k, n) {
                for j in Word::all(k, n) {
                    rho[(j.index(), i.index())] = eval_state_at(spec, offset, &i, &j)?;
                }
            }
            rho
        }
    };
    MatrixObservable::new(n, k, rho)
}

pub fn density_matrix(spec: &StateSpec, k: usize) -> Result<MatrixObservable> {
    density_window(spec, spec.anchor(), k)
}

/// Trace over the last tensor slot.
pub fn partial_trace_last(rho: &MatrixObservable) -> Result<MatrixObservable> {
    let n = rho.base();
    let k = rho.level();
    if k == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    let d = pow(n, k - 1);
    let m = rho.matrix();
    let out = Mat::from_fn(d, d, |r, c| (0..n).map(|x| m[(r * n + x, c * n + x)]).sum());
    MatrixObservable::new(n, k - 1, out)
}

/// Trace over the first tensor slot.
pub fn partial_trace_first(rho: &MatrixObservable) -> Result<MatrixObservable> {
    let n = rho.base();
    let k = rho.level();
    if k == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    let d = pow(n, k - 1);
    let m = rho.matrix();
    let out = Mat::from_fn(d, d, |r, c| (0..n).map(|x| m[(x * d + r, x * d + c)]).sum());
    MatrixObservable::new(n, k - 1, out)
}

/// Σ|eigenvalues| of the hermitian part.
pub fn trace_norm(a: &Mat<c64>) -> f64 {
    linalg::hermitian_eigenvalues(a.as_ref()).iter().map(|l| l.abs()).sum()
}

/// Trace norm of the difference of the two restrictions to [offset, offset + k).
pub fn state_distance(a: &StateSpec, b: &StateSpec, k: usize, offset: usize) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::Incompatible("state bases differ".into()));
    }
    let ra = density_window(a, offset, k)?;
    let rb = density_window(b, offset, k)?;
    Ok(trace_norm(&(ra.matrix() - rb.matrix())))
}

/// ‖ω∘σ^{m+1} − ω∘σ^m‖ restricted to k slots.
pub fn shift_distance(spec: &StateSpec, k: usize, m: usize) -> Result<f64> {
    let r0 = density_window(spec, spec.anchor() + m, k)?;
    let r1 = density_window(spec, spec.anchor() + m + 1, k)?;
    Ok(trace_norm(&(r1.matrix() - r0.matrix())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    Undetermined,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Undetermined => "undetermined",
        }
    }
}

/// Parameters of the convergence rule for nonnegative series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRule {
    /// Terms at or below this are zero.
    pub zero_floor: f64,
    /// A fitted comparison must dominate the tail terms up to this factor.
    pub safety: f64,
    /// Power-law exponents at or above this converge.
    pub converge_exponent: f64,
    /// Power-law exponents at or below this may diverge.
    pub diverge_exponent: f64,
    /// Minimal Cesàro average of k·a_k relative to the largest term.
    pub cesaro_floor: f64,
    /// Divergence needs the partial sum to reach this many largest terms.
    pub threshold: f64,
    /// Full dyadic blocks used by the block-sum fallback.
    pub blocks: usize,
}

impl Default for SeriesRule {
    fn default() -> Self {
        SeriesRule {
            zero_floor: 1e-15,
            safety: 2.0,
            converge_exponent: 1.1,
            diverge_exponent: 1.05,
            cesaro_floor: 1e-3,
            threshold: 3.0,
            blocks: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailFit {
    /// a_k ≈ C r^k
    Geometric { ratio: f64 },
    /// a_k ≈ C k^{−p}
    Power { exponent: f64 },
    /// Σ_{2^j ≤ k < 2^{j+1}} a_k ≈ C r^j
    DyadicBlocks { ratio: f64 },
}

#[derive(Debug, Clone)]
pub struct SeriesVerdict {
    pub verdict: Verdict,
    pub horizons: Vec<usize>,
    pub partial_sums: Vec<f64>,
    pub fit: Option<TailFit>,
    /// Which branch of the rule decided.
    pub rule: String,
}

/// Least-squares line through (x, y); returns (intercept, slope, residual sum of squares).
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (icpt, slope, rss)
}

/// Classifies Σ a_k (a_1 = terms[0]) and records partial sums at `horizons`.
///
/// The last decade of terms is fitted by a geometric and a power law on a log
/// scale. The series converges if every term vanishes there, or if the better
/// fit is summable and dominates the terms up to the safety factor. It
/// diverges if the better fit is a power law with exponent near 1, the
/// Cesàro average of k·a_k does not vanish, and the partial sum exceeds the
/// threshold in units of the largest term.
pub fn classify_series(terms: &[f64], horizons: &[usize], rule: &SeriesRule) -> SeriesVerdict {
    let mut sums = Vec::with_capacity(horizons.len());
    let mut acc = 0.0;
    let mut upto = 0;
    let mut hs: Vec<usize> = horizons.iter().copied().filter(|&h| h <= terms.len()).collect();
    hs.sort_unstable();
    hs.dedup();
    for &h in &hs {
        acc += terms[upto..h].iter().sum::<f64>();
        upto = h;
        sums.push(acc);
    }
    let mut out = SeriesVerdict { verdict: Verdict::Undetermined, horizons: hs, partial_sums: sums, fit: None, rule: String::new() };
    let m = terms.len();
    if terms.iter().any(|t| t.is_infinite()) {
        out.verdict = Verdict::Diverges;
        out.rule = "infinite term".into();
        return out;
    }
    if m == 0 {
        out.verdict = Verdict::Converges;
        out.rule = "empty series".into();
        return out;
    }
    let start = (m / 10).max(1);
    let decade: Vec<(f64, f64)> = (start..=m).map(|k| (k as f64, terms[k - 1])).collect();
    let live: Vec<(f64, f64)> = decade.iter().copied().filter(|&(_, a)| a > rule.zero_floor).collect();
    if live.is_empty() {
        out.verdict = Verdict::Converges;
        out.rule = format!("tail terms k ≥ {start} vanish");
        return out;
    }
    if live.len() < 3 {
        out.rule = "too few nonzero tail terms to fit".into();
        return out;
    }
    let ly: Vec<f64> = live.iter().map(|&(_, a)| a.ln()).collect();
    let kx: Vec<f64> = live.iter().map(|&(k, _)| k).collect();
    let lx: Vec<f64> = kx.iter().map(|k| k.ln()).collect();
    let (gi, gs, grss) = line_fit(&kx, &ly);
    let (pi, ps, prss) = line_fit(&lx, &ly);
    let geometric = grss < prss;
    let dominated = |pred: &dyn Fn(f64) -> f64| live.iter().all(|&(k, a)| a <= rule.safety * pred(k));
    let total: f64 = terms.iter().sum();
    let a_max = terms.iter().cloned().fold(0.0, f64::max);
    let cesaro = decade.iter().map(|&(k, a)| k * a).sum::<f64>() / decade.len() as f64 / a_max;
    if geometric {
        let ratio = gs.exp();
        out.fit = Some(TailFit::Geometric { ratio });
        if ratio < 1.0 && dominated(&|k| (gi + gs * k).exp()) {
            out.verdict = Verdict::Converges;
            out.rule = format!("geometric tail, ratio {ratio:.4}, dominated with factor {}", rule.safety);
            return out;
        }
    } else {
        let p = -ps;
        out.fit = Some(TailFit::Power { exponent: p });
        if p >= rule.converge_exponent && dominated(&|k| (pi + ps * k.ln()).exp()) {
            out.verdict = Verdict::Converges;
            out.rule = format!("power tail, exponent {p:.4}, dominated with factor {}", rule.safety);
            return out;
        }
        if p <= rule.diverge_exponent && cesaro >= rule.cesaro_floor && total >= rule.threshold * a_max {
            out.verdict = Verdict::Diverges;
            out.rule = format!(
                "power tail, exponent {p:.4}; Cesàro mean of k·a_k {cesaro:.4} of max; partial sum {total:.4} ≥ {} × max term",
                rule.threshold
            );
            return out;
        }
    }
    if let Some(v) = dyadic_fallback(terms, rule, &mut out) {
        out.verdict = v;
        return out;
    }
    out.rule = "no comparison applies".into();
    out
}

/// Sparse tails: fits the last full dyadic block sums B_j geometrically.
/// a_k ~ k^{−p} gives B_j ~ 2^{j(1−p)}, so the exponent thresholds carry over.
fn dyadic_fallback(terms: &[f64], rule: &SeriesRule, out: &mut SeriesVerdict) -> Option<Verdict> {
    let top = (usize::BITS - 1 - (terms.len() + 1).leading_zeros()) as usize;
    if rule.blocks < 3 || top < rule.blocks {
        return None;
    }
    let js: Vec<usize> = (top - rule.blocks..top).collect();
    let sums: Vec<f64> = js.iter().map(|&j| terms[(1 << j) - 1..(2 << j) - 1].iter().sum()).collect();
    if sums.iter().any(|&b| b <= rule.zero_floor) {
        return None;
    }
    let x: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let y: Vec<f64> = sums.iter().map(|b| b.ln()).collect();
    let (icpt, slope, _) = line_fit(&x, &y);
    let ratio = slope.exp();
    let dominated = x.iter().zip(&sums).all(|(j, b)| *b <= rule.safety * (icpt + slope * j).exp());
    let prev = out.fit.take();
    out.fit = Some(TailFit::DyadicBlocks { ratio });
    if ratio <= 2f64.powf(1.0 - rule.converge_exponent) && dominated {
        out.rule = format!("dyadic block sums, ratio {ratio:.4}, dominated with factor {}", rule.safety);
        return Some(Verdict::Converges);
    }
    let total: f64 = terms.iter().sum();
    let a_max = terms.iter().cloned().fold(0.0, f64::max);
    if ratio >= 2f64.powf(1.0 - rule.diverge_exponent) && total >= rule.threshold * a_max {
        out.rule = format!("dyadic block sums, ratio {ratio:.4}, not decaying");
        return Some(Verdict::Diverges);
    }
    out.fit = prev;
    None
}

#[derive(Debug, Clone)]
pub struct MembershipReport {
    /// The series Σ(1 − |⟨ξ_m, ξ_{m+1}⟩|) for product states.
    pub series: Option<SeriesVerdict>,
    /// ‖ω∘σ^{m+1} − ω∘σ^m‖ on small windows, m = 0, 1, ….
    pub shift_distances: Vec<f64>,
    pub window: usize,
    pub verdict: Verdict,
}

/// Shift distances computed for membership reports.
pub const SHIFT_PROBES: usize = 5;

/// Membership of a state in P: for product states through the site overlap
/// series, otherwise through the vanishing of the shift distances.
pub fn in_p_test(spec: &StateSpec, horizons: &[usize], window: usize, rule: &SeriesRule) -> Result<MembershipReport> {
    let mut shift = Vec::with_capacity(SHIFT_PROBES);
    for m in 0..SHIFT_PROBES {
        shift.push(shift_distance(spec, window, m)?);
    }
    match &spec.kind {
        StateKind::Product(p) => {
            let top = horizons.iter().copied().max().unwrap_or(0);
            check_horizon(p, top + 1)?;
            let sites = p.sites(top + 1);
            let terms: Vec<f64> = sites.windows(2).map(|w| 1.0 - overlap(&w[0], &w[1])).collect();
            let s = classify_series(&terms, horizons, rule);
            let verdict = s.verdict;
            Ok(MembershipReport { series: Some(s), shift_distances: shift, window, verdict })
        }
        _ => {
            // The limit is 0 once the probes vanish from some m on.
            let trailing = shift.iter().rev().take_while(|&&d| d <= 1e-12).count();
            let verdict = if trailing >= 2 { Verdict::Converges } else { Verdict::Undetermined };
            Ok(MembershipReport { series: None, shift_distances: shift, window, verdict })
        }
    }
}

fn check_horizon(p: &ProductState, need: usize) -> Result<()> {
    match p.horizon() {
        Some(h) if h < need => Err(Error::Invalid(format!("generator provides {h} vectors, {need} requested"))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// (name, verdict) for the four equivalent conditions.
    pub forms: Vec<(String, SeriesVerdict)>,
    /// Partial products Π|⟨ξ_m, ξ′_m⟩| at the horizon ladder.
    pub products: Vec<f64>,
    pub agree: bool,
    pub verdict: Verdict,
}

/// Terms of the four forms for a list of site pairs.
fn equivalence_terms(a: &[Vec<c64>], b: &[Vec<c64>]) -> [Vec<f64>; 4] {
    let mut out: [Vec<f64>; 4] = Default::default();
    for (x, y) in a.iter().zip(b) {
        let c = overlap(x, y);
        out[0].push(1.0 - c);
        out[1].push(4.0 * (1.0 - c * c));
        out[2].push(if c == 0.0 { f64::INFINITY } else { -c.ln() });
        let ip = linalg::inner(y, x);
        let ph = if ip.norm() > 0.0 { ip / ip.norm() } else { cx(1.0, 0.0) };
        let d: Vec<c64> = x.iter().zip(y).map(|(p, q)| p - ph * q).collect();
        out[3].push(linalg::norm(&d).powi(2));
    }
    out
}

pub const EQUIVALENCE_FORMS: [&str; 4] = ["overlap", "state-norm", "log-product", "aligned-vectors"];

/// Equivalence of two product states by the four equivalent series:
/// Σ(1−|c_m|), Σ‖ω_m − ω′_m‖² = Σ 4(1−|c_m|²), −ln Π|c_m|, and
/// Σ‖ξ_m − e^{iφ_m}ξ′_m‖² with phases aligned.
pub fn equivalence_test(a: &StateSpec, b: &StateSpec, horizons: &[usize], rule: &SeriesRule) -> Result<EquivalenceReport> {
    let (pa, pb) = (a.as_product()?, b.as_product()?);
    if pa.base() != pb.base() {
        return Err(Error::Incompatible("state bases differ".into()));
    }
    let top = horizons.iter().copied().max().unwrap_or(0);
    check_horizon(pa, top)?;
    check_horizon(pb, top)?;
    let terms = equivalence_terms(&pa.sites(top), &pb.sites(top));
    let forms: Vec<(String, SeriesVerdict)> = EQUIVALENCE_FORMS
        .iter()
        .zip(terms.iter())
        .map(|(name, t)| (name.to_string(), classify_series(t, horizons, rule)))
        .collect();
    let products = forms[2].1.partial_sums.iter().map(|s| (-s).exp()).collect();
    let first = forms[0].1.verdict;
    let agree = forms.iter().all(|(_, v)| v.verdict == first);
    let verdict = if agree { first } else { Verdict::Undetermined };
    Ok(EquivalenceReport { forms, products, agree, verdict })
}

#[derive(Debug, Clone)]
pub struct ConjugacyReport {
    /// The gauge g aligning ω′∘τ_g with ω.
    pub g: Mat<c64>,
    /// Σ(1 − |⟨ξ_m, g^*ξ′_m⟩|).
    pub aligned: SeriesVerdict,
    pub heuristic: bool,
    pub verdict: Verdict,
    /// Decision by the limit reduction when both limits are declared.
    pub exact: Option<Verdict>,
}

/// Weight decay of the polar alignment search.
pub const ALIGN_DECAY: f64 = 0.9;
/// Fixed-point iterations of the polar alignment search.
pub const ALIGN_ITERATIONS: usize = 50;

/// A unitary g with g h ∝ h′.
fn limit_alignment(h: &[c64], hp: &[c64]) -> Mat<c64> {
    rotation_to_e0(hp).adjoint() * rotation_to_e0(h)
}

/// Maximizes Σ w_m |⟨ξ′_m, g ξ_m⟩| by alternating phase and polar updates.
fn polar_alignment(a: &[Vec<c64>], b: &[Vec<c64>], n: usize) -> Mat<c64> {
    let weights: Vec<f64> = (0..a.len()).map(|m| ALIGN_DECAY.powi(m as i32)).collect();
    let score = |g: &Mat<c64>| -> f64 {
        a.iter()
            .zip(b)
            .zip(&weights)
            .map(|((x, y), w)| w * linalg::inner(y, &linalg::matvec(g.as_ref(), x)).norm())
            .sum()
    };
    let mut starts = vec![linalg::identity(n)];
    if let (Some(x), Some(y)) = (a.first(), b.first()) {
        starts.push(limit_alignment(x, y));
    }
    let mut best = linalg::identity(n);
    let mut best_score = f64::NEG_INFINITY;
    for mut g in starts {
        for _ in 0..ALIGN_ITERATIONS {
            let mut acc = linalg::zeros(n, n);
            for ((x, y), w) in a.iter().zip(b).zip(&weights) {
                let ip = linalg::inner(y, &linalg::matvec(g.as_ref(), x));
                let ph = if ip.norm() > 0.0 { ip / ip.norm() } else { cx(1.0, 0.0) };
                for r in 0..n {
                    for c in 0..n {
                        acc[(r, c)] += y[r] * x[c].conj() * ph * *w;
                    }
                }
            }
            let next = linalg::polar_unitary(acc.as_ref());
            let done = linalg::max_abs_diff(next.as_ref(), g.as_ref()) < 1e-14;
            g = next;
            if done {
                break;
            }
        }
        let s = score(&g);
        if s > best_score {
            best_score = s;
            best = g;
        }
    }
    best
}

/// Conjugacy of two product states: whether ω′∘τ_g is equivalent to ω for some g.
///
/// When both sequences declare limits h, h′ and at least one of them
/// converges summably to its limit, the decision is exact: conjugate iff both
/// do. Otherwise g comes from a polar alignment search and the result is
/// marked heuristic.
pub fn conjugacy_test(a: &StateSpec, b: &StateSpec, horizons: &[usize], rule: &SeriesRule) -> Result<ConjugacyReport> {
    let (pa, pb) = (a.as_product()?, b.as_product()?);
    let n = pa.base();
    if n != pb.base() {
        return Err(Error::Incompatible("state bases differ".into()));
    }
    let top = horizons.iter().copied().max().unwrap_or(0);
    check_horizon(pa, top)?;
    check_horizon(pb, top)?;
    let xa = pa.sites(top);
    let xb = pb.sites(top);
    let tail = |x: &[Vec<c64>], h: &[c64]| {
        let t: Vec<f64> = x.iter().map(|v| 1.0 - overlap(v, h)).collect();
        classify_series(&t, horizons, rule).verdict
    };
    let mut exact = None;
    let mut g = None;
    if let (Some(h), Some(hp)) = (pa.declared_limit(), pb.declared_limit()) {
        let (ca, cb) = (tail(&xa, &h), tail(&xb, &hp));
        let conv = |v| v == Verdict::Converges;
        let div = |v| v == Verdict::Diverges;
        if conv(ca) && conv(cb) {
            exact = Some(Verdict::Converges);
        } else if (conv(ca) && div(cb)) || (div(ca) && conv(cb)) {
            exact = Some(Verdict::Diverges);
        }
        if exact.is_some() {
            g = Some(limit_alignment(&h, &hp));
        }
    }
    let heuristic = exact.is_none();
    let g = match g {
        Some(g) => g,
        None => polar_alignment(&xa, &xb, n),
    };
    let terms: Vec<f64> = xa
        .iter()
        .zip(&xb)
        .map(|(x, y)| 1.0 - overlap(x, &linalg::matvec(g.adjoint().to_owned().as_ref(), y)))
        .collect();
    let aligned = classify_series(&terms, horizons, rule);
    let verdict = exact.unwrap_or(aligned.verdict);
    Ok(ConjugacyReport { g, aligned, heuristic, verdict, exact })
}

#[derive(Debug, Clone)]
pub struct MixConjugacy {
    pub conjugate: bool,
    /// φ with λ_i = λ′_{φ(i)}.
    pub permutation: Option<Vec<usize>>,
    /// g with g^*ξ′_{φ(i)} ∝ ξ_i.
    pub g: Option<Mat<c64>>,
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn mix_parts(s: &StateSpec) -> Result<(&[f64], &[Vec<c64>])> {
    match &s.kind {
        StateKind::FiniteMix { weights, vectors, .. } => Ok((weights, vectors)),
        _ => Err(Error::Invalid(format!("expected a finite mix, got {}", s.name()))),
    }
}

/// A unitary g with g ξ_i ∝ ξ′_i for all i, if one exists.
fn frame_alignment(x: &[Vec<c64>], y: &[Vec<c64>], n: usize) -> Option<Mat<c64>> {
    let k = x.len();
    for i in 0..k {
        for j in 0..i {
            let d = linalg::inner(&x[i], &x[j]).norm() - linalg::inner(&y[i], &y[j]).norm();
            if d.abs() > 1e-10 {
                return None;
            }
        }
    }
    // Phases c_i with g ξ_i = c_i ξ′_i, propagated along non-orthogonal pairs.
    let mut phase: Vec<Option<c64>> = vec![None; k];
    for root in 0..k {
        if phase[root].is_some() {
            continue;
        }
        phase[root] = Some(cx(1.0, 0.0));
        let mut stack = vec![root];
        while let Some(j) = stack.pop() {
            for i in 0..k {
                let gx = linalg::inner(&x[j], &x[i]);
                if phase[i].is_none() && gx.norm() > 1e-10 {
                    let gy = linalg::inner(&y[j], &y[i]);
                    let r = phase[j].unwrap() * gx / gy;
                    phase[i] = Some(r / r.norm());
                    stack.push(i);
                }
            }
        }
    }
    // Spanning subset by greedy Gram–Schmidt.
    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut span = Vec::new();
    for (i, v) in x.iter().enumerate() {
        let mut w = v.clone();
        for b in &basis {
            let c = linalg::inner(b, &w);
            w.iter_mut().zip(b).for_each(|(a, q)| *a -= c * q);
        }
        let s = linalg::norm(&w);
        if s > 1e-8 {
            basis.push(w.into_iter().map(|a| a / s).collect());
            span.push(i);
        }
    }
    let mut acc = linalg::zeros(n, n);
    for &i in &span {
        let c = phase[i].unwrap();
        for r in 0..n {
            for s in 0..n {
                acc[(r, s)] += c * y[i][r] * x[i][s].conj();
            }
        }
    }
    let g = linalg::polar_unitary(acc.as_ref());
    let ok = (0..k).all(|i| linalg::inner(&y[i], &linalg::matvec(g.as_ref(), &x[i])).norm() >= 1.0 - 1e-10);
    ok.then_some(g)
}

/// Conjugacy of Σλ_i ω_i^{⊗∞} and Σλ′_i ω′_i^{⊗∞}: equal weights after a
/// permutation φ and one gauge g with ω_i = ω′_{φ(i)}∘τ_g.
pub fn finite_mix_conjugacy(a: &StateSpec, b: &StateSpec) -> Result<MixConjugacy> {
    let (la, va) = mix_parts(a)?;
    let (lb, vb) = mix_parts(b)?;
    let none = MixConjugacy { conjugate: false, permutation: None, g: None };
    if a.n != b.n || la.len() != lb.len() {
        return Ok(none);
    }
    let k = la.len();
    let mut p: Vec<usize> = (0..k).collect();
    loop {
        if (0..k).all(|i| (la[i] - lb[p[i]]).abs() <= TOL) {
            let y: Vec<Vec<c64>> = p.iter().map(|&j| vb[j].clone()).collect();
            if let Some(g) = frame_alignment(va, &y, a.n) {
                return Ok(MixConjugacy { conjugate: true, permutation: Some(p), g: Some(g) });
            }
        }
        if !next_permutation(&mut p) {
            return Ok(none);
        }
    }
}

#[derive(Debug, Clone)]
pub struct HellingerReport {
    /// a = Σ_i √(p_i q_i)
    pub affinity: f64,
    pub horizons: Vec<usize>,
    /// a^M at each horizon.
    pub products: Vec<f64>,
    /// Diverges means the product tends to 0 and the measures are singular.
    pub verdict: Verdict,
}

impl HellingerReport {
    pub fn singular(&self) -> bool {
        self.verdict == Verdict::Diverges
    }
}

/// Kakutani's criterion for the product measures μ_p, μ_q.
pub fn hellinger_singularity(p: &[f64], q: &[f64], horizons: &[usize]) -> Result<HellingerReport> {
    let mp = crate::lattice::MeasureSpec::new(p.to_vec())?;
    let mq = crate::lattice::MeasureSpec::new(q.to_vec())?;
    if mp.base() != mq.base() {
        return Err(Error::Incompatible("weight vectors differ in length".into()));
    }
    let a: f64 = p.iter().zip(q).map(|(x, y)| (x * y).sqrt()).sum();
    let a = a.min(1.0);
    let products = horizons.iter().map(|&m| a.powi(m as i32)).collect();
    let verdict = if a < 1.0 - TOL { Verdict::Diverges } else { Verdict::Converges };
    Ok(HellingerReport { affinity: a, horizons: horizons.to_vec(), products, verdict })
}

/// ω∘τ_g with τ_g(s_i) = Σ_j g_{ji} s_j.
pub fn gauge_transform(spec: &StateSpec, g: &Mat<c64>) -> Result<StateSpec> {
    let n = spec.n;
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::Shape { got: g.nrows() * g.ncols(), want: n * n });
    }
    let d = linalg::unitarity_defect(g.as_ref());
    if d > TOL {
        return Err(Error::NotUnitary(d));
    }
    let gh = g.adjoint().to_owned();
    let kind = match &spec.kind {
        StateKind::Cuntz { eta } => StateKind::Cuntz { eta: linalg::matvec(g.transpose(), eta) },
        StateKind::Product(p) => {
            let twist = match &p.twist {
                Some(t) => &gh * t,
                None => gh,
            };
            StateKind::Product(ProductState { twist: Some(twist), ..p.clone() })
        }
        StateKind::FiniteMix { anchor, weights, vectors } => StateKind::FiniteMix {
            anchor: *anchor,
            weights: weights.clone(),
            vectors: vectors.iter().map(|v| linalg::matvec(gh.as_ref(), v)).collect(),
        },
        StateKind::NearestNeighbor => {
            return Err(Error::Invalid("the gauge image of the nearest-neighbor state is not a built-in state kind".into()))
        }
    };
    Ok(StateSpec { n, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(d: &[usize], n: usize) -> Word {
        Word::new(d.to_vec(), n).unwrap()
    }

    fn ladder() -> Vec<usize> {
        vec![10, 100, 1000, 10_000, 100_000]
    }

    fn theta() -> StateSpec {
        StateSpec::product(ProductState::from_family(SequenceFamily::theta_harmonic(2).unwrap()))
    }

    fn constant(h: Vec<c64>) -> StateSpec {
        StateSpec::product(ProductState::from_family(SequenceFamily::constant(h).unwrap()))
    }

    #[test]
    fn theta_ladder() {
        let got: Vec<f64> = (1..=7).map(theta_harmonic).collect();
        let want = [1.0, 0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.25];
        for (a, b) in got.iter().zip(want) {
            assert_eq!(*a, b);
        }
        for q in 1..2000usize {
            assert_eq!(theta_block(q * (q + 1) / 2), q);
            assert_eq!(theta_block(q * (q + 1) / 2 + 1), q + 1);
        }
    }

    #[test]
    fn nearest_neighbor_examples() {
        let nn = StateSpec::nearest_neighbor(2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v = eval_state(&nn, &w(&[i], 2), &w(&[j], 2)).unwrap();
                let want = if i == j { 0.5 } else { 0.0 };
                assert!((v - cx(want, 0.0)).norm() < TOL);
            }
        }
        let v = eval_state(&nn, &w(&[0, 1], 2), &w(&[1, 1], 2)).unwrap();
        assert!((v - cx(-0.25, 0.0)).norm() < TOL);
        let b = nearest_neighbor_brute_force(2, &w(&[0, 1], 2), &w(&[1, 1], 2)).unwrap();
        assert!((b - cx(-0.25, 0.0)).norm() < TOL);
    }

    #[test]
    fn nearest_neighbor_closed_form_matches_operators() {
        for n in 2..=3 {
            let nn = StateSpec::nearest_neighbor(n).unwrap();
            for k in 1..=2 {
                for i in Word::all(k, n) {
                    for j in Word::all(k, n) {
                        let a = eval_state(&nn, &i, &j).unwrap();
                        let b = nearest_neighbor_brute_force(n, &i, &j).unwrap();
                        assert!((a - b).norm() < TOL, "{i:?} {j:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn cuntz_uniform_diagonal() {
        let n = 3;
        let eta = vec![cx(1.0 / 3f64.sqrt(), 0.0); 3];
        let s = StateSpec::cuntz(eta).unwrap();
        for k in 1..=3 {
            for i in Word::all(k, n) {
                let v = eval_state(&s, &i, &i).unwrap();
                assert!((v - cx((n as f64).powi(-(k as i32)), 0.0)).norm() < TOL);
            }
        }
    }

    #[test]
    fn density_matrices_are_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let eta = linalg::random_unit_vector(2, &mut rng);
        let specs = vec![
            StateSpec::cuntz(eta.clone()).unwrap(),
            theta(),
            StateSpec::nearest_neighbor(2).unwrap(),
            StateSpec::finite_mix(1, vec![0.25, 0.75], vec![vec![cx(1.0, 0.0), cx(0.0, 0.0)], eta.clone()]).unwrap(),
            StateSpec::product(ProductState::from_gauge(SequenceFamily::theta_harmonic(2).unwrap().unitary_sequence(10).unwrap())),
        ];
        for s in &specs {
            let mut prev: Option<MatrixObservable> = None;
            for k in 1..=4 {
                let rho = density_matrix(s, k).unwrap();
                let ev = linalg::hermitian_eigenvalues(rho.matrix().as_ref());
                assert!(ev[0] >= -1e-10, "{}", s.name());
                assert!((linalg::trace(rho.matrix().as_ref()) - cx(1.0, 0.0)).norm() < TOL);
                if let Some(p) = prev {
                    let pt = partial_trace_last(&rho).unwrap();
                    assert!(linalg::max_abs_diff(pt.matrix().as_ref(), p.matrix().as_ref()) < TOL);
                }
                prev = Some(rho);
            }
        }
        let cu = density_matrix(&specs[0], 2).unwrap();
        let v: Vec<c64> = eta.iter().map(|e| e.conj()).collect();
        let want = kron_power(&projector(&v), 2);
        assert!(linalg::max_abs_diff(cu.matrix().as_ref(), want.as_ref()) < TOL);
    }

    #[test]
    fn density_entries_match_eval() {
        let nn = StateSpec::nearest_neighbor(2).unwrap();
        let rho = density_matrix(&nn, 2).unwrap();
        for i in Word::all(2, 2) {
            for j in Word::all(2, 2) {
                let want = nearest_neighbor_value(2, i.digits(), j.digits());
                assert!((rho.matrix()[(j.index(), i.index())] - want).norm() < TOL);
            }
        }
    }

    #[test]
    fn nearest_neighbor_shifted_state_is_invariant() {
        let nn = StateSpec::nearest_neighbor(2).unwrap();
        for k in 1..=3 {
            let a = density_window(&nn, 1, k).unwrap();
            let b = density_window(&nn, 2, k).unwrap();
            assert!(linalg::max_abs_diff(a.matrix().as_ref(), b.matrix().as_ref()) < TOL);
            let c = partial_trace_first(&density_window(&nn, 0, k + 1).unwrap()).unwrap();
            assert!(linalg::max_abs_diff(a.matrix().as_ref(), c.matrix().as_ref()) < TOL);
        }
        // ω itself is not invariant: e_01 ⊗ e_11 has value −1/4 on [0, 2) and 0 on [1, 3).
        let i = w(&[0, 1], 2);
        let j = w(&[1, 1], 2);
        assert!((eval_state_at(&nn, 0, &i, &j).unwrap() - cx(-0.25, 0.0)).norm() < TOL);
        assert!(eval_state_at(&nn, 1, &i, &j).unwrap().norm() < TOL);
        let r = in_p_test(&nn, &ladder(), 2, &SeriesRule::default()).unwrap();
        assert!(r.shift_distances[0] > 0.1);
        assert!(r.shift_distances[1..].iter().all(|&d| d <= 1e-12));
        assert_eq!(r.verdict, Verdict::Converges);
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = linalg::random_unit_vector(3, &mut rng);
        let b = linalg::random_unit_vector(3, &mut rng);
        let d = state_distance(&constant(a.clone()), &constant(b.clone()), 1, 0).unwrap();
        let c = linalg::inner(&a, &b).norm();
        assert!((d - 2.0 * (1.0 - c * c).sqrt()).abs() < 1e-12);
        assert!(state_distance(&theta(), &theta(), 3, 2).unwrap() < TOL);
        let nn = StateSpec::nearest_neighbor(2).unwrap();
        let h = constant(vec![cx(1.0, 0.0), cx(0.0, 0.0)]);
        let mut last = 0.0;
        for k in 1..=3 {
            let d = state_distance(&nn, &h, k, 0).unwrap();
            assert!(d >= last - 1e-12 && d <= 2.0 + 1e-12);
            last = d;
        }
    }

    #[test]
    fn phase_alignment_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let a = linalg::random_unit_vector(3, &mut rng);
            let b = linalg::random_unit_vector(3, &mut rng);
            let d: Vec<c64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let lhs = linalg::norm(&d).powi(2);
            let rhs = 2.0 * (1.0 - linalg::inner(&a, &b).re);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_examples() {
        let rule = SeriesRule::default();
        let r = in_p_test(&constant(vec![cx(0.6, 0.0), cx(0.0, 0.8)]), &ladder(), 1, &rule).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        let r = in_p_test(&theta(), &ladder(), 1, &rule).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        let s = r.series.unwrap();
        assert!(s.partial_sums.iter().all(|&x| x <= 2f64.sqrt()));
        assert!(s.partial_sums.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn equivalence_examples() {
        let rule = SeriesRule::default();
        let e0v = vec![cx(1.0, 0.0), cx(0.0, 0.0)];
        let r = equivalence_test(&theta(), &theta(), &ladder(), &rule).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        assert!(r.products.iter().all(|&p| p == 1.0));
        let r = equivalence_test(&theta(), &constant(e0v.clone()), &ladder(), &rule).unwrap();
        assert!(r.agree);
        assert_eq!(r.verdict, Verdict::Diverges);
        let geo = StateSpec::product(ProductState::from_family(SequenceFamily::geometric(2, 0.5).unwrap()));
        let r = equivalence_test(&geo, &constant(e0v), &ladder(), &rule).unwrap();
        assert!(r.agree);
        assert_eq!(r.verdict, Verdict::Converges);
    }

    #[test]
    fn conjugacy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let rule = SeriesRule::default();
        let g0 = linalg::random_unitary(2, &mut rng);
        let r = conjugacy_test(&theta(), &gauge_transform(&theta(), &g0).unwrap(), &ladder(), &rule).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        let r = conjugacy_test(&theta(), &constant(linalg::random_unit_vector(2, &mut rng)), &ladder(), &rule).unwrap();
        assert_eq!(r.verdict, Verdict::Diverges);
        assert!(!r.heuristic);
        let geo = StateSpec::product(ProductState::from_family(SequenceFamily::geometric(2, 0.5).unwrap()));
        let r = conjugacy_test(&geo, &gauge_transform(&geo, &g0).unwrap(), &ladder(), &rule).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        assert!(!r.heuristic);
        assert_eq!(r.aligned.verdict, Verdict::Converges);
    }

    #[test]
    fn finite_mix_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let v: Vec<Vec<c64>> = (0..3).map(|_| linalg::random_unit_vector(3, &mut rng)).collect();
        let a = StateSpec::finite_mix(0, vec![0.2, 0.3, 0.5], v.clone()).unwrap();
        let r = finite_mix_conjugacy(&a, &a).unwrap();
        assert!(r.conjugate);
        assert_eq!(r.permutation.unwrap(), vec![0, 1, 2]);
        let g0 = linalg::random_unitary(3, &mut rng);
        let rotated: Vec<Vec<c64>> = v.iter().map(|x| linalg::matvec(g0.as_ref(), x)).collect();
        let b = StateSpec::finite_mix(0, vec![0.3, 0.5, 0.2], vec![rotated[1].clone(), rotated[2].clone(), rotated[0].clone()]).unwrap();
        let r = finite_mix_conjugacy(&a, &b).unwrap();
        assert!(r.conjugate);
        let g = r.g.unwrap();
        let ratio = g[(0, 0)] / g0[(0, 0)];
        let scaled = Mat::from_fn(3, 3, |i, j| g0[(i, j)] * ratio);
        assert!(linalg::max_abs_diff(g.as_ref(), scaled.as_ref()) < 1e-9);
        assert!(finite_mix_conjugacy(&b, &a).unwrap().conjugate);
        let basis = vec![vec![cx(1.0, 0.0), cx(0.0, 0.0)], vec![cx(0.0, 0.0), cx(1.0, 0.0)]];
        let x = StateSpec::finite_mix(0, vec![0.5, 0.5], basis.clone()).unwrap();
        let y = StateSpec::finite_mix(0, vec![1.0 / 3.0, 2.0 / 3.0], basis).unwrap();
        assert!(!finite_mix_conjugacy(&x, &y).unwrap().conjugate);
    }

    #[test]
    fn finite_mix_domain() {
        let m = StateSpec::finite_mix(2, vec![1.0], vec![vec![cx(1.0, 0.0), cx(0.0, 0.0)]]).unwrap();
        assert!(matches!(eval_state(&m, &w(&[0], 2), &w(&[0], 2)), Err(Error::Domain(_))));
        assert!((eval_state_at(&m, 2, &w(&[0], 2), &w(&[0], 2)).unwrap() - cx(1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn hellinger_examples() {
        let r = hellinger_singularity(&[0.5, 0.5], &[0.25, 0.75], &[1, 40]).unwrap();
        assert!((r.affinity - (0.125f64.sqrt() + 0.375f64.sqrt())).abs() < 1e-15);
        assert!(r.products[1] < 0.25);
        assert!(r.singular());
        let r = hellinger_singularity(&[0.3, 0.7], &[0.3, 0.7], &[10]).unwrap();
        assert_eq!(r.affinity, 1.0);
        assert!(!r.singular());
        let r = hellinger_singularity(&[1.0, 0.0], &[0.0, 1.0], &[1]).unwrap();
        assert_eq!(r.products[0], 0.0);
    }

    #[test]
    fn gauge_transform_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let n = 3;
        let eta = linalg::random_unit_vector(n, &mut rng);
        let g = linalg::random_unitary(n, &mut rng);
        let s = StateSpec::cuntz(eta.clone()).unwrap();
        let t = gauge_transform(&s, &g).unwrap();
        // ω_η∘τ_g(s_i s_j^*) = Σ g_{ai} conj(g_{bj}) η_a η̄_b
        for i in 0..n {
            for j in 0..n {
                let got = eval_state(&t, &w(&[i], n), &w(&[j], n)).unwrap();
                let mut want = cx(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        want += g[(a, i)] * g[(b, j)].conj() * eval_state(&s, &w(&[a], n), &w(&[b], n)).unwrap();
                    }
                }
                assert!((got - want).norm() < 1e-12);
            }
        }
        let id = gauge_transform(&s, &linalg::identity(n)).unwrap();
        for i in Word::all(2, n) {
            for j in Word::all(2, n) {
                assert!((eval_state(&id, &i, &j).unwrap() - eval_state(&s, &i, &j).unwrap()).norm() < 1e-15);
            }
        }
        assert!(gauge_transform(&StateSpec::nearest_neighbor(n).unwrap(), &g).is_err());
    }
}
