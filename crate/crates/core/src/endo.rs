//! The endomorphism α(A) = Σ S_i A S_i^* on truncated matrix algebras.
//!
//! Dense routes work on level-m matrices. [`LocalObservable`] keeps
//! I^{⊗j} ⊗ core ⊗ (rank-one tail) in compressed form so that long orbits
//! α^k(A) can be followed past the dense level budget.

use crate::cuntz_rep::{IsometryFamily, Variant};
use crate::error::{Error, Result};
use crate::lattice::{char_value, CylinderVector, MeasureSpec, Word, TOL};
use crate::linalg::{self, cx, pow};
use faer::{c64, Mat};

/// A level-m element of M_{n^m} in absorbed point coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixObservable {
    n: usize,
    level: usize,
    mat: Mat<c64>,
}

impl MatrixObservable {
    pub fn new(n: usize, level: usize, mat: Mat<c64>) -> Result<Self> {
        crate::lattice::check_base(n)?;
        let d = pow(n, level);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::Shape { got: mat.nrows() * mat.ncols(), want: d * d });
        }
        Ok(MatrixObservable { n, level, mat })
    }

    pub fn identity(n: usize, level: usize) -> Self {
        MatrixObservable { n, level, mat: linalg::identity(pow(n, level)) }
    }

    /// E_PQ = |P⟩⟨Q| for words of equal length.
    pub fn matrix_unit(p: &Word, q: &Word) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::LengthMismatch(p.len(), q.len()));
        }
        if p.base() != q.base() {
            return Err(Error::Incompatible("word bases differ".into()));
        }
        let n = p.base();
        let d = pow(n, p.len());
        let mut mat = linalg::zeros(d, d);
        mat[(p.index(), q.index())] = cx(1.0, 0.0);
        Ok(MatrixObservable { n, level: p.len(), mat })
    }

    pub fn base(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.mat
    }

    /// A ⊗ I at a deeper level.
    pub fn embed(&self, target: usize) -> Result<Self> {
        if target < self.level {
            return Err(Error::LevelTooLow { got: target, need: self.level });
        }
        let id = linalg::identity(pow(self.n, target - self.level));
        Ok(MatrixObservable { n: self.n, level: target, mat: linalg::kron(self.mat.as_ref(), id.as_ref()) })
    }

    pub fn norm(&self) -> f64 {
        linalg::op_norm(self.mat.as_ref())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::max_abs_diff(self.mat.as_ref(), self.mat.adjoint().to_owned().as_ref()) <= tol
    }

    pub fn is_projection(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && linalg::max_abs_diff((&self.mat * &self.mat).as_ref(), self.mat.as_ref()) <= tol
    }

    /// ⟨ξ, Aξ⟩ with levels aligned by embedding.
    pub fn expectation(&self, xi: &CylinderVector) -> Result<c64> {
        if xi.base() != self.n {
            return Err(Error::Incompatible("bases differ".into()));
        }
        let l = self.level.max(xi.level());
        let a = self.embed(l)?;
        let v = xi.embed(l)?;
        Ok(linalg::inner(v.amps(), &linalg::matvec(a.mat.as_ref(), v.amps())))
    }

    fn check_compatible(&self, fam: &IsometryFamily) -> Result<()> {
        if fam.base() != self.n {
            return Err(Error::Incompatible("observable and family bases differ".into()));
        }
        Ok(())
    }
}

/// α(A) = Σ_i S_i A S_i^* from level m to level m+1.
pub fn alpha_apply(fam: &IsometryFamily, a: &MatrixObservable) -> Result<MatrixObservable> {
    a.check_compatible(fam)?;
    let n = fam.base();
    let m = a.level;
    fam.check_level(m + 1)?;
    if m == 0 {
        // A scalar multiple of the identity; unitality fixes the image.
        let c = a.mat[(0, 0)];
        let mut mat = linalg::identity(n);
        for i in 0..n {
            mat[(i, i)] = c;
        }
        return MatrixObservable::new(n, 1, mat);
    }
    let d = pow(n, m + 1);
    let mut out = linalg::zeros(d, d);
    for i in 0..n {
        let s = fam.isometry_matrix(i, m)?;
        out += &s * &a.mat * s.adjoint();
    }
    MatrixObservable::new(n, m + 1, out)
}

pub fn alpha_power(fam: &IsometryFamily, a: &MatrixObservable, k: usize) -> Result<MatrixObservable> {
    let mut x = a.clone();
    for _ in 0..k {
        x = alpha_apply(fam, &x)?;
    }
    Ok(x)
}

/// 1_n ⊗ A.
pub fn canonical_shift(a: &MatrixObservable) -> MatrixObservable {
    let id = linalg::identity(a.n);
    MatrixObservable { n: a.n, level: a.level + 1, mat: linalg::kron(id.as_ref(), a.mat.as_ref()) }
}

/// Commutator matrix K_B with K_B vec(X) = vec(XB − BX), column-major vec.
fn commutator_matrix(b: &Mat<c64>) -> Mat<c64> {
    let d = b.nrows();
    let id = linalg::identity(d);
    linalg::kron(b.transpose(), id.as_ref()) - linalg::kron(id.as_ref(), b.as_ref())
}

/// Clock and shift on C^d; together they generate M_d.
fn weyl_pair(d: usize) -> (Mat<c64>, Mat<c64>) {
    let shift = Mat::from_fn(d, d, |i, j| if i == (j + 1) % d { cx(1.0, 0.0) } else { cx(0.0, 0.0) });
    let clock = Mat::from_fn(d, d, |i, j| {
        if i == j {
            c64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / d as f64)
        } else {
            cx(0.0, 0.0)
        }
    });
    (shift, clock)
}

/// Singular values below this count as zero in the commutant system.
pub const RANK_CUTOFF: f64 = 1e-9;

/// dim {X ∈ M_{n^m} : [X, α(A)] = 0 for all A ∈ M_{n^{m-1}}}.
///
/// M_{n^{m-1}} is generated by a clock/shift pair, so the commutant of its
/// image is the nullspace of the two stacked commutator systems.
pub fn relative_commutant_dim(fam: &IsometryFamily, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    let n = fam.base();
    let d_in = pow(n, m - 1);
    let (x, z) = weyl_pair(d_in);
    let ax = alpha_apply(fam, &MatrixObservable::new(n, m - 1, x)?)?;
    let az = alpha_apply(fam, &MatrixObservable::new(n, m - 1, z)?)?;
    let kx = commutator_matrix(&ax.mat);
    let kz = commutator_matrix(&az.mat);
    let dd = kx.ncols();
    let stacked = Mat::from_fn(2 * dd, dd, |i, j| if i < dd { kx[(i, j)] } else { kz[(i - dd, j)] });
    let sv = linalg::singular_values(stacked.as_ref());
    let rank = sv.iter().filter(|&&s| s >= RANK_CUTOFF).count();
    Ok(dd - rank)
}

/// The same dimension from the Gram form Σ_B K_Bᴴ K_B over all matrix units
/// B = α(E_pq); eigenvalues below `RANK_CUTOFF` times the largest count as zero.
pub fn relative_commutant_gram_dim(fam: &IsometryFamily, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    let n = fam.base();
    let d_in = pow(n, m - 1);
    let d = pow(n, m);
    let mut left = linalg::zeros(d, d);
    let mut right = linalg::zeros(d, d);
    let mut cross = linalg::zeros(d * d, d * d);
    for p in 0..d_in {
        for q in 0..d_in {
            let mut e = linalg::zeros(d_in, d_in);
            e[(p, q)] = cx(1.0, 0.0);
            let b = alpha_apply(fam, &MatrixObservable::new(n, m - 1, e)?)?.mat;
            let bc = Mat::from_fn(d, d, |i, j| b[(i, j)].conj());
            left += &bc * b.transpose();
            right += b.adjoint() * &b;
            cross += linalg::kron(bc.as_ref(), b.as_ref());
            cross += linalg::kron(b.transpose(), b.adjoint().to_owned().as_ref());
        }
    }
    let id = linalg::identity(d);
    let g = linalg::kron(left.as_ref(), id.as_ref()) + linalg::kron(id.as_ref(), right.as_ref()) - cross;
    let ev = linalg::hermitian_eigenvalues(g.as_ref());
    let top = ev.last().copied().unwrap_or(0.0).abs().max(1.0);
    Ok(ev.iter().filter(|&&l| l.abs() < RANK_CUTOFF * top).count())
}

/// I^{⊗prefix} ⊗ core ⊗ P_{t_s} ⊗ P_{t_{s+1}} ⊗ …, where the optional tail
/// consists of rank-one projectors; slots past the stored tail vectors carry
/// the projector onto the constant function.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservable {
    n: usize,
    prefix: usize,
    core_slots: usize,
    core: Mat<c64>,
    tail: Option<Tail>,
}

#[derive(Debug, Clone, PartialEq)]
struct Tail {
    vectors: Vec<Vec<c64>>,
    constant: Vec<c64>,
}

impl Tail {
    fn at(&self, k: usize) -> &[c64] {
        self.vectors.get(k).map(|v| v.as_slice()).unwrap_or(&self.constant)
    }

    fn projector(&self, k: usize) -> Mat<c64> {
        let t = self.at(k);
        Mat::from_fn(t.len(), t.len(), |i, j| t[i] * t[j].conj())
    }
}

impl LocalObservable {
    /// A cylinder observable A ⊗ I ⊗ I ⊗ ….
    pub fn cylinder(a: &MatrixObservable) -> Self {
        LocalObservable { n: a.n, prefix: 0, core_slots: a.level, core: a.mat.clone(), tail: None }
    }

    /// The rank-one projector onto the vector ψ ⊗ 1 ⊗ 1 ⊗ ….
    pub fn compact_projector(psi: &CylinderVector) -> Result<Self> {
        let nrm = psi.norm();
        if (nrm - 1.0).abs() > TOL {
            return Err(Error::NotUnit(nrm));
        }
        let a = psi.amps();
        let d = a.len();
        Ok(LocalObservable {
            n: psi.base(),
            prefix: 0,
            core_slots: psi.level(),
            core: Mat::from_fn(d, d, |i, j| a[i] * a[j].conj()),
            tail: Some(Tail { vectors: Vec::new(), constant: psi.measure().slot_constant() }),
        })
    }

    pub fn prefix(&self) -> usize {
        self.prefix
    }

    pub fn core_slots(&self) -> usize {
        self.core_slots
    }

    pub fn core(&self) -> &Mat<c64> {
        &self.core
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    /// First slot past the core.
    pub fn support_end(&self) -> usize {
        self.prefix + self.core_slots
    }

    /// One application of α.
    pub fn alpha(&self, fam: &IsometryFamily) -> Result<Self> {
        if fam.base() != self.n {
            return Err(Error::Incompatible("observable and family bases differ".into()));
        }
        let n = self.n;
        let mut out = self.clone();
        match fam.variant() {
            Variant::WeightedHaar { .. } => out.prefix += 1,
            Variant::GaugePerturbed { u } => {
                for s in 0..self.core_slots {
                    if let Some(up) = u.point_ref(self.prefix + s) {
                        let full = slot_operator(n, self.core_slots, s, up);
                        out.core = &full * &out.core * full.adjoint();
                    }
                }
                if let Some(t) = &self.tail {
                    let start = self.support_end();
                    let len = t.vectors.len().max(u.horizon().saturating_sub(start));
                    let vectors = (0..len)
                        .map(|k| match u.point_ref(start + k) {
                            Some(up) => linalg::matvec(up.as_ref(), t.at(k)),
                            None => t.at(k).to_vec(),
                        })
                        .collect();
                    out.tail = Some(Tail { vectors, constant: t.constant.clone() });
                }
                out.prefix += 1;
            }
            Variant::NearestNeighbor => {
                if self.prefix > 0 {
                    out.prefix += 1;
                } else {
                    if out.core_slots == 0 {
                        out.absorb_tail_slot()?;
                    }
                    if out.core_slots == 0 || out.block_diagonal_in_first_slot() {
                        out.prefix += 1;
                    } else {
                        fam.check_level(out.core_slots + 1)?;
                        out.core = nn_expand(n, out.core_slots, &out.core);
                        out.core_slots += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    fn absorb_tail_slot(&mut self) -> Result<()> {
        if let Some(t) = &mut self.tail {
            let p = t.projector(0);
            if !t.vectors.is_empty() {
                t.vectors.remove(0);
            }
            self.core = linalg::kron(self.core.as_ref(), p.as_ref());
            self.core_slots += 1;
        }
        Ok(())
    }

    fn block_diagonal_in_first_slot(&self) -> bool {
        let b = pow(self.n, self.core_slots - 1);
        (0..self.core.nrows()).all(|i| (0..self.core.ncols()).all(|j| i / b == j / b || self.core[(i, j)] == cx(0.0, 0.0)))
    }

    /// The truncation to level L ≥ support_end as a dense matrix.
    pub fn to_dense(&self, level: usize) -> Result<MatrixObservable> {
        let end = self.support_end();
        if level < end {
            return Err(Error::LevelTooLow { got: level, need: end });
        }
        let mut m = linalg::kron(linalg::identity(pow(self.n, self.prefix)).as_ref(), self.core.as_ref());
        for k in 0..level - end {
            let f = match &self.tail {
                Some(t) => t.projector(k),
                None => linalg::identity(self.n),
            };
            m = linalg::kron(m.as_ref(), f.as_ref());
        }
        MatrixObservable::new(self.n, level, m)
    }

    /// ⟨ξ, X ξ⟩ for a cylinder vector ξ.
    pub fn expectation(&self, xi: &CylinderVector) -> Result<c64> {
        if xi.base() != self.n {
            return Err(Error::Incompatible("bases differ".into()));
        }
        let n = self.n;
        let end = self.support_end();
        let lx = xi.level();
        let (value, covered) = if self.prefix >= lx {
            let one = CylinderVector::constant(xi.measure(), self.core_slots);
            let core_val = linalg::inner(one.amps(), &linalg::matvec(self.core.as_ref(), one.amps()));
            (core_val * xi.norm().powi(2), end)
        } else {
            let l = lx.max(end);
            let v = xi.embed(l)?;
            let y = self.window(l)?;
            let w = pow(n, l - self.prefix);
            let mut acc = cx(0.0, 0.0);
            for a in 0..pow(n, self.prefix) {
                let psi = &v.amps()[a * w..(a + 1) * w];
                acc += linalg::inner(psi, &linalg::matvec(y.as_ref(), psi));
            }
            (acc, l)
        };
        let mut tail_factor = 1.0;
        if let Some(t) = &self.tail {
            let one = &t.constant;
            for k in covered.saturating_sub(end)..t.vectors.len() {
                tail_factor *= linalg::inner(one, t.at(k)).norm_sqr();
            }
        }
        Ok(value * tail_factor)
    }

    /// The operator on slots [prefix, level) with the identity prefix dropped.
    fn window(&self, level: usize) -> Result<Mat<c64>> {
        let end = self.support_end();
        let mut m = self.core.clone();
        for k in 0..level.saturating_sub(end) {
            let f = match &self.tail {
                Some(t) => t.projector(k),
                None => linalg::identity(self.n),
            };
            m = linalg::kron(m.as_ref(), f.as_ref());
        }
        Ok(m)
    }
}

/// n^c × n^c operator acting as `u` on slot s of c slots.
fn slot_operator(n: usize, c: usize, s: usize, u: &Mat<c64>) -> Mat<c64> {
    let left = linalg::identity(pow(n, s));
    let right = linalg::identity(pow(n, c - s - 1));
    linalg::kron(linalg::kron(left.as_ref(), u.as_ref()).as_ref(), right.as_ref())
}

/// Σ_i P_i ⊗ Ad(Z^i ⊗ I)(X) for X on c slots, Z = diag⟨x, ·⟩ on slot 0.
fn nn_expand(n: usize, c: usize, x: &Mat<c64>) -> Mat<c64> {
    let d = pow(n, c);
    let b = pow(n, c - 1);
    let mut out = linalg::zeros(n * d, n * d);
    for i in 0..n {
        for r in 0..d {
            for s in 0..d {
                let ph = char_value(i, r / b, n) * char_value(i, s / b, n).conj();
                out[(i * d + r, i * d + s)] = ph * x[(r, s)];
            }
        }
    }
    out
}

/// ‖X − Y‖ for tail-free local observables, computed on the union of their
/// supports with identity slots between them dropped.
pub fn local_difference_norm(x: &LocalObservable, y: &LocalObservable) -> Result<f64> {
    if x.tail.is_some() || y.tail.is_some() {
        return Err(Error::Invalid("difference norm needs cylinder observables".into()));
    }
    if x.n != y.n {
        return Err(Error::Incompatible("bases differ".into()));
    }
    let n = x.n;
    let (a, b) = if x.prefix <= y.prefix { (x, y) } else { (y, x) };
    let (dense_a, dense_b) = if b.prefix <= a.support_end() {
        let lo = a.prefix;
        let hi = a.support_end().max(b.support_end());
        let place = |o: &LocalObservable| {
            let left = linalg::identity(pow(n, o.prefix - lo));
            let right = linalg::identity(pow(n, hi - o.support_end()));
            linalg::kron(linalg::kron(left.as_ref(), o.core.as_ref()).as_ref(), right.as_ref())
        };
        (place(a), place(b))
    } else {
        let ia = linalg::identity(pow(n, a.core_slots));
        let ib = linalg::identity(pow(n, b.core_slots));
        (linalg::kron(a.core.as_ref(), ib.as_ref()), linalg::kron(ia.as_ref(), b.core.as_ref()))
    };
    Ok(linalg::op_norm((dense_a - dense_b).as_ref()))
}

/// c_k = ⟨ξ, α^k(A) ξ⟩ for k = 0..=K.
pub fn clustering_curve(fam: &IsometryFamily, a: &LocalObservable, xi: &CylinderVector, horizon: usize) -> Result<Vec<c64>> {
    if xi.measure() != fam.measure() {
        return Err(Error::MeasureMismatch);
    }
    let mut x = a.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        out.push(x.expectation(xi)?);
        if k < horizon {
            x = x.alpha(fam)?;
        }
    }
    Ok(out)
}

/// The same curve through dense matrices; fails once the level budget is hit.
pub fn clustering_curve_dense(fam: &IsometryFamily, a: &MatrixObservable, xi: &CylinderVector, horizon: usize) -> Result<Vec<c64>> {
    let mut x = a.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        out.push(x.expectation(xi)?);
        if k < horizon {
            x = alpha_apply(fam, &x)?;
        }
    }
    Ok(out)
}

/// ω_0(A) = ⟨1, A 1⟩ at A's own level.
pub fn vacuum_expectation(a: &MatrixObservable, measure: &MeasureSpec) -> Result<c64> {
    a.expectation(&CylinderVector::constant(measure, a.level))
}

#[derive(Debug, Clone)]
pub struct CesaroReport {
    pub terms: usize,
    pub norm_a: f64,
    /// 2‖A‖/N
    pub bound: f64,
    /// ‖α(A_N) − A_N‖ = ‖α^N(A) − A‖/N.
    pub defect: f64,
    /// The same norm from dense matrices, when within budget.
    pub dense_defect: Option<f64>,
    /// A_N at level ℓ+N−1, when within budget.
    pub mean: Option<MatrixObservable>,
}

/// A_N = (1/N) Σ_{m<N} α^m(A) and the defect ‖α(A_N) − A_N‖.
pub fn cesaro_mean(fam: &IsometryFamily, a: &MatrixObservable, terms: usize) -> Result<CesaroReport> {
    if terms == 0 {
        return Err(Error::Invalid("N must be at least 1".into()));
    }
    a.check_compatible(fam)?;
    let norm_a = a.norm();
    let start = LocalObservable::cylinder(a);
    let mut x = start.clone();
    for _ in 0..terms {
        x = x.alpha(fam)?;
    }
    let defect = local_difference_norm(&x, &start)? / terms as f64;
    let n = fam.base();
    let top = a.level + terms;
    let (dense_defect, mean) = if pow(n, top) <= fam.budget() {
        let l = top - 1;
        let mut acc = linalg::zeros(pow(n, l), pow(n, l));
        let mut p = a.clone();
        for k in 0..terms {
            acc += p.embed(l)?.mat;
            if k + 1 < terms {
                p = alpha_apply(fam, &p)?;
            }
        }
        let mean = MatrixObservable::new(n, l, acc * faer::Scale(cx(1.0 / terms as f64, 0.0)))?;
        let img = alpha_apply(fam, &mean)?;
        let d = linalg::op_norm((img.mat - mean.embed(top)?.mat).as_ref());
        (Some(d), Some(mean))
    } else {
        (None, None)
    };
    Ok(CesaroReport { terms, norm_a, bound: 2.0 * norm_a / terms as f64, defect, dense_defect, mean })
}

#[derive(Debug, Clone)]
pub struct ExtensionReport {
    pub window: usize,
    pub checked: usize,
    pub max_defect: f64,
}

impl ExtensionReport {
    pub fn exact(&self, tol: f64) -> bool {
        self.max_defect <= tol
    }
}

/// Right rotation of the 2W slots −W..W−1: slot s moves to s+1, the last wraps.
fn rotation_matrix(n: usize, slots: usize) -> Mat<c64> {
    let d = pow(n, slots);
    let mut p = linalg::zeros(d, d);
    let top = pow(n, slots - 1);
    for x in 0..d {
        let last = x % n;
        let y = last * top + x / n;
        p[(y, x)] = cx(1.0, 0.0);
    }
    p
}

/// A placed on slots 0..m of the window ⊗_{s=−W}^{W−1} M_n.
fn embed_right(a: &MatrixObservable, window: usize) -> Mat<c64> {
    let n = a.n;
    let left = linalg::identity(pow(n, window));
    let right = linalg::identity(pow(n, window - a.level));
    linalg::kron(linalg::kron(left.as_ref(), a.mat.as_ref()).as_ref(), right.as_ref())
}

/// Checks β(embed_right(A)) = embed_right(1 ⊗ A) with β the slot rotation.
pub fn two_sided_extension_check(window: usize, a: &MatrixObservable) -> Result<ExtensionReport> {
    if window < a.level + 1 {
        return Err(Error::Invalid(format!("window {window} too small for level {}; the shift would wrap", a.level)));
    }
    let n = a.n;
    let p = rotation_matrix(n, 2 * window);
    let lhs = &p * embed_right(a, window) * p.transpose();
    let rhs = embed_right(&canonical_shift(a), window);
    Ok(ExtensionReport { window, checked: 1, max_defect: linalg::max_abs_diff(lhs.as_ref(), rhs.as_ref()) })
}

/// The check over every matrix unit E_PQ at level m.
pub fn two_sided_extension_spanning(n: usize, window: usize, m: usize) -> Result<ExtensionReport> {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for p in Word::all(m, n) {
        for q in Word::all(m, n) {
            let r = two_sided_extension_check(window, &MatrixObservable::matrix_unit(&p, &q)?)?;
            worst = worst.max(r.max_defect);
            checked += 1;
        }
    }
    Ok(ExtensionReport { window, checked, max_defect: worst })
}
