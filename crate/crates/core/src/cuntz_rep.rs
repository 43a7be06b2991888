//! Cuntz isometry families acting between truncation levels.
//!
//! A family maps level-m vectors to level-(m+1) vectors. The nearest-neighbor
//! family reads coordinate 0 of its argument, so it lifts level-0 inputs to
//! level 1 before acting and its adjoint never returns below level 1.
//! The gauge-perturbed family at the level pair (m, m+1) uses the finite
//! product Γ_m = U_0 ⊗ … ⊗ U_{m-1}.

use crate::error::{Error, Result};
use crate::lattice::{char_value, check_base, CylinderVector, MeasureSpec, TOL};
use crate::linalg::{self, cx, pow};
use faer::{c64, Mat};

pub const DEFAULT_BUDGET: usize = 4096;

/// Which summability condition a unitary sequence is declared to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summability {
    /// Σ ‖I − U_p‖ < ∞
    Linear,
    /// Σ ‖I − U_p‖² < ∞
    Quadratic,
}

/// U_0, U_1, … given in the character basis of each coordinate; identity
/// beyond the stored horizon.
#[derive(Debug, Clone)]
pub struct UnitarySequence {
    n: usize,
    chars: Vec<Mat<c64>>,
    points: Vec<Mat<c64>>,
    declared: Summability,
    label: String,
}

impl UnitarySequence {
    pub fn identity(n: usize) -> Result<Self> {
        Self::explicit(n, Vec::new())
    }

    pub fn explicit(n: usize, mats: Vec<Mat<c64>>) -> Result<Self> {
        check_base(n)?;
        for u in &mats {
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::Shape { got: u.nrows() * u.ncols(), want: n * n });
            }
            let d = linalg::unitarity_defect(u.as_ref());
            if d > TOL {
                return Err(Error::NotUnitary(d));
            }
        }
        let f = linalg::fourier_matrix(n);
        let points = mats.iter().map(|u| &f * u * f.adjoint()).collect();
        Ok(UnitarySequence { n, chars: mats, points, declared: Summability::Linear, label: "explicit".into() })
    }

    /// The sequence with U_m e_0-alignment chosen so that the m-th site vector
    /// U_0^*⋯U_{m-1}^* e_0 equals h_m for m ≥ 1. `h[k]` holds h_{k+1}.
    pub fn from_site_vectors(n: usize, h: &[Vec<c64>]) -> Result<Self> {
        check_base(n)?;
        let mut r = linalg::identity(n);
        let mut mats = Vec::with_capacity(h.len());
        for (k, v) in h.iter().enumerate() {
            if v.len() != n {
                return Err(Error::Shape { got: v.len(), want: n });
            }
            let nv = linalg::norm(v);
            if (nv - 1.0).abs() > TOL {
                return Err(Error::NotUnit(nv));
            }
            let mut a = linalg::matvec(r.adjoint().to_owned().as_ref(), v);
            let na = linalg::norm(&a);
            a.iter_mut().for_each(|x| *x /= na);
            let u = rotation_to_e0(&a);
            r = &r * u.adjoint();
            if k % 64 == 63 {
                r = linalg::polar_unitary(r.as_ref());
            }
            mats.push(u);
        }
        let mut s = Self::explicit(n, mats)?;
        s.label = "site-vectors".into();
        Ok(s)
    }

    pub fn with_declared(mut self, s: Summability) -> Self {
        self.declared = s;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn base(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.chars.len()
    }

    pub fn declared(&self) -> Summability {
        self.declared
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// U_p in the character basis.
    pub fn char_matrix(&self, p: usize) -> Mat<c64> {
        self.chars.get(p).cloned().unwrap_or_else(|| linalg::identity(self.n))
    }

    /// U_p in point coordinates, F U_p F^*.
    pub fn point_matrix(&self, p: usize) -> Mat<c64> {
        self.points.get(p).cloned().unwrap_or_else(|| linalg::identity(self.n))
    }

    pub(crate) fn point_ref(&self, p: usize) -> Option<&Mat<c64>> {
        self.points.get(p)
    }

    /// Partial sums (Σ‖I − U_p‖, Σ‖I − U_p‖²) over the stored horizon.
    pub fn summability_sums(&self) -> (f64, f64) {
        let id = linalg::identity(self.n);
        self.chars.iter().fold((0.0, 0.0), |(a, b), u| {
            let d = linalg::op_norm((&id - u).as_ref());
            (a + d, b + d * d)
        })
    }

    /// Apply Γ_m (or its adjoint) slot by slot to a level-m amplitude vector.
    fn gamma_apply(&self, amps: &[c64], level: usize, adjoint: bool) -> Vec<c64> {
        let mut a = amps.to_vec();
        for p in 0..level.min(self.horizon()) {
            let u = &self.points[p];
            a = if adjoint {
                linalg::apply_slot(&a, self.n, level, p, u.adjoint().to_owned().as_ref())
            } else {
                linalg::apply_slot(&a, self.n, level, p, u.as_ref())
            };
        }
        a
    }
}

/// A unitary V with V a = e_0: a phase fix on a followed by the plane
/// rotation taking the phased vector to e_0.
pub fn rotation_to_e0(a: &[c64]) -> Mat<c64> {
    let n = a.len();
    let c = a[0];
    let r = c.norm();
    let ph = if r > 0.0 { c / r } else { cx(1.0, 0.0) };
    let mut phase = linalg::identity(n);
    let k = ph.conj() - cx(1.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            phase[(i, j)] += k * a[i] * a[j].conj();
        }
    }
    let ap: Vec<c64> = a.iter().map(|x| x * ph.conj()).collect();
    let mut w = ap.clone();
    w[0] = cx(0.0, 0.0);
    let s = linalg::norm(&w);
    if s < 1e-300 {
        return phase;
    }
    let u: Vec<c64> = w.iter().map(|x| x / s).collect();
    let mut rot = linalg::identity(n);
    for i in 0..n {
        for j in 0..n {
            let e0i = if i == 0 { 1.0 } else { 0.0 };
            let e0j = if j == 0 { 1.0 } else { 0.0 };
            let proj = cx(e0i * e0j, 0.0) + u[i] * u[j].conj();
            let skew = u[j].conj() * e0i - u[i] * e0j;
            rot[(i, j)] += proj * (r - 1.0) + skew * s;
        }
    }
    rot * phase
}

#[derive(Debug, Clone)]
pub enum Variant {
    WeightedHaar { eta: Vec<c64> },
    GaugePerturbed { u: UnitarySequence },
    NearestNeighbor,
}

#[derive(Debug, Clone)]
pub struct IsometryFamily {
    variant: Variant,
    measure: MeasureSpec,
    phases: Vec<c64>,
    budget: usize,
}

impl IsometryFamily {
    pub fn weighted_haar(eta: Vec<c64>) -> Result<Self> {
        check_base(eta.len())?;
        if eta.iter().any(|e| e.norm() == 0.0) {
            return Err(Error::Invalid("every η_i must be nonzero".into()));
        }
        let weights: Vec<f64> = eta.iter().map(|e| e.norm_sqr()).collect();
        let measure = MeasureSpec::new(weights)?;
        let phases = eta.iter().map(|e| e / e.norm()).collect();
        Ok(IsometryFamily { variant: Variant::WeightedHaar { eta }, measure, phases, budget: DEFAULT_BUDGET })
    }

    /// The uniform family S_iξ = n^{1/2} χ_{x_0 = i} ξ∘σ.
    pub fn haar(n: usize) -> Result<Self> {
        check_base(n)?;
        Self::weighted_haar(vec![cx((n as f64).sqrt().recip(), 0.0); n])
    }

    pub fn gauge(u: UnitarySequence) -> Result<Self> {
        let n = u.base();
        Ok(IsometryFamily {
            variant: Variant::GaugePerturbed { u },
            measure: MeasureSpec::haar(n)?,
            phases: vec![cx(1.0, 0.0); n],
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn nearest_neighbor(n: usize) -> Result<Self> {
        Ok(IsometryFamily {
            variant: Variant::NearestNeighbor,
            measure: MeasureSpec::haar(n)?,
            phases: vec![cx(1.0, 0.0); n],
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn base(&self) -> usize {
        self.measure.base()
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn name(&self) -> &'static str {
        match &self.variant {
            Variant::WeightedHaar { .. } if self.measure.is_haar() && self.phases.iter().all(|p| (p - cx(1.0, 0.0)).norm() < TOL) => "haar",
            Variant::WeightedHaar { .. } => "weighted-haar",
            Variant::GaugePerturbed { .. } => "gauge",
            Variant::NearestNeighbor => "nearest-neighbor",
        }
    }

    /// The Cuntz-state vector η whose conjugate is the joint eigenvalue of
    /// the adjoints on 1, when the family has one.
    pub fn eta(&self) -> Option<&[c64]> {
        match &self.variant {
            Variant::WeightedHaar { eta } => Some(eta),
            _ => None,
        }
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        let dim = pow(self.base(), level);
        if dim > self.budget {
            Err(Error::Budget { dim, budget: self.budget })
        } else {
            Ok(())
        }
    }

    fn check_vector(&self, i: usize, v: &CylinderVector) -> Result<()> {
        if i >= self.base() {
            return Err(Error::Digit { digit: i, base: self.base() });
        }
        if v.measure() != &self.measure {
            return Err(Error::MeasureMismatch);
        }
        Ok(())
    }

    /// Level of S_i v for v at level m.
    pub fn s_level(&self, m: usize) -> usize {
        match self.variant {
            Variant::NearestNeighbor => m.max(1) + 1,
            _ => m + 1,
        }
    }

    /// Level of S_i^* v for v at level m.
    pub fn s_star_level(&self, m: usize) -> usize {
        match self.variant {
            Variant::NearestNeighbor => m.saturating_sub(1).max(1),
            _ => m.saturating_sub(1),
        }
    }

    pub fn apply_s(&self, i: usize, v: &CylinderVector) -> Result<CylinderVector> {
        self.check_vector(i, v)?;
        let out = self.s_level(v.level());
        self.check_level(out)?;
        let n = self.base();
        let (m, amps) = match &self.variant {
            Variant::WeightedHaar { .. } => (v.level(), v.amps().to_vec()),
            Variant::GaugePerturbed { u } => (v.level(), u.gamma_apply(v.amps(), v.level(), false)),
            Variant::NearestNeighbor => {
                let w = v.embed(v.level().max(1))?;
                let m = w.level();
                let block = pow(n, m - 1);
                let amps = w
                    .amps()
                    .iter()
                    .enumerate()
                    .map(|(idx, a)| a * char_value(i, idx / block, n))
                    .collect();
                (m, amps)
            }
        };
        let block = pow(n, m);
        let mut res = vec![cx(0.0, 0.0); block * n];
        let ph = self.phases[i];
        for (y, a) in amps.iter().enumerate() {
            res[i * block + y] = ph * a;
        }
        CylinderVector::new(self.measure.clone(), m + 1, res)
    }

    pub fn apply_s_star(&self, i: usize, v: &CylinderVector) -> Result<CylinderVector> {
        self.check_vector(i, v)?;
        let n = self.base();
        let w = v.embed(v.level().max(1))?;
        let m = w.level() - 1;
        let block = pow(n, m);
        let ph = self.phases[i].conj();
        let base: Vec<c64> = w.amps()[i * block..(i + 1) * block].iter().map(|a| ph * a).collect();
        match &self.variant {
            Variant::WeightedHaar { .. } => CylinderVector::new(self.measure.clone(), m, base),
            Variant::GaugePerturbed { u } => {
                let amps = u.gamma_apply(&base, m, true);
                CylinderVector::new(self.measure.clone(), m, amps)
            }
            Variant::NearestNeighbor => {
                let x = CylinderVector::new(self.measure.clone(), m, base)?.embed(m.max(1))?;
                let lvl = x.level();
                let b = pow(n, lvl - 1);
                let amps = x
                    .amps()
                    .iter()
                    .enumerate()
                    .map(|(idx, a)| a * char_value(i, idx / b, n).conj())
                    .collect();
                CylinderVector::new(self.measure.clone(), lvl, amps)
            }
        }
    }

    /// Matrix of S_i from level m to level m+1.
    pub fn isometry_matrix(&self, i: usize, m: usize) -> Result<Mat<c64>> {
        if self.s_level(m) != m + 1 {
            return Err(Error::LevelTooLow { got: m, need: 1 });
        }
        operator_matrix(&self.measure, m, m + 1, |v| self.apply_s(i, v))
    }

    /// (max_ij ‖S_i^*S_j − δ_ij‖ on level m, ‖Σ S_iS_i^* − 1‖ on level m+1).
    pub fn cuntz_defect(&self, m: usize) -> Result<(f64, f64)> {
        let n = self.base();
        let l1 = self.s_star_level(self.s_level(m));
        let mut d1 = 0.0f64;
        let e1 = operator_matrix(&self.measure, m, l1, |v| Ok(v.clone()))?;
        for i in 0..n {
            for j in 0..n {
                let g = operator_matrix(&self.measure, m, l1, |v| self.apply_s_star(i, &self.apply_s(j, v)?))?;
                let d = if i == j { g - &e1 } else { g };
                d1 = d1.max(linalg::op_norm(d.as_ref()));
            }
        }
        let top = m + 1;
        let l2 = self.s_level(self.s_star_level(top)).max(top);
        let e2 = operator_matrix(&self.measure, top, l2, |v| Ok(v.clone()))?;
        let mut sum = linalg::zeros(e2.nrows(), e2.ncols());
        for i in 0..n {
            sum += operator_matrix(&self.measure, top, l2, |v| self.apply_s(i, &self.apply_s_star(i, v)?))?;
        }
        let d2 = linalg::hermitian_norm_bound((sum - e2).as_ref());
        Ok((d1, d2))
    }
}

/// Matrix of a level map, with images embedded to `out_level`.
pub fn operator_matrix(
    measure: &MeasureSpec,
    in_level: usize,
    out_level: usize,
    f: impl Fn(&CylinderVector) -> Result<CylinderVector>,
) -> Result<Mat<c64>> {
    let n = measure.base();
    let cols = pow(n, in_level);
    let rows = pow(n, out_level);
    let mut m = linalg::zeros(rows, cols);
    for x in 0..cols {
        let e = CylinderVector::basis(measure, in_level, x);
        let y = f(&e)?;
        if y.level() > out_level {
            return Err(Error::LevelTooLow { got: out_level, need: y.level() });
        }
        let y = y.embed(out_level)?;
        for (r, a) in y.amps().iter().enumerate() {
            m[(r, x)] = *a;
        }
    }
    Ok(m)
}

/// Γ(U) on level m in point coordinates: ⊗_{p<m} F U_p F^*.
pub fn gauge_unitary(u: &UnitarySequence, m: usize) -> Mat<c64> {
    let mut g = linalg::identity(1);
    for p in 0..m {
        g = linalg::kron(g.as_ref(), u.point_matrix(p).as_ref());
    }
    g
}

/// Change a level-m point-basis matrix to the character basis.
pub fn to_character_basis(a: &Mat<c64>, n: usize, m: usize) -> Mat<c64> {
    let mut f = linalg::identity(1);
    for _ in 0..m {
        f = linalg::kron(f.as_ref(), linalg::fourier_matrix(n).as_ref());
    }
    f.adjoint() * a * &f
}

fn check_pair(s: &IsometryFamily, t: &IsometryFamily) -> Result<()> {
    if s.base() != t.base() {
        return Err(Error::Incompatible("bases differ".into()));
    }
    if s.measure() != t.measure() {
        return Err(Error::Incompatible("measures differ".into()));
    }
    Ok(())
}

/// U = Σ_j T_j S_j^* on level m.
pub fn transfer_unitary(s: &IsometryFamily, t: &IsometryFamily, m: usize) -> Result<Mat<c64>> {
    check_pair(s, t)?;
    if m == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    s.check_level(m)?;
    let n = s.base();
    let mut u = linalg::zeros(pow(n, m), pow(n, m));
    for j in 0..n {
        u += operator_matrix(s.measure(), m, m, |v| t.apply_s(j, &s.apply_s_star(j, v)?))?;
    }
    Ok(u)
}

/// Blocks m_ji = S_j^* U S_i on level m, indexed as `[j][i]`.
pub fn radon_nikodym_matrix(s: &IsometryFamily, t: &IsometryFamily, m: usize) -> Result<Vec<Vec<Mat<c64>>>> {
    let n = s.base();
    let u = transfer_unitary(s, t, m + 1)?;
    let si: Vec<Mat<c64>> = (0..n).map(|i| s.isometry_matrix(i, m)).collect::<Result<_>>()?;
    Ok((0..n)
        .map(|j| (0..n).map(|i| si[j].adjoint() * &u * &si[i]).collect())
        .collect())
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::lattice::Word;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(m: &MeasureSpec, level: usize, rng: &mut ChaCha8Rng) -> CylinderVector {
        let d = pow(m.base(), level);
        CylinderVector::new(m.clone(), level, (0..d).map(|_| linalg::gaussian(rng)).collect()).unwrap()
    }

    fn families(n: usize, rng: &mut ChaCha8Rng) -> Vec<IsometryFamily> {
        let mut eta: Vec<c64> = (0..n).map(|_| linalg::gaussian(rng)).collect();
        let s = linalg::norm(&eta);
        eta.iter_mut().for_each(|e| *e /= s);
        let us = (0..6).map(|_| linalg::random_unitary(n, rng)).collect();
        vec![
            IsometryFamily::haar(n).unwrap(),
            IsometryFamily::weighted_haar(eta).unwrap(),
            IsometryFamily::gauge(UnitarySequence::explicit(n, us).unwrap()).unwrap(),
            IsometryFamily::nearest_neighbor(n).unwrap(),
        ]
    }

    #[test]
    fn haar_s0_on_constant() {
        let f = IsometryFamily::haar(2).unwrap();
        let one = CylinderVector::constant(f.measure(), 0);
        let s = f.apply_s(0, &one).unwrap();
        assert_eq!(s.level(), 1);
        assert!((s.amps()[0] - cx(1.0, 0.0)).norm() < TOL);
        assert!(s.amps()[1].norm() < TOL);
        let vals = s.values();
        assert!((vals[0] - cx(2f64.sqrt(), 0.0)).norm() < TOL);
    }

    #[test]
    fn orthogonal_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for f in families(3, &mut rng) {
            let v = random_vec(f.measure(), 2, &mut rng);
            let w = random_vec(f.measure(), 2, &mut rng);
            let vw = v.inner(&w).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let g = f.apply_s(i, &v).unwrap().inner(&f.apply_s(j, &w).unwrap()).unwrap();
                    let want = if i == j { vw } else { cx(0.0, 0.0) };
                    assert!((g - want).norm() < TOL, "{}", f.name());
                }
            }
        }
    }

    #[test]
    fn nearest_neighbor_on_constant() {
        let f = IsometryFamily::nearest_neighbor(2).unwrap();
        let one = CylinderVector::constant(f.measure(), 1);
        for i in 0..2 {
            let t = f.apply_s(i, &one).unwrap();
            assert_eq!(t.level(), 2);
            let vals = t.values();
            for x in Word::all(2, 2) {
                let (x0, x1) = (x.digits()[0], x.digits()[1]);
                let want = if x0 == i { char_value(x0, x1, 2) * 2f64.sqrt() } else { cx(0.0, 0.0) };
                assert!((vals[x.index()] - want).norm() < TOL);
            }
        }
    }

    #[test]
    fn adjoints_on_constant() {
        for n in 2..=4 {
            let f = IsometryFamily::haar(n).unwrap();
            let one = CylinderVector::constant(f.measure(), 2);
            for i in 0..n {
                let s = f.apply_s_star(i, &one).unwrap();
                let want = CylinderVector::constant(f.measure(), 1).scale(cx((n as f64).sqrt().recip(), 0.0));
                assert!(linalg::max_abs_diff(linalg::column(s.amps()).as_ref(), linalg::column(want.amps()).as_ref()) < TOL);
            }
        }
        let eta = vec![cx(0.6, 0.0), cx(0.0, 0.8)];
        let f = IsometryFamily::weighted_haar(eta.clone()).unwrap();
        for lvl in 0..3 {
            let one = CylinderVector::constant(f.measure(), lvl);
            for i in 0..2 {
                let s = f.apply_s_star(i, &one).unwrap();
                let want = CylinderVector::constant(f.measure(), lvl.saturating_sub(1)).scale(eta[i].conj());
                assert_eq!(s.level(), want.level());
                for (a, b) in s.amps().iter().zip(want.amps()) {
                    assert!((a - b).norm() < TOL);
                }
            }
        }
    }

    #[test]
    fn adjointness_all_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for f in families(2, &mut rng) {
            for m in 0..=4 {
                let u = random_vec(f.measure(), m, &mut rng);
                let v = random_vec(f.measure(), m + 1, &mut rng);
                for i in 0..2 {
                    let lhs = f.apply_s(i, &u).unwrap().inner(&v).unwrap();
                    let rhs = u.inner(&f.apply_s_star(i, &v).unwrap()).unwrap();
                    assert!((lhs - rhs).norm() < TOL, "{} m={m}", f.name());
                }
            }
        }
    }

    #[test]
    fn isometry_matrix_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for f in families(2, &mut rng) {
            for i in 0..2 {
                let s = f.isometry_matrix(i, 2).unwrap();
                let g = s.adjoint() * &s;
                assert!(linalg::max_abs_diff(g.as_ref(), linalg::identity(4).as_ref()) < TOL);
            }
        }
        for f in families(3, &mut rng) {
            let mut sum = linalg::zeros(9, 9);
            for i in 0..3 {
                let s = f.isometry_matrix(i, 1).unwrap();
                sum += &s * s.adjoint();
            }
            assert!(linalg::max_abs_diff(sum.as_ref(), linalg::identity(9).as_ref()) < TOL, "{}", f.name());
        }
    }

    #[test]
    fn isometry_matrix_columns_match_apply() {
        let f = IsometryFamily::haar(2).unwrap();
        for i in 0..2 {
            let s = f.isometry_matrix(i, 0).unwrap();
            let want = f.apply_s(i, &CylinderVector::basis(f.measure(), 0, 0)).unwrap();
            assert_eq!(s.nrows(), 2);
            assert!((s[(i, 0)] - cx(1.0, 0.0)).norm() < TOL);
            assert!((s[(1 - i, 0)]).norm() < TOL);
            for r in 0..2 {
                assert!((s[(r, 0)] - want.amps()[r]).norm() < TOL);
            }
        }
        let nn = IsometryFamily::nearest_neighbor(2).unwrap();
        assert!(matches!(nn.isometry_matrix(0, 0), Err(Error::LevelTooLow { .. })));
    }

    #[test]
    fn adjoint_matrix_realizes_s_star() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for f in families(2, &mut rng) {
            let m = 2;
            let s = f.isometry_matrix(1, m).unwrap();
            let v = random_vec(f.measure(), m + 1, &mut rng);
            let got = linalg::matvec(s.adjoint().to_owned().as_ref(), v.amps());
            let want = f.apply_s_star(1, &v).unwrap().embed(m).unwrap();
            for (a, b) in got.iter().zip(want.amps()) {
                assert!((a - b).norm() < TOL);
            }
        }
    }

    #[test]
    fn gauge_unitary_examples() {
        let id = UnitarySequence::identity(2).unwrap();
        assert!(linalg::max_abs_diff(gauge_unitary(&id, 3).as_ref(), linalg::identity(8).as_ref()) < TOL);
        let d = Mat::from_fn(3, 3, |i, j| if i == j { c64::from_polar(1.0, 0.3 * i as f64 + 0.1) } else { cx(0.0, 0.0) });
        let u = UnitarySequence::explicit(3, vec![d.clone()]).unwrap();
        let g = gauge_unitary(&u, 1);
        assert!(linalg::max_abs_diff(to_character_basis(&g, 3, 1).as_ref(), d.as_ref()) < TOL);
    }

    #[test]
    fn gauge_unitary_product_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 2;
        let us: Vec<Mat<c64>> = (0..3).map(|_| linalg::random_unitary(n, &mut rng)).collect();
        let seq = UnitarySequence::explicit(n, us.clone()).unwrap();
        let g = gauge_unitary(&seq, 3);
        assert!(linalg::unitarity_defect(g.as_ref()) < TOL);
        let h = MeasureSpec::haar(n).unwrap();
        for lam in Word::all(3, n) {
            let e = crate::lattice::character_vector(&lam, 3, &h).unwrap();
            let got = CylinderVector::new(h.clone(), 3, linalg::matvec(g.as_ref(), e.amps())).unwrap().values();
            for x in Word::all(3, n) {
                let mut want = cx(1.0, 0.0);
                for p in 0..3 {
                    let y = lam.digits()[p];
                    let xp = x.digits()[p];
                    let v: c64 = (0..n).map(|z| us[p][(z, y)] * char_value(z, xp, n)).sum();
                    want *= v;
                }
                assert!((got[x.index()] - want).norm() < TOL);
            }
        }
    }

    #[test]
    fn transfer_unitary_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let haar = IsometryFamily::haar(2).unwrap();
        let u = transfer_unitary(&haar, &haar, 2).unwrap();
        assert!(linalg::max_abs_diff(u.as_ref(), linalg::identity(4).as_ref()) < TOL);

        let nn = IsometryFamily::nearest_neighbor(3).unwrap();
        let haar3 = IsometryFamily::haar(3).unwrap();
        for m in 2..=3 {
            let u = transfer_unitary(&haar3, &nn, m).unwrap();
            assert!(linalg::unitarity_defect(u.as_ref()) < TOL);
            for x in Word::all(m, 3) {
                for y in Word::all(m, 3) {
                    let want = if x == y { char_value(x.digits()[0], x.digits()[1], 3) } else { cx(0.0, 0.0) };
                    assert!((u[(x.index(), y.index())] - want).norm() < TOL);
                }
            }
        }
        assert!(transfer_unitary(&haar3, &nn, 1).is_err());

        let us = (0..4).map(|_| linalg::random_unitary(2, &mut rng)).collect();
        let seq = UnitarySequence::explicit(2, us).unwrap();
        let gauge = IsometryFamily::gauge(seq.clone()).unwrap();
        let m = 3;
        let u = transfer_unitary(&haar, &gauge, m).unwrap();
        let gamma = gauge_unitary(&seq, m - 1);
        for i in 0..2 {
            let s = haar.isometry_matrix(i, m - 1).unwrap();
            let lhs = &u * &s;
            let rhs = &s * &gamma;
            assert!(linalg::max_abs_diff(lhs.as_ref(), rhs.as_ref()) < TOL);
            let t = gauge.isometry_matrix(i, m - 1).unwrap();
            assert!(linalg::max_abs_diff(lhs.as_ref(), t.as_ref()) < TOL);
        }
    }

    #[test]
    fn radon_nikodym_examples() {
        let haar = IsometryFamily::haar(2).unwrap();
        let b = radon_nikodym_matrix(&haar, &haar, 2).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                let want = if i == j { linalg::identity(4) } else { linalg::zeros(4, 4) };
                assert!(linalg::max_abs_diff(b[j][i].as_ref(), want.as_ref()) < TOL);
            }
        }
        let nn = IsometryFamily::nearest_neighbor(2).unwrap();
        let b = radon_nikodym_matrix(&haar, &nn, 2).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                for x in Word::all(2, 2) {
                    for y in Word::all(2, 2) {
                        let want = if i == j && x == y { char_value(i, x.digits()[0], 2) } else { cx(0.0, 0.0) };
                        assert!((b[j][i][(x.index(), y.index())] - want).norm() < TOL);
                    }
                }
            }
        }
        for i in 0..2 {
            let mut t = linalg::zeros(8, 4);
            for j in 0..2 {
                t += haar.isometry_matrix(j, 2).unwrap() * &b[j][i];
            }
            let want = nn.isometry_matrix(i, 2).unwrap();
            assert!(linalg::max_abs_diff(t.as_ref(), want.as_ref()) < TOL);
        }
    }

    #[test]
    fn cuntz_defect_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (a, b) = IsometryFamily::haar(2).unwrap().cuntz_defect(3).unwrap();
        assert!(a < TOL && b < TOL);
        let (a, b) = IsometryFamily::nearest_neighbor(3).unwrap().cuntz_defect(2).unwrap();
        assert!(a < TOL && b < TOL);
        let us = (0..3).map(|_| linalg::random_unitary(2, &mut rng)).collect();
        let g = IsometryFamily::gauge(UnitarySequence::explicit(2, us).unwrap()).unwrap();
        let (a, b) = g.cuntz_defect(2).unwrap();
        assert!(a < TOL && b < TOL);
        let (a, b) = IsometryFamily::nearest_neighbor(2).unwrap().cuntz_defect(0).unwrap();
        assert!(a < TOL && b < TOL);
    }

    #[test]
    fn site_vector_sequence_reproduces_sites() {
        let h: Vec<Vec<c64>> = (1..6)
            .map(|k| {
                let t = 1.0 / k as f64;
                vec![cx(t.cos(), 0.0), c64::from_polar(t.sin(), 0.2 * k as f64)]
            })
            .collect();
        let seq = UnitarySequence::from_site_vectors(2, &h).unwrap();
        let mut r = linalg::identity(2);
        for (m, hm) in h.iter().enumerate() {
            r = &r * seq.char_matrix(m).adjoint();
            let xi = linalg::matvec(r.as_ref(), &[cx(1.0, 0.0), cx(0.0, 0.0)]);
            for (a, b) in xi.iter().zip(hm) {
                assert!((a - b).norm() < TOL);
            }
        }
    }

    #[test]
    fn rotation_to_e0_maps_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for d in 2..5 {
            let a = linalg::random_unit_vector(d, &mut rng);
            let u = rotation_to_e0(&a);
            assert!(linalg::unitarity_defect(u.as_ref()) < TOL);
            let img = linalg::matvec(u.as_ref(), &a);
            assert!((img[0] - cx(1.0, 0.0)).norm() < TOL);
            assert!(img[1..].iter().all(|x| x.norm() < TOL));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(IsometryFamily::weighted_haar(vec![cx(1.0, 0.0), cx(0.0, 0.0)]).is_err());
        assert!(IsometryFamily::weighted_haar(vec![cx(0.5, 0.0), cx(0.5, 0.0)]).is_err());
        let bad = Mat::from_fn(2, 2, |i, j| cx((i + j) as f64, 0.0));
        assert!(UnitarySequence::explicit(2, vec![bad]).is_err());
        let f = IsometryFamily::haar(2).unwrap().with_budget(8);
        let v = CylinderVector::constant(f.measure(), 3);
        assert!(matches!(f.apply_s(0, &v), Err(Error::Budget { .. })));
    }
}
