//! Spectral certificates for invariant vector states: joint-eigenvector
//! residuals, the Fourier recursion of the nearest-neighbor composite US,
//! the n^{-m} decay of its matrix elements, and a truncated Wold decomposition.

use crate::cuntz_rep::{operator_matrix, transfer_unitary, IsometryFamily, UnitarySequence, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::lattice::{char_value, fourier_forward, CylinderVector, MeasureSpec, Word, TOL};
use crate::linalg::{self, cx, pow};
use crate::states::{classify_series, theta_harmonic, SeriesRule, SeriesVerdict, SequenceFamily};
use faer::{c64, Mat};

/// Singular values above 1 − cutoff count as a shared direction.
pub const WOLD_CUTOFF: f64 = 1e-9;
/// A residual below this certifies a joint eigenvector.
pub const FOUND_THRESHOLD: f64 = 1e-10;
/// Resolution of the λ grid.
pub const GRID_RESOLUTION: f64 = 0.05;
/// The grid is coarsened until it has at most this many points.
pub const GRID_LIMIT: usize = 20_000;

fn check_budget(n: usize, level: usize, budget: usize) -> Result<()> {
    let d = pow(n, level);
    if d > budget {
        return Err(Error::Budget { dim: d, budget });
    }
    Ok(())
}

/// The level-raising inclusion V_from → V_to as a matrix.
fn embedding_matrix(measure: &MeasureSpec, from: usize, to: usize) -> Result<Mat<c64>> {
    operator_matrix(measure, from, to, |v| v.embed(to))
}

#[derive(Debug, Clone)]
pub struct EigenResidual {
    pub lambda: Vec<c64>,
    pub level: usize,
    /// min over unit ξ of Σ_j ‖T_j^*ξ − λ_j ξ‖².
    pub residual: f64,
    pub minimizer: CylinderVector,
}

/// The operators A_j = E T_j^* on level m, with E re-embedding the image.
#[derive(Debug, Clone)]
pub struct EigenForm {
    level: usize,
    measure: MeasureSpec,
    adj: Vec<Mat<c64>>,
    gram: Mat<c64>,
}

impl EigenForm {
    pub fn new(fam: &IsometryFamily, m: usize) -> Result<Self> {
        fam.check_level(m)?;
        let out = fam.s_star_level(m);
        if out > m {
            return Err(Error::LevelTooLow { got: m, need: out });
        }
        let measure = fam.measure().clone();
        let e = embedding_matrix(&measure, out, m)?;
        let mut adj = Vec::with_capacity(fam.base());
        let d = pow(fam.base(), m);
        let mut gram = linalg::zeros(d, d);
        for j in 0..fam.base() {
            let t = operator_matrix(&measure, m, out, |v| fam.apply_s_star(j, v))?;
            let a = &e * t;
            gram += a.adjoint() * &a;
            adj.push(a);
        }
        Ok(EigenForm { level: m, measure, adj, gram })
    }

    /// Σ_j (A_j − λ_j)ᴴ(A_j − λ_j).
    pub fn matrix(&self, lambda: &[c64]) -> Mat<c64> {
        let mut q = self.gram.clone();
        let d = q.nrows();
        for (a, &l) in self.adj.iter().zip(lambda) {
            for r in 0..d {
                for c in 0..d {
                    q[(r, c)] -= l * a[(c, r)].conj() + l.conj() * a[(r, c)];
                }
            }
        }
        let s: f64 = lambda.iter().map(|l| l.norm_sqr()).sum();
        for i in 0..d {
            q[(i, i)] += cx(s, 0.0);
        }
        q
    }

    pub fn evaluate(&self, lambda: &[c64]) -> EigenResidual {
        let q = self.matrix(lambda);
        let (vals, vecs) = linalg::hermitian_eigen(q.as_ref());
        let mut v: Vec<c64> = (0..vecs.nrows()).map(|i| vecs[(i, 0)]).collect();
        let big = v.iter().cloned().fold(cx(0.0, 0.0), |a, b| if b.norm() > a.norm() { b } else { a });
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|x| *x *= ph);
        }
        let minimizer = CylinderVector::new(self.measure.clone(), self.level, v).expect("eigenvector has level shape");
        EigenResidual { lambda: lambda.to_vec(), level: self.level, residual: vals[0].max(0.0), minimizer }
    }
}

fn check_lambda(fam: &IsometryFamily, lambda: &[c64]) -> Result<()> {
    if lambda.len() != fam.base() {
        return Err(Error::Shape { got: lambda.len(), want: fam.base() });
    }
    let s: f64 = lambda.iter().map(|l| l.norm_sqr()).sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit(s.sqrt()));
    }
    Ok(())
}

/// r_m = smallest eigenvalue of Σ_j (T_j^* − λ_j)ᴴ(T_j^* − λ_j) on level m.
pub fn eigen_residual(fam: &IsometryFamily, lambda: &[c64], m: usize) -> Result<EigenResidual> {
    check_lambda(fam, lambda)?;
    Ok(EigenForm::new(fam, m)?.evaluate(lambda))
}

/// Points of the unit sphere of ℂⁿ modulo a global phase: hyperspherical
/// moduli in [0, π/2] and relative phases in [0, 2π), both at the given step.
pub fn lambda_grid(n: usize, resolution: f64) -> Vec<Vec<c64>> {
    let steps_t = (std::f64::consts::FRAC_PI_2 / resolution).ceil() as usize;
    let steps_p = (2.0 * std::f64::consts::PI / resolution).ceil() as usize;
    let ts: Vec<f64> = (0..=steps_t).map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / steps_t as f64).collect();
    let ps: Vec<f64> = (0..steps_p).map(|k| 2.0 * std::f64::consts::PI * k as f64 / steps_p as f64).collect();
    let mut out = vec![(vec![1.0f64], Vec::<f64>::new())];
    for _ in 1..n {
        let mut next = Vec::with_capacity(out.len() * ts.len() * ps.len());
        for (mods, phases) in &out {
            for &t in &ts {
                let last = *mods.last().unwrap();
                let mut m2 = mods.clone();
                *m2.last_mut().unwrap() = last * t.cos();
                m2.push(last * t.sin());
                // A zero modulus makes the new phase irrelevant.
                let ph: &[f64] = if t == 0.0 { &ps[..1] } else { &ps };
                for &p in ph {
                    let mut p2 = phases.clone();
                    p2.push(p);
                    next.push((m2.clone(), p2));
                }
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(mods, phases)| {
            mods.iter()
                .enumerate()
                .map(|(i, &r)| if i == 0 { cx(r, 0.0) } else { c64::from_polar(r, phases[i - 1]) })
                .collect()
        })
        .collect()
}

/// Grid size without building it.
fn grid_size(n: usize, resolution: f64) -> f64 {
    let steps_t = (std::f64::consts::FRAC_PI_2 / resolution).ceil();
    let steps_p = (2.0 * std::f64::consts::PI / resolution).ceil();
    ((steps_t + 1.0) * steps_p).powi(n as i32 - 1)
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub found: bool,
    pub best: EigenResidual,
    /// Best point of the λ grid.
    pub grid_best: EigenResidual,
    pub grid_resolution: f64,
    pub grid_points: usize,
    pub iterations: usize,
}

/// Alternates λ_j ∝ ⟨ξ, T_j^*ξ⟩ with ξ = argmin of the residual form, from
/// the constant vector and from the point mass at 0, then scans a λ grid.
pub fn invariant_vector_search(fam: &IsometryFamily, m: usize, iterations: usize) -> Result<SearchReport> {
    let form = EigenForm::new(fam, m)?;
    let n = fam.base();
    let uniform = vec![cx((n as f64).sqrt().recip(), 0.0); n];
    let starts = [
        CylinderVector::constant(fam.measure(), m),
        CylinderVector::basis(fam.measure(), m, 0).scale(cx(1.0 / fam.measure().cylinder_weight(&vec![0; m]).sqrt().max(1.0), 0.0)),
    ];
    let mut best: Option<EigenResidual> = None;
    for start in starts {
        let nrm = start.norm();
        let mut xi = start.scale(cx(1.0 / nrm, 0.0));
        for _ in 0..iterations {
            let mut lambda: Vec<c64> = form.adj.iter().map(|a| linalg::inner(xi.amps(), &linalg::matvec(a.as_ref(), xi.amps()))).collect();
            let s = linalg::norm(&lambda);
            if s < 1e-14 {
                lambda = uniform.clone();
            } else {
                lambda.iter_mut().for_each(|l| *l /= s);
            }
            let r = form.evaluate(&lambda);
            xi = r.minimizer.clone();
            let better = best.as_ref().is_none_or(|b| r.residual < b.residual);
            if better {
                best = Some(r);
            }
        }
    }
    let mut resolution = GRID_RESOLUTION;
    while grid_size(n, resolution) > GRID_LIMIT as f64 {
        resolution *= 2.0;
    }
    let grid = lambda_grid(n, resolution);
    let mut grid_best: Option<EigenResidual> = None;
    for l in &grid {
        let r = form.evaluate(l);
        if grid_best.as_ref().is_none_or(|b| r.residual < b.residual) {
            grid_best = Some(r);
        }
    }
    let grid_best = grid_best.expect("grid is nonempty");
    let mut best = best.unwrap_or_else(|| form.evaluate(&uniform));
    if grid_best.residual < best.residual {
        best = grid_best.clone();
    }
    Ok(SearchReport {
        found: best.residual < FOUND_THRESHOLD,
        best,
        grid_best,
        grid_resolution: resolution,
        grid_points: grid.len(),
        iterations,
    })
}

/// ξ ↦ ξ∘σ from level m to m+1 under Haar measure.
pub fn shift_matrix(n: usize, m: usize) -> Mat<c64> {
    let d = pow(n, m);
    let s = (n as f64).sqrt().recip();
    let mut out = linalg::zeros(n * d, d);
    for x0 in 0..n {
        for y in 0..d {
            out[(x0 * d + y, y)] = cx(s, 0.0);
        }
    }
    out
}

/// The isometry US from level m ≥ 1 to m+1, with U = Σ_j T_j S_j^* the
/// transfer unitary from the Haar to the nearest-neighbor family.
pub fn us_matrix(n: usize, m: usize) -> Result<Mat<c64>> {
    if m == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    let haar = IsometryFamily::haar(n)?;
    let nn = IsometryFamily::nearest_neighbor(n)?;
    Ok(transfer_unitary(&haar, &nn, m + 1)? * shift_matrix(n, m))
}

/// US applied to a vector; level 0 inputs are first lifted to level 1.
pub fn us_apply(v: &CylinderVector) -> Result<CylinderVector> {
    if !v.measure().is_haar() {
        return Err(Error::NotHaar);
    }
    let v = if v.level() == 0 { v.embed(1)? } else { v.clone() };
    let m = us_matrix(v.base(), v.level())?;
    CylinderVector::new(v.measure().clone(), v.level() + 1, linalg::matvec(m.as_ref(), v.amps()))
}

fn fourier_power(n: usize, level: usize) -> Mat<c64> {
    let f = linalg::fourier_matrix(n);
    (0..level).fold(linalg::identity(1), |acc, _| linalg::kron(acc.as_ref(), f.as_ref()))
}

#[derive(Debug, Clone)]
pub struct RecursionReport {
    pub n: usize,
    pub level: usize,
    /// (US)² from level m to m+2 in the character bases.
    pub assembled: Mat<c64>,
    pub closed_form: Mat<c64>,
    pub defect: f64,
}

/// The coefficient map ξ̃ ↦ ((US)²ξ)~ predicted by the recursion:
/// j ↦ n^{-1} conj⟨j_0, j_1⟩ ξ̃(j_2 − j_0, j_3, …, j_{m+1}).
pub fn recursion_closed_form(n: usize, m: usize) -> Mat<c64> {
    let rows = pow(n, m + 2);
    let cols = pow(n, m);
    let mut c = linalg::zeros(rows, cols);
    for j in Word::all(m + 2, n) {
        let d = j.digits();
        let mut l = vec![(d[2] + n - d[0]) % n];
        l.extend_from_slice(&d[3..]);
        let li = Word::new(l, n).expect("digits in range").index();
        c[(j.index(), li)] = char_value(d[0], d[1], n).conj() / n as f64;
    }
    c
}

/// Entrywise comparison of the assembled (US)² with the closed form, m ≥ 1.
pub fn fourier_recursion_check(n: usize, m: usize) -> Result<RecursionReport> {
    if m == 0 {
        return Err(Error::LevelTooLow { got: 0, need: 1 });
    }
    check_budget(n, m + 2, DEFAULT_BUDGET)?;
    let t2 = us_matrix(n, m + 1)? * us_matrix(n, m)?;
    let assembled = fourier_power(n, m + 2).adjoint() * t2 * fourier_power(n, m);
    let closed_form = recursion_closed_form(n, m);
    let defect = linalg::max_abs_diff(assembled.as_ref(), closed_form.as_ref());
    Ok(RecursionReport { n, level: m, assembled, closed_form, defect })
}

#[derive(Debug, Clone)]
pub struct DecayRow {
    pub m: usize,
    pub probe: Word,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// max(value − bound) over the table.
    pub max_excess: f64,
}

/// |⟨e_j, (US)^{2m} ξ⟩| against n^{-m}‖ξ‖ for m = 0..=depth.
pub fn matrix_element_decay(xi: &CylinderVector, probes: &[Word], depth: usize) -> Result<DecayTable> {
    let n = xi.base();
    check_budget(n, xi.level().max(1) + 2 * depth, DEFAULT_BUDGET)?;
    let norm = xi.norm();
    let mut v = xi.clone();
    let mut rows = Vec::new();
    let mut excess = f64::NEG_INFINITY;
    for m in 0..=depth {
        let c = fourier_forward(&v)?;
        let bound = (n as f64).powi(-(m as i32)) * norm;
        for p in probes {
            if p.base() != n {
                return Err(Error::Incompatible("probe base differs".into()));
            }
            let value = c.get(p).norm();
            excess = excess.max(value - bound);
            rows.push(DecayRow { m, probe: p.clone(), value, bound });
        }
        if m < depth {
            v = us_apply(&us_apply(&v)?)?;
        }
    }
    Ok(DecayTable { rows, max_excess: excess })
}

type LevelMatrix = dyn Fn(usize) -> Result<Mat<c64>> + Send + Sync;

/// An isometry given by its matrix from each level ℓ ≥ min_level to ℓ + raise.
pub struct WoldInput {
    name: String,
    measure: MeasureSpec,
    raise: usize,
    min_level: usize,
    matrix: Box<LevelMatrix>,
}

impl std::fmt::Debug for WoldInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WoldInput").field("name", &self.name).field("raise", &self.raise).finish()
    }
}

impl WoldInput {
    pub fn new(
        name: impl Into<String>,
        measure: MeasureSpec,
        raise: usize,
        min_level: usize,
        matrix: impl Fn(usize) -> Result<Mat<c64>> + Send + Sync + 'static,
    ) -> Self {
        WoldInput { name: name.into(), measure, raise, min_level, matrix: Box::new(matrix) }
    }

    /// T = US.
    pub fn us_composite(n: usize) -> Result<Self> {
        Ok(Self::new("us", MeasureSpec::haar(n)?, 1, 1, move |m| us_matrix(n, m)))
    }

    /// S: ξ ↦ ξ∘σ, with S1 = 1.
    pub fn haar_shift(n: usize) -> Result<Self> {
        Ok(Self::new("s", MeasureSpec::haar(n)?, 1, 0, move |m| Ok(shift_matrix(n, m))))
    }

    /// u ⊗ I for a unitary u on level `level`, level-preserving from there on.
    pub fn unitary(n: usize, level: usize, u: Mat<c64>) -> Result<Self> {
        let d = pow(n, level);
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::Shape { got: u.nrows() * u.ncols(), want: d * d });
        }
        Ok(Self::new("unitary", MeasureSpec::haar(n)?, 0, level, move |l| {
            if l < level {
                return Err(Error::LevelTooLow { got: l, need: level });
            }
            Ok(linalg::kron(u.as_ref(), linalg::identity(pow(n, l - level)).as_ref()))
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn raise(&self) -> usize {
        self.raise
    }

    pub fn min_level(&self) -> usize {
        self.min_level
    }

    fn matrix(&self, from: usize) -> Result<Mat<c64>> {
        if from < self.min_level {
            return Err(Error::LevelTooLow { got: from, need: self.min_level });
        }
        (self.matrix)(from)
    }

    /// T applied to a vector, lifting it to `min_level` first.
    pub fn apply(&self, v: &CylinderVector) -> Result<CylinderVector> {
        let v = if v.level() < self.min_level { v.embed(self.min_level)? } else { v.clone() };
        let t = self.matrix(v.level())?;
        CylinderVector::new(self.measure.clone(), v.level() + self.raise, linalg::matvec(t.as_ref(), v.amps()))
    }
}

#[derive(Debug, Clone)]
pub struct WoldReport {
    pub level: usize,
    pub depth: usize,
    /// dim(V_L ∩ T^k H) at k = 0..=depth, computed at the deepest level.
    pub unitary_rank: Vec<usize>,
    /// (m, n^m − rank T into level m).
    pub cokernel: Vec<(usize, usize)>,
    /// max_j |⟨e_j, T^{2m} 1⟩| for m = 0, 1, … within the depth.
    pub decay: Vec<f64>,
    /// ‖P_{T^k H} 1‖ at k = 0..=depth.
    pub constant_retention: Vec<f64>,
    pub isometry_defect: f64,
    pub cutoff: f64,
}

/// Truncated Wold decomposition of T on V_L: ranges T^k V_{D−k} are compared
/// with V_L inside the deepest level D = L + depth·raise.
pub fn wold_decompose(input: &WoldInput, depth: usize, level: usize) -> Result<WoldReport> {
    let n = input.measure.base();
    if level < input.min_level {
        return Err(Error::LevelTooLow { got: level, need: input.min_level });
    }
    let r = input.raise;
    let deepest = level + depth * r;
    check_budget(n, deepest, DEFAULT_BUDGET)?;
    // T from level ℓ for ℓ = L, …, D − r (one matrix when level-preserving).
    let mut steps = Vec::new();
    let top = if r == 0 { level } else { deepest - r };
    let mut defect = 0.0f64;
    for l in level..=top {
        let t = input.matrix(l)?;
        let g = t.adjoint() * &t;
        defect = defect.max(linalg::max_abs_diff(g.as_ref(), linalg::identity(t.ncols()).as_ref()));
        steps.push(t);
    }
    if defect > 1e-10 {
        return Err(Error::NotIsometric(defect));
    }
    let step = |l: usize| -> &Mat<c64> { &steps[l - level] };
    let q1 = embedding_matrix(&input.measure, level, deepest)?;
    let one = CylinderVector::constant(&input.measure, deepest);
    let mut unitary_rank = Vec::with_capacity(depth + 1);
    let mut retention = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let from = deepest - k * r;
        let mut p = linalg::identity(pow(n, from));
        for j in 0..k {
            let l = if r == 0 { level } else { from + j * r };
            p = step(l) * p;
        }
        let sv = linalg::singular_values((q1.adjoint() * &p).as_ref());
        unitary_rank.push(sv.iter().filter(|&&s| s > 1.0 - WOLD_CUTOFF).count());
        retention.push(linalg::norm(&linalg::matvec(p.adjoint().to_owned().as_ref(), one.amps())));
    }
    let mut cokernel = Vec::new();
    if r > 0 {
        for m in (input.min_level + r).max(level.saturating_sub(depth))..=level {
            let t = input.matrix(m - r)?;
            let rank = linalg::singular_values(t.as_ref()).iter().filter(|&&s| s > WOLD_CUTOFF).count();
            cokernel.push((m, pow(n, m) - rank));
        }
    } else {
        let rank = linalg::singular_values(step(level).as_ref()).iter().filter(|&&s| s > WOLD_CUTOFF).count();
        cokernel.push((level, pow(n, level) - rank));
    }
    let mut decay = Vec::new();
    let mut v = CylinderVector::constant(&input.measure, level);
    let mut used = 0;
    loop {
        let c = fourier_forward(&v)?;
        decay.push(c.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max));
        if used + 2 > depth {
            break;
        }
        v = input.apply(&input.apply(&v)?)?;
        used += 2;
    }
    Ok(WoldReport {
        level,
        depth,
        unitary_rank,
        cokernel,
        decay,
        constant_retention: retention,
        isometry_defect: defect,
        cutoff: WOLD_CUTOFF,
    })
}

/// Σ_{k<H} ‖h_k − h_{k+1}‖ at each horizon H.
pub fn increment_partial_sums(fam: &SequenceFamily, horizons: &[usize]) -> Vec<f64> {
    let top = horizons.iter().copied().max().unwrap_or(0);
    let mut sums = Vec::with_capacity(top + 1);
    let mut acc = 0.0;
    sums.push(0.0);
    let mut prev = fam.vector(1);
    for k in 1..top {
        let next = fam.vector(k + 1);
        let d: Vec<c64> = prev.iter().zip(&next).map(|(a, b)| a - b).collect();
        acc += linalg::norm(&d);
        sums.push(acc);
        prev = next;
    }
    horizons.iter().map(|&h| sums[h.saturating_sub(1).min(sums.len() - 1)]).collect()
}

/// Σ_{k≤H} θ_k² at each horizon H, term by term.
pub fn angle_square_partial_sums(fam: &SequenceFamily, horizons: &[usize]) -> Result<Vec<f64>> {
    fam.angle(1).ok_or_else(|| Error::Invalid(format!("{} has no angle parameterization", fam.name())))?;
    let top = horizons.iter().copied().max().unwrap_or(0);
    let mut sums = vec![0.0; top + 1];
    for k in 1..=top {
        let t = fam.angle(k).unwrap_or(0.0);
        sums[k] = sums[k - 1] + t * t;
    }
    Ok(horizons.iter().map(|&h| sums[h.min(top)]).collect())
}

/// Σ_{q≤Q} 1/q.
pub fn harmonic_sum(q: usize) -> f64 {
    (1..=q).map(|k| 1.0 / k as f64).sum()
}

/// The first horizon at which Σθ_k² over the harmonic ladder exceeds `target`.
pub fn theta_square_crossing(target: f64, limit: usize) -> Option<usize> {
    let mut acc = 0.0;
    for k in 1..=limit {
        let t = theta_harmonic(k);
        acc += t * t;
        if acc > target {
            return Some(k);
        }
    }
    None
}

/// Σ‖I − U_p‖ over the stored horizon and beyond (identity terms).
pub fn gauge_summability_series(u: &UnitarySequence, horizons: &[usize], rule: &SeriesRule) -> SeriesVerdict {
    let top = horizons.iter().copied().max().unwrap_or(0);
    let id = linalg::identity(u.base());
    let terms: Vec<f64> = (0..top).map(|p| linalg::op_norm((&id - u.char_matrix(p)).as_ref())).collect();
    classify_series(&terms, horizons, rule)
}

/// Σ_p arccos(|⟨a, U_0⋯U_p b⟩|)² for unit vectors a, b.
pub fn divergence_series(u: &UnitarySequence, a: &[c64], b: &[c64], horizons: &[usize], rule: &SeriesRule) -> Result<SeriesVerdict> {
    let n = u.base();
    for v in [a, b] {
        if v.len() != n {
            return Err(Error::Shape { got: v.len(), want: n });
        }
        let s = linalg::norm(v);
        if (s - 1.0).abs() > TOL {
            return Err(Error::NotUnit(s));
        }
    }
    let top = horizons.iter().copied().max().unwrap_or(0);
    let mut p = linalg::identity(n);
    let mut terms = Vec::with_capacity(top);
    for k in 0..top {
        p = p * u.char_matrix(k);
        let c = linalg::inner(a, &linalg::matvec(p.as_ref(), b)).norm().min(1.0);
        let c = if c >= 1.0 - crate::states::OVERLAP_ROUNDING { 1.0 } else { c };
        terms.push(c.acos().powi(2));
    }
    Ok(classify_series(&terms, horizons, rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::character_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_residual_vanishes_at_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let eta = linalg::random_unit_vector(3, &mut rng);
        let fams = [IsometryFamily::haar(2).unwrap(), IsometryFamily::weighted_haar(eta).unwrap()];
        for f in &fams {
            let lambda: Vec<c64> = f.eta().unwrap().iter().map(|e| e.conj()).collect();
            for m in 0..=3 {
                let r = eigen_residual(f, &lambda, m).unwrap();
                assert!(r.residual < 1e-12);
                let one = CylinderVector::constant(f.measure(), m);
                assert!((one.inner(&r.minimizer).unwrap().norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nearest_neighbor_residual_is_positive() {
        let nn = IsometryFamily::nearest_neighbor(2).unwrap();
        let u = vec![cx(0.5f64.sqrt(), 0.0); 2];
        for m in 1..=5 {
            assert!(eigen_residual(&nn, &u, m).unwrap().residual > 1e-6);
        }
        let delta = vec![cx(1.0, 0.0), cx(0.0, 0.0)];
        for m in 1..=4 {
            let r = eigen_residual(&nn, &delta, m).unwrap();
            assert!(r.residual > 1e-6);
            let top = r.minimizer.amps().iter().map(|a| a.norm()).enumerate().fold((0, 0.0), |b, (i, a)| if a > b.1 { (i, a) } else { b });
            assert_eq!(top.0, 0);
        }
    }

    #[test]
    fn search_examples() {
        let haar = IsometryFamily::haar(2).unwrap();
        let r = invariant_vector_search(&haar, 2, 5).unwrap();
        assert!(r.found);
        assert!((r.best.lambda[0] - cx(0.5f64.sqrt(), 0.0)).norm() < 1e-10);
        let nn = IsometryFamily::nearest_neighbor(2).unwrap();
        for m in 1..=3 {
            let r = invariant_vector_search(&nn, m, 10).unwrap();
            assert!(!r.found);
            assert!(r.best.residual > 1e-6);
            assert!(r.grid_best.residual >= r.best.residual);
            assert_eq!(r.grid_resolution, GRID_RESOLUTION);
        }
    }

    #[test]
    fn lambda_grid_is_on_the_sphere() {
        for n in 2..=3 {
            let g = lambda_grid(n, 0.5);
            assert!(!g.is_empty());
            for l in g {
                assert!((linalg::norm(&l) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recursion_examples() {
        for n in 2..=3 {
            for m in 1..=3 {
                let r = fourier_recursion_check(n, m).unwrap();
                assert!(r.defect < 1e-12, "n={n} m={m} defect {}", r.defect);
            }
        }
        let r = fourier_recursion_check(2, 3).unwrap();
        for j in 0..2 {
            let row = Word::new(vec![j, 0, 0, 0, 0], 2).unwrap().index();
            let nz: Vec<f64> = (0..8).map(|c| r.assembled[(row, c)].norm()).filter(|v| *v > 1e-12).collect();
            assert_eq!(nz.len(), 1);
            assert!((nz[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn us_is_isometric() {
        for n in 2..=3 {
            for m in 1..=3 {
                let t = us_matrix(n, m).unwrap();
                assert!(linalg::max_abs_diff((t.adjoint() * &t).as_ref(), linalg::identity(pow(n, m)).as_ref()) < 1e-12);
            }
        }
    }

    #[test]
    fn decay_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let h2 = MeasureSpec::haar(2).unwrap();
        let probes: Vec<Word> = Word::all(3, 2).collect();
        let t = matrix_element_decay(&CylinderVector::constant(&h2, 0), &probes, 3).unwrap();
        assert!(t.max_excess <= 1e-10);
        let xi = CylinderVector::new(h2.clone(), 2, linalg::random_unit_vector(4, &mut rng)).unwrap();
        assert!(matrix_element_decay(&xi, &probes, 3).unwrap().max_excess <= 1e-10);
        let h3 = MeasureSpec::haar(3).unwrap();
        let lam = Word::new(vec![1, 2], 3).unwrap();
        let e = character_vector(&lam, 2, &h3).unwrap();
        let p3: Vec<Word> = Word::all(2, 3).collect();
        assert!(matrix_element_decay(&e, &p3, 2).unwrap().max_excess <= 1e-10);
    }

    #[test]
    fn wold_examples() {
        let us = WoldInput::us_composite(2).unwrap();
        let r = wold_decompose(&us, 5, 5).unwrap();
        let want: Vec<usize> = (0..=5).map(|k| if k < 5 { 1 << (5 - k) } else { 0 }).collect();
        assert_eq!(r.unitary_rank, want);
        for &(m, c) in &r.cokernel {
            assert_eq!(c, pow(2, m - 1));
        }
        for (m, d) in r.decay.iter().enumerate() {
            assert!(*d <= 0.5f64.powi(m as i32) + 1e-10);
        }
        let s = WoldInput::haar_shift(2).unwrap();
        let r = wold_decompose(&s, 5, 3).unwrap();
        assert!(r.unitary_rank.iter().all(|&k| k >= 1));
        assert!(r.constant_retention.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let u = WoldInput::unitary(2, 2, linalg::random_unitary(4, &mut rng)).unwrap();
        let r = wold_decompose(&u, 4, 2).unwrap();
        assert!(r.unitary_rank.iter().all(|&k| k == 4));
        assert_eq!(r.cokernel, vec![(2, 0)]);
    }

    #[test]
    fn theta_series() {
        let th = SequenceFamily::theta_harmonic(2).unwrap();
        let sums = increment_partial_sums(&th, &[10, 1000, 100_000]);
        assert!(sums.iter().all(|&s| s <= 2f64.sqrt() + 1e-9));
        for q in [1usize, 10, 100] {
            let h = q * (q + 1) / 2;
            let s = angle_square_partial_sums(&th, &[h]).unwrap()[0];
            assert!((s - harmonic_sum(q)).abs() < 1e-12);
        }
        let k = theta_square_crossing(5.0, 11_300).unwrap();
        assert!(k <= 11_300);
    }

    #[test]
    fn unitary_sequence_series() {
        let rule = SeriesRule::default();
        let horizons = [100, 1000, 10_000];
        let u = SequenceFamily::theta_harmonic(2).unwrap().unitary_sequence(10_000).unwrap();
        let s = gauge_summability_series(&u, &horizons, &rule);
        assert_eq!(s.verdict, crate::states::Verdict::Converges);
        let e0 = vec![cx(1.0, 0.0), cx(0.0, 0.0)];
        let d = divergence_series(&u, &e0, &e0, &horizons, &rule).unwrap();
        assert_eq!(d.verdict, crate::states::Verdict::Diverges);
        let th = SequenceFamily::theta_harmonic(2).unwrap();
        let direct = angle_square_partial_sums(&th, &horizons).unwrap();
        for (a, b) in d.partial_sums.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }
}
