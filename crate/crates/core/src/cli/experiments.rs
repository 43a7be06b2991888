use super::config::*;
use super::report::{Check, Value};
use crate::cuntz_rep::IsometryFamily;
use crate::endo::{
    cesaro_mean, clustering_curve, relative_commutant_dim, relative_commutant_gram_dim, two_sided_extension_spanning,
    LocalObservable, MatrixObservable,
};
use crate::error::{Error, Result};
use crate::invariants::{
    eigen_residual, fourier_recursion_check, lambda_grid, matrix_element_decay, wold_decompose, EigenForm, WoldInput,
    FOUND_THRESHOLD, GRID_LIMIT, GRID_RESOLUTION,
};
use crate::lattice::{character_vector, CylinderVector, MeasureSpec, Word};
use crate::linalg::{self, cx, pow};
use crate::states::{
    conjugacy_test, density_matrix, density_window, equivalence_test, eval_state_at, finite_mix_conjugacy,
    nearest_neighbor_brute_force, partial_trace_first, partial_trace_last, shift_distance, state_distance, SeriesRule,
    StateKind, StateSpec, SHIFT_PROBES,
};
use crate::c64;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Decay probes compare against n^{-m}‖ξ‖ with this slack.
pub const DECAY_SLACK: f64 = 1e-10;

#[derive(Debug, Default)]
pub(crate) struct CellOutput {
    pub values: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub curve: Vec<(usize, c64)>,
}

impl CellOutput {
    fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.values.insert(key.into(), v.into());
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn point(&mut self, k: usize, z: c64) {
        self.curve.push((k, z));
    }
}

type Job = Box<dyn Fn(&mut ChaCha8Rng) -> Result<CellOutput> + Send + Sync>;

pub(crate) struct Cell {
    pub id: String,
    pub job: Job,
}

fn cell(id: String, job: impl Fn(&mut ChaCha8Rng) -> Result<CellOutput> + Send + Sync + 'static) -> Cell {
    Cell { id, job: Box::new(job) }
}

fn need(n: usize, level: usize, budget: usize) -> Result<()> {
    let d = n.checked_pow(level as u32).unwrap_or(usize::MAX);
    if d > budget {
        return Err(Error::Budget { dim: d, budget });
    }
    Ok(())
}

/// Tolerances after scaling.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub tol: f64,
    pub scale: f64,
    pub budget: usize,
}

pub(crate) fn plan(cfg: &ExperimentConfig, t: Tolerances) -> Vec<Cell> {
    let mut cells = Vec::new();
    let Tolerances { tol, scale, budget } = t;
    match cfg.experiment.clone() {
        Experiment::Relations { bases, levels, families, index } => {
            for n in bases {
                for (fi, f) in families.iter().enumerate() {
                    for &m in &levels {
                        let f = f.clone();
                        cells.push(cell(format!("n{n}/f{fi}-{}/m{m}", f.label()), move |rng| {
                            let fam = f.build(n, rng)?.with_budget(budget);
                            need(n, fam.s_level(m), budget)?;
                            let (iso, comp) = fam.cuntz_defect(m)?;
                            let mut o = CellOutput::default();
                            o.set("family", fam.name());
                            o.set("isometry_defect", iso);
                            o.set("completeness_defect", comp);
                            o.check(Check::at_most("isometry_defect", iso, tol));
                            o.check(Check::at_most("completeness_defect", comp, tol));
                            if index && m >= 2 {
                                let d = relative_commutant_dim(&fam, m)?;
                                let g = relative_commutant_gram_dim(&fam, m)?;
                                o.set("relative_commutant_dim", d);
                                o.set("relative_commutant_gram_dim", g);
                                o.check(Check::equal("relative_commutant_dim", d as f64, (n * n) as f64));
                                o.check(Check::equal("relative_commutant_gram_dim", g as f64, (n * n) as f64));
                            }
                            Ok(o)
                        }));
                    }
                }
            }
        }
        Experiment::StateEval { bases, states, max_word } => {
            for n in bases {
                for (si, s) in states.iter().enumerate() {
                    let s = s.clone();
                    cells.push(cell(format!("n{n}/s{si}-{}/k{max_word}", s.label()), move |_| {
                        need(n, max_word, budget)?;
                        state_eval(&s.build(n)?, max_word, tol)
                    }));
                }
            }
        }
        Experiment::Classify { bases, pairs, horizons } => {
            for n in bases {
                for (pi, p) in pairs.iter().enumerate() {
                    let (p, horizons) = (p.clone(), horizons.clone());
                    cells.push(cell(format!("n{n}/p{pi}-{}-vs-{}", p.left.label(), p.right.label()), move |_| {
                        classify(&p, n, &horizons)
                    }));
                }
            }
        }
        Experiment::Clustering { bases, families, observable, vector, horizon, expect, target_tolerance } => {
            for n in bases {
                for (fi, f) in families.iter().enumerate() {
                    let (f, obs, vec) = (f.clone(), observable.clone(), vector.clone());
                    let target_tol = target_tolerance.map(|t| t * scale);
                    cells.push(cell(format!("n{n}/f{fi}-{}/K{horizon}", f.label()), move |rng| {
                        clustering(&f, n, &obs, &vec, horizon, expect, tol, target_tol, budget, rng)
                    }));
                }
            }
        }
        Experiment::Eigen { bases, families, levels, lambda, grid_samples, expect, search } => {
            for n in bases {
                for (fi, f) in families.iter().enumerate() {
                    for &m in &levels {
                        let (f, lambda) = (f.clone(), lambda.clone());
                        cells.push(cell(format!("n{n}/f{fi}-{}/m{m}", f.label()), move |rng| {
                            need(n, m, budget)?;
                            eigen(&f.build(n, rng)?, m, &lambda, grid_samples, expect, search, tol)
                        }));
                    }
                }
            }
        }
        Experiment::Wold { bases, inputs, level, depth } => {
            for n in bases {
                for &kind in &inputs {
                    cells.push(cell(format!("n{n}/{}/L{level}/d{depth}", kind.label()), move |rng| {
                        wold(kind, n, level, depth, budget, scale, rng)
                    }));
                }
            }
        }
        Experiment::Fourier { bases, levels, decay_depth, probe_length } => {
            for n in bases {
                for &m in &levels {
                    cells.push(cell(format!("n{n}/m{m}"), move |rng| {
                        fourier(n, m, decay_depth, probe_length, tol, scale, budget, rng)
                    }));
                }
            }
        }
        Experiment::Distance { bases, pairs, windows, offset } => {
            for n in bases {
                for (pi, p) in pairs.iter().enumerate() {
                    let (p, windows) = (p.clone(), windows.clone());
                    cells.push(cell(format!("n{n}/p{pi}-{}-vs-{}", p.left.label(), p.right.label()), move |_| {
                        distance(&p, n, &windows, offset, tol, budget)
                    }));
                }
            }
        }
        Experiment::Cesaro { bases, families, terms, samples } => {
            for n in bases {
                for (fi, f) in families.iter().enumerate() {
                    for &big_n in &terms {
                        let f = f.clone();
                        cells.push(cell(format!("n{n}/f{fi}-{}/N{big_n}", f.label()), move |rng| {
                            cesaro(&f.build(n, rng)?, big_n, samples, tol, rng)
                        }));
                    }
                }
            }
        }
        Experiment::Extension { bases, windows, levels } => {
            for n in bases {
                for &w in &windows {
                    for &m in &levels {
                        cells.push(cell(format!("n{n}/W{w}/m{m}"), move |_| {
                            need(n, 2 * w, budget)?;
                            let r = two_sided_extension_spanning(n, w, m)?;
                            let mut o = CellOutput::default();
                            o.set("checked", r.checked);
                            o.set("max_defect", r.max_defect);
                            o.check(Check::at_most("max_defect", r.max_defect, tol));
                            Ok(o)
                        }));
                    }
                }
            }
        }
    }
    cells
}

fn max_abs(m: &faer::Mat<c64>) -> f64 {
    linalg::max_abs(m.as_ref())
}

fn state_eval(spec: &StateSpec, k: usize, tol: f64) -> Result<CellOutput> {
    let n = spec.base();
    let anchor = spec.anchor();
    let mut o = CellOutput::default();
    let mut defect = 0.0f64;
    let mut count = 0;
    let mut psd = f64::INFINITY;
    let mut trace = 0.0f64;
    let mut partial = 0.0f64;
    let mut prev: Option<MatrixObservable> = None;
    let nn = matches!(spec.kind(), StateKind::NearestNeighbor);
    for len in 1..=k {
        let rho = density_matrix(spec, len)?;
        for i in Word::all(len, n) {
            for j in Word::all(len, n) {
                let v = eval_state_at(spec, anchor, &i, &j)?;
                let oracle = if nn { nearest_neighbor_brute_force(n, &i, &j)? } else { rho.matrix()[(j.index(), i.index())] };
                defect = defect.max((v - oracle).norm());
                o.point(count, v);
                count += 1;
            }
        }
        psd = psd.min(linalg::hermitian_eigenvalues(linalg::hermitian_part(rho.matrix().as_ref()).as_ref())[0]);
        trace = trace.max((linalg::trace(rho.matrix().as_ref()) - cx(1.0, 0.0)).norm());
        if let Some(p) = &prev {
            partial = partial.max(max_abs(&(partial_trace_last(&rho)?.matrix() - p.matrix())));
            let right = density_window(spec, anchor + 1, len - 1)?;
            partial = partial.max(max_abs(&(partial_trace_first(&rho)?.matrix() - right.matrix())));
        }
        if len == 1 {
            o.set("diagonal_k1", (0..n).map(|x| rho.matrix()[(x, x)].re).collect::<Vec<f64>>());
        }
        prev = Some(rho);
    }
    o.set("state", spec.name());
    o.set("pairs", count);
    o.set("max_defect", defect);
    o.set("min_eigenvalue", psd);
    o.set("trace_defect", trace);
    o.set("partial_trace_defect", partial);
    o.check(Check::at_most("max_defect", defect, tol));
    o.check(Check::at_least("min_eigenvalue", psd, -tol));
    o.check(Check::at_most("trace_defect", trace, tol));
    o.check(Check::at_most("partial_trace_defect", partial, tol));
    Ok(o)
}

fn classify(p: &PairConfig, n: usize, horizons: &[usize]) -> Result<CellOutput> {
    let (a, b) = (p.left.build(n)?, p.right.build(n)?);
    let rule = SeriesRule::default();
    let mut o = CellOutput::default();
    let mixes = matches!(a.kind(), StateKind::FiniteMix { .. }) && matches!(b.kind(), StateKind::FiniteMix { .. });
    if mixes {
        let m = finite_mix_conjugacy(&a, &b)?;
        o.set("conjugate", m.conjugate);
        if let Some(perm) = m.permutation {
            o.set("permutation", perm);
        }
        let verdict = if m.conjugate { "converges" } else { "diverges" };
        o.set("conjugacy", verdict);
        o.set("heuristic", false);
        expectations(&mut o, p, verdict, None, false);
        return Ok(o);
    }
    let eq = equivalence_test(&a, &b, horizons, &rule)?;
    for (name, v) in &eq.forms {
        o.set(&format!("form_{name}"), v.verdict.as_str());
    }
    o.set("forms_agree", eq.agree);
    o.set("equivalence", eq.verdict.as_str());
    o.set("products", eq.products.clone());
    o.check(Check::holds("forms_agree", eq.agree));
    let c = conjugacy_test(&a, &b, horizons, &rule)?;
    o.set("conjugacy", c.verdict.as_str());
    o.set("heuristic", c.heuristic);
    o.set("aligned_rule", c.aligned.rule.clone());
    o.set("aligned_partial_sums", c.aligned.partial_sums.clone());
    if let Some(e) = c.exact {
        o.set("exact", e.as_str());
    }
    let g = &c.g;
    let entries = (0..g.nrows()).flat_map(|r| (0..g.ncols()).map(move |k| [g[(r, k)].re, g[(r, k)].im]));
    o.values.insert("g".into(), Value::Complex(entries.collect()));
    for (h, s) in c.aligned.horizons.iter().zip(&c.aligned.partial_sums) {
        o.point(*h, cx(*s, 0.0));
    }
    expectations(&mut o, p, c.verdict.as_str(), Some(eq.verdict.as_str()), c.heuristic);
    Ok(o)
}

fn expectations(o: &mut CellOutput, p: &PairConfig, conj: &str, equiv: Option<&str>, heuristic: bool) {
    if let Some(e) = &p.expect {
        o.check(Check::holds(format!("conjugacy == {e}"), conj == e));
    }
    if let (Some(e), Some(v)) = (&p.expect_equivalence, equiv) {
        o.check(Check::holds(format!("equivalence == {e}"), v == e));
    }
    if let Some(h) = p.expect_heuristic {
        o.check(Check::holds(format!("heuristic == {h}"), heuristic == h));
    }
}

fn build_observable(cfg: &ObservableConfig, measure: &MeasureSpec, rng: &mut ChaCha8Rng) -> Result<LocalObservable> {
    let n = measure.base();
    match cfg {
        ObservableConfig::VacuumProjector => LocalObservable::compact_projector(&CylinderVector::constant(measure, 0)),
        ObservableConfig::MatrixUnit { i, j } => Ok(LocalObservable::cylinder(&MatrixObservable::matrix_unit(
            &Word::new(i.clone(), n)?,
            &Word::new(j.clone(), n)?,
        )?)),
        ObservableConfig::CharacterProjector { character } => {
            let w = Word::new(character.clone(), n)?;
            let v = character_vector(&w, w.len(), measure)?;
            let a = v.amps();
            let d = a.len();
            Ok(LocalObservable::cylinder(&MatrixObservable::new(
                n,
                w.len(),
                faer::Mat::from_fn(d, d, |r, c| a[r] * a[c].conj()),
            )?))
        }
        ObservableConfig::RandomHermitian { level } => Ok(LocalObservable::cylinder(&MatrixObservable::new(
            n,
            *level,
            linalg::random_hermitian(pow(n, *level), rng),
        )?)),
    }
}

fn build_vector(cfg: &VectorConfig, measure: &MeasureSpec, rng: &mut ChaCha8Rng) -> Result<CylinderVector> {
    let n = measure.base();
    match cfg {
        VectorConfig::Constant { level } => Ok(CylinderVector::constant(measure, *level)),
        VectorConfig::Basis { level, index } => {
            if *index >= pow(n, *level) {
                return Err(Error::Invalid(format!("basis index {index} out of range at level {level}")));
            }
            Ok(CylinderVector::basis(measure, *level, *index))
        }
        VectorConfig::Random { level } => {
            CylinderVector::new(measure.clone(), *level, linalg::random_unit_vector(pow(n, *level), rng))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn clustering(
    f: &FamilyConfig,
    n: usize,
    obs: &ObservableConfig,
    vec: &VectorConfig,
    horizon: usize,
    expect: ClusterExpect,
    tol: f64,
    target_tol: Option<f64>,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CellOutput> {
    let fam = f.build(n, rng)?.with_budget(budget);
    let a = build_observable(obs, fam.measure(), rng)?;
    let xi = build_vector(vec, fam.measure(), rng)?;
    need(n, a.support_end().max(xi.level()), budget)?;
    let c = clustering_curve(&fam, &a, &xi, horizon)?;
    let mut o = CellOutput::default();
    for (k, z) in c.iter().enumerate() {
        o.point(k, *z);
    }
    let last = c[horizon];
    o.set("family", fam.name());
    o.set("c_0", c[0]);
    o.set("c_K", last);
    let norm2 = xi.norm().powi(2);
    match expect {
        ClusterExpect::None => {}
        ClusterExpect::Constant => {
            let w0 = a.expectation(&CylinderVector::constant(fam.measure(), 0))? * norm2;
            let dev = c.iter().skip(xi.level()).map(|z| (z - w0).norm()).fold(0.0, f64::max);
            o.set("target", w0);
            o.set("max_deviation", dev);
            o.check(Check::at_most("max_deviation", dev, tol));
        }
        ClusterExpect::ProductOracle => {
            let (FamilyConfig::Gauge { generator, horizon: h }, ObservableConfig::VacuumProjector, VectorConfig::Constant { level: 0 }) =
                (f, obs, vec)
            else {
                return Err(Error::Invalid("the product oracle needs a gauge family, the vacuum projector and the constant vector".into()));
            };
            let seq = generator.build(n)?;
            let mut e0 = vec![cx(0.0, 0.0); n];
            e0[0] = cx(1.0, 0.0);
            let site = |s: usize| if s == 0 { e0.clone() } else { seq.vector(s.min(*h)) };
            let oracle: f64 = (0..=*h).map(|s| linalg::inner(&site(s), &site(s + horizon)).norm_sqr()).product();
            o.set("oracle", oracle);
            o.set("oracle_gap", oracle - last.re);
            o.check(Check::at_most("c_K - oracle", last.re - oracle, tol));
            o.check(Check::above("c_0 - c_K", c[0].re - last.re, 0.0));
        }
        ClusterExpect::Limit => {
            let FamilyConfig::Gauge { generator, .. } = f else {
                return Err(Error::Invalid("the limit target needs a gauge family".into()));
            };
            let h = generator
                .build(n)?
                .limit()
                .ok_or_else(|| Error::Invalid(format!("{} declares no limit", generator.name)))?;
            if a.has_tail() {
                return Err(Error::Invalid("the limit target needs a cylinder observable".into()));
            }
            let level = a.support_end();
            let fh = linalg::matvec(linalg::fourier_matrix(n).as_ref(), &h);
            let prod = (0..level).fold(vec![cx(1.0, 0.0)], |acc, _| {
                acc.iter().flat_map(|x| fh.iter().map(move |y| x * y)).collect()
            });
            let dense = a.to_dense(level)?;
            let target = linalg::inner(&prod, &linalg::matvec(dense.matrix().as_ref(), &prod)) * norm2;
            let dev = (last - target).norm();
            o.set("target", target);
            o.set("deviation", dev);
            o.check(Check::at_most("deviation", dev, target_tol.unwrap_or(tol)));
        }
    }
    Ok(o)
}

fn grid_points(n: usize, samples: usize) -> Vec<Vec<c64>> {
    if samples == 0 {
        return Vec::new();
    }
    let mut res = GRID_RESOLUTION;
    let mut grid = lambda_grid(n, res);
    while grid.len() > GRID_LIMIT {
        res *= 2.0;
        grid = lambda_grid(n, res);
    }
    let stride = (grid.len() / samples).max(1);
    grid.into_iter().step_by(stride).take(samples).collect()
}

fn eigen(
    fam: &IsometryFamily,
    m: usize,
    lambda: &LambdaConfig,
    grid_samples: usize,
    expect: Option<EigenExpect>,
    search: bool,
    tol: f64,
) -> Result<CellOutput> {
    let n = fam.base();
    let l = lambda.build(fam)?;
    let r = eigen_residual(fam, &l, m)?;
    let one = CylinderVector::constant(fam.measure(), m);
    let overlap = one.inner(&r.minimizer)?.norm();
    let mut o = CellOutput::default();
    o.set("family", fam.name());
    o.set("residual", r.residual);
    o.set("constant_overlap", overlap);
    o.point(m, cx(r.residual, 0.0));
    let mut grid_min = f64::INFINITY;
    if grid_samples > 0 {
        let form = EigenForm::new(fam, m)?;
        for p in grid_points(n, grid_samples) {
            grid_min = grid_min.min(form.evaluate(&p).residual);
        }
        o.set("grid_samples", grid_samples);
        o.set("grid_min_residual", grid_min);
    }
    match expect {
        Some(EigenExpect::Zero) => {
            o.check(Check::at_most("residual", r.residual, tol));
            o.check(Check::at_most("1 - |<1, minimizer>|", 1.0 - overlap, tol));
        }
        Some(EigenExpect::Positive) => {
            o.check(Check::above("residual", r.residual, tol));
            if grid_samples > 0 {
                o.check(Check::above("grid_min_residual", grid_min, tol));
            }
        }
        None => {}
    }
    if search {
        let s = crate::invariants::invariant_vector_search(fam, m, 10)?;
        o.set("search_found", s.found);
        o.set("search_residual", s.best.residual);
        o.set("search_grid_resolution", s.grid_resolution);
        o.set("search_grid_points", s.grid_points);
        if let Some(e) = expect {
            o.check(Check::holds("search agrees", s.found == (e == EigenExpect::Zero)));
        }
        o.set("found_threshold", FOUND_THRESHOLD);
    }
    Ok(o)
}

fn wold(kind: WoldKind, n: usize, level: usize, depth: usize, budget: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<CellOutput> {
    let input = match kind {
        WoldKind::Us => WoldInput::us_composite(n)?,
        WoldKind::S => WoldInput::haar_shift(n)?,
        WoldKind::Unitary => {
            need(n, level, budget)?;
            WoldInput::unitary(n, level, linalg::random_unitary(pow(n, level), rng))?
        }
    };
    need(n, level + depth * input.raise(), budget)?;
    let r = wold_decompose(&input, depth, level)?;
    let mut o = CellOutput::default();
    for (k, &rank) in r.unitary_rank.iter().enumerate() {
        o.point(k, cx(rank as f64, 0.0));
    }
    o.set("unitary_rank", r.unitary_rank.clone());
    o.set("cokernel_levels", r.cokernel.iter().map(|c| c.0).collect::<Vec<usize>>());
    o.set("cokernel", r.cokernel.iter().map(|c| c.1).collect::<Vec<usize>>());
    o.set("decay", r.decay.clone());
    o.set("constant_retention", r.constant_retention.clone());
    o.set("isometry_defect", r.isometry_defect);
    o.set("cutoff", r.cutoff);
    let monotone = r.unitary_rank.windows(2).all(|w| w[1] <= w[0]);
    o.check(Check::holds("rank nonincreasing", monotone));
    match kind {
        WoldKind::Us => {
            if depth >= level {
                o.check(Check::equal("final rank", r.unitary_rank[depth] as f64, 0.0));
            }
            let ok = r.cokernel.iter().all(|&(m, c)| c == pow(n, m - 1) * (n - 1));
            o.check(Check::holds("cokernel = n^{m-1}(n-1)", ok));
            let excess = r
                .decay
                .iter()
                .enumerate()
                .map(|(m, d)| d - (n as f64).powi(-(m as i32)))
                .fold(f64::NEG_INFINITY, f64::max);
            o.check(Check::at_most("decay excess", excess, DECAY_SLACK * scale));
        }
        WoldKind::S => {
            let min = r.unitary_rank.iter().copied().min().unwrap_or(0);
            o.check(Check::at_least("min rank", min as f64, 1.0));
        }
        WoldKind::Unitary => {
            let full = r.unitary_rank.iter().all(|&k| k == pow(n, level));
            o.check(Check::holds("full rank", full));
        }
    }
    Ok(o)
}

#[allow(clippy::too_many_arguments)]
fn fourier(n: usize, m: usize, depth: usize, probe_length: usize, tol: f64, scale: f64, budget: usize, rng: &mut ChaCha8Rng) -> Result<CellOutput> {
    let mut o = CellOutput::default();
    if m >= 1 {
        need(n, m + 2, budget)?;
        let r = fourier_recursion_check(n, m)?;
        o.set("recursion_defect", r.defect);
        o.check(Check::at_most("recursion_defect", r.defect, tol));
    }
    if depth > 0 {
        need(n, m.max(1) + 2 * depth, budget)?;
        let h = MeasureSpec::haar(n)?;
        let probes: Vec<Word> = Word::all(probe_length, n).collect();
        let xi = CylinderVector::new(h.clone(), m, linalg::random_unit_vector(pow(n, m), rng))?;
        let mut excess = f64::NEG_INFINITY;
        let mut k = 0;
        for v in [CylinderVector::constant(&h, m), xi] {
            let t = matrix_element_decay(&v, &probes, depth)?;
            excess = excess.max(t.max_excess);
            for row in &t.rows {
                o.point(k, cx(row.value, row.bound));
                k += 1;
            }
        }
        o.set("decay_max_excess", excess);
        o.check(Check::at_most("decay_max_excess", excess, DECAY_SLACK * scale));
    }
    Ok(o)
}

fn distance(p: &PairConfig, n: usize, windows: &[usize], offset: usize, tol: f64, budget: usize) -> Result<CellOutput> {
    let (a, b) = (p.left.build(n)?, p.right.build(n)?);
    let mut o = CellOutput::default();
    let mut d = Vec::with_capacity(windows.len());
    for &k in windows {
        need(n, k, budget)?;
        let v = state_distance(&a, &b, k, offset)?;
        o.point(k, cx(v, 0.0));
        d.push(v);
    }
    let k1 = windows.iter().copied().min().unwrap_or(1);
    let shifts: Vec<f64> = (0..SHIFT_PROBES).map(|m| shift_distance(&a, k1, m)).collect::<Result<_>>()?;
    o.set("distances", d.clone());
    o.set("left_shift_distances", shifts);
    let mut sorted: Vec<(usize, f64)> = windows.iter().copied().zip(d.iter().copied()).collect();
    sorted.sort_by_key(|x| x.0);
    let drop = sorted.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max);
    let top = d.iter().copied().fold(0.0, f64::max);
    o.check(Check::at_most("largest decrease", drop, tol));
    o.check(Check::at_most("max distance", top, 2.0 + tol));
    Ok(o)
}

fn cesaro(fam: &IsometryFamily, big_n: usize, samples: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<CellOutput> {
    let n = fam.base();
    let mut o = CellOutput::default();
    let mut ratio = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    let mut dense_gap = 0.0f64;
    for s in 0..samples {
        let a = MatrixObservable::new(n, 1, linalg::random_hermitian(n, rng))?;
        let r = cesaro_mean(fam, &a, big_n)?;
        ratio = ratio.max(r.defect / r.bound);
        excess = excess.max(r.defect - r.bound);
        if let Some(dd) = r.dense_defect {
            dense_gap = dense_gap.max((dd - r.defect).abs());
        }
        o.point(s, cx(r.defect, r.bound));
    }
    o.set("family", fam.name());
    o.set("max_ratio", ratio);
    o.set("dense_gap", dense_gap);
    o.check(Check::at_most("defect - 2|A|/N", excess, tol));
    o.check(Check::at_most("dense_gap", dense_gap, 1e-10_f64.max(tol)));
    Ok(o)
}
