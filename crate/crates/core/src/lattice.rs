//! Points, characters and the measure on Ω = ∏ Z_n.
//!
//! A level-m vector is a function of the first m coordinates, stored as n^m
//! amplitudes with the square root of the cylinder weight multiplied in.
//! Indexing is big-endian: coordinate 0 is the most significant digit.

use crate::error::{Error, Result};
use crate::linalg::{self, cx, pow};
use faer::c64;
use std::f64::consts::PI;

/// Tolerance for identities that hold exactly in exact arithmetic.
pub const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    digits: Vec<usize>,
    base: usize,
}

impl Word {
    pub fn new(digits: Vec<usize>, base: usize) -> Result<Self> {
        check_base(base)?;
        if let Some(&d) = digits.iter().find(|&&d| d >= base) {
            return Err(Error::Digit { digit: d, base });
        }
        Ok(Word { digits, base })
    }

    pub fn empty(base: usize) -> Self {
        Word { digits: Vec::new(), base }
    }

    /// The word of length `len` whose big-endian value is `index`.
    pub fn from_index(index: usize, len: usize, base: usize) -> Self {
        let mut digits = vec![0; len];
        let mut r = index;
        for p in (0..len).rev() {
            digits[p] = r % base;
            r /= base;
        }
        debug_assert_eq!(r, 0, "index out of range");
        Word { digits, base }
    }

    pub fn index(&self) -> usize {
        self.digits.iter().fold(0, |acc, &d| acc * self.base + d)
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// All words of length `len`, in index order.
    pub fn all(len: usize, base: usize) -> impl Iterator<Item = Word> {
        (0..pow(base, len)).map(move |i| Word::from_index(i, len, base))
    }
}

pub(crate) fn check_base(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Base(n))
    } else {
        Ok(())
    }
}

/// Per-coordinate weights of the product measure.
///
/// Equality compares weights up to `TOL`.
#[derive(Debug, Clone)]
pub struct MeasureSpec {
    weights: Vec<f64>,
}

impl PartialEq for MeasureSpec {
    fn eq(&self, other: &Self) -> bool {
        self.base() == other.base() && self.weights.iter().zip(&other.weights).all(|(a, b)| (a - b).abs() <= TOL)
    }
}

impl MeasureSpec {
    pub fn haar(n: usize) -> Result<Self> {
        check_base(n)?;
        Ok(MeasureSpec { weights: vec![1.0 / n as f64; n] })
    }

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_base(weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Measure("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > TOL {
            return Err(Error::Measure(format!("weights sum to {s}")));
        }
        let m = MeasureSpec { weights };
        if m.is_haar() {
            return MeasureSpec::haar(m.base());
        }
        Ok(m)
    }

    pub fn base(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_haar(&self) -> bool {
        let u = 1.0 / self.base() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= TOL)
    }

    /// μ of the cylinder fixed by `digits`.
    pub fn cylinder_weight(&self, digits: &[usize]) -> f64 {
        digits.iter().map(|&d| self.weights[d]).product()
    }

    /// Absorbed amplitudes of the constant function 1 on one coordinate.
    pub fn slot_constant(&self) -> Vec<c64> {
        self.weights.iter().map(|w| cx(w.sqrt(), 0.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderVector {
    level: usize,
    measure: MeasureSpec,
    amps: Vec<c64>,
}

impl CylinderVector {
    /// Wrap absorbed amplitudes.
    pub fn new(measure: MeasureSpec, level: usize, amps: Vec<c64>) -> Result<Self> {
        let want = pow(measure.base(), level);
        if amps.len() != want {
            return Err(Error::Shape { got: amps.len(), want });
        }
        Ok(CylinderVector { level, measure, amps })
    }

    /// Absorb function values ξ(x) given at the level-m points.
    pub fn from_values(measure: MeasureSpec, level: usize, values: &[c64]) -> Result<Self> {
        let n = measure.base();
        let want = pow(n, level);
        if values.len() != want {
            return Err(Error::Shape { got: values.len(), want });
        }
        let amps = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let w = measure.cylinder_weight(Word::from_index(i, level, n).digits());
                v * w.sqrt()
            })
            .collect();
        Ok(CylinderVector { level, measure, amps })
    }

    /// The constant function 1 at the given level.
    pub fn constant(measure: &MeasureSpec, level: usize) -> Self {
        let n = measure.base();
        let amps = (0..pow(n, level))
            .map(|i| cx(measure.cylinder_weight(Word::from_index(i, level, n).digits()).sqrt(), 0.0))
            .collect();
        CylinderVector { level, measure: measure.clone(), amps }
    }

    /// Point-basis vector e_x (absorbed coordinates), i.e. the normalized
    /// indicator of the cylinder at x.
    pub fn basis(measure: &MeasureSpec, level: usize, index: usize) -> Self {
        let mut amps = vec![cx(0.0, 0.0); pow(measure.base(), level)];
        amps[index] = cx(1.0, 0.0);
        CylinderVector { level, measure: measure.clone(), amps }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn base(&self) -> usize {
        self.measure.base()
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    pub fn amps(&self) -> &[c64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<c64> {
        self.amps
    }

    /// Function values ξ(x) at level-m points; zero where the weight vanishes.
    pub fn values(&self) -> Vec<c64> {
        let n = self.base();
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let w = self.measure.cylinder_weight(Word::from_index(i, self.level, n).digits());
                if w > 0.0 {
                    a / w.sqrt()
                } else {
                    cx(0.0, 0.0)
                }
            })
            .collect()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    /// ⟨self, other⟩, conjugate-linear in self. Levels are aligned by embedding.
    pub fn inner(&self, other: &CylinderVector) -> Result<c64> {
        if self.measure != other.measure {
            return Err(Error::MeasureMismatch);
        }
        let m = self.level.max(other.level);
        let a = self.embed(m)?;
        let b = other.embed(m)?;
        Ok(linalg::inner(&a.amps, &b.amps))
    }

    pub fn scale(&self, s: c64) -> CylinderVector {
        CylinderVector {
            level: self.level,
            measure: self.measure.clone(),
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    /// Re-express at a deeper level; the represented function is unchanged.
    pub fn embed(&self, target: usize) -> Result<CylinderVector> {
        embed(self, target)
    }
}

/// exp(2πi·jx/n).
pub fn char_value(j: usize, x: usize, n: usize) -> c64 {
    let t = 2.0 * PI * ((j % n) * (x % n) % n) as f64 / n as f64;
    c64::from_polar(1.0, t)
}

/// The character e_λ(x) = ∏ ⟨λ_p, x_p⟩ as a level-m vector.
pub fn character_vector(lambda: &Word, level: usize, measure: &MeasureSpec) -> Result<CylinderVector> {
    if !measure.is_haar() {
        return Err(Error::NotHaar);
    }
    let n = measure.base();
    if lambda.base() != n {
        return Err(Error::Incompatible("word base differs from measure base".into()));
    }
    if lambda.len() > level {
        return Err(Error::LevelTooLow { got: level, need: lambda.len() });
    }
    let s = (pow(n, level) as f64).sqrt().recip();
    let amps = (0..pow(n, level))
        .map(|i| {
            let x = Word::from_index(i, level, n);
            let v: c64 = lambda
                .digits()
                .iter()
                .zip(x.digits())
                .map(|(&y, &xp)| char_value(y, xp, n))
                .product();
            v * s
        })
        .collect();
    Ok(CylinderVector { level, measure: measure.clone(), amps })
}

/// Fourier coefficients ξ̃(λ) = ⟨e_λ, ξ⟩ for λ supported in the first m coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    base: usize,
    level: usize,
    coeffs: Vec<c64>,
}

impl FourierCoefficients {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// Coefficients indexed by length-m words in big-endian order.
    pub fn as_slice(&self) -> &[c64] {
        &self.coeffs
    }

    /// ξ̃(λ) for a word of any length; digits beyond the level must vanish
    /// for a nonzero value.
    pub fn get(&self, lambda: &Word) -> c64 {
        let d = lambda.digits();
        if d.len() > self.level && d[self.level..].iter().any(|&x| x != 0) {
            return cx(0.0, 0.0);
        }
        let idx = (0..self.level).fold(0, |acc, p| acc * self.base + d.get(p).copied().unwrap_or(0));
        self.coeffs[idx]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub fn fourier_forward(v: &CylinderVector) -> Result<FourierCoefficients> {
    if !v.measure.is_haar() {
        return Err(Error::NotHaar);
    }
    let n = v.base();
    let fh = linalg::fourier_matrix(n).adjoint().to_owned();
    let mut a = v.amps.clone();
    for slot in 0..v.level {
        a = linalg::apply_slot(&a, n, v.level, slot, fh.as_ref());
    }
    Ok(FourierCoefficients { base: n, level: v.level, coeffs: a })
}

pub fn fourier_inverse(c: &FourierCoefficients) -> CylinderVector {
    let n = c.base;
    let f = linalg::fourier_matrix(n);
    let mut a = c.coeffs.clone();
    for slot in 0..c.level {
        a = linalg::apply_slot(&a, n, c.level, slot, f.as_ref());
    }
    CylinderVector { level: c.level, measure: MeasureSpec::haar(n).expect("base checked"), amps: a }
}

pub fn fourier_from_slice(base: usize, level: usize, coeffs: Vec<c64>) -> Result<FourierCoefficients> {
    let want = pow(base, level);
    if coeffs.len() != want {
        return Err(Error::Shape { got: coeffs.len(), want });
    }
    Ok(FourierCoefficients { base, level, coeffs })
}

pub fn embed(v: &CylinderVector, target: usize) -> Result<CylinderVector> {
    if target < v.level {
        return Err(Error::LevelTooLow { got: target, need: v.level });
    }
    if target == v.level {
        return Ok(v.clone());
    }
    let n = v.base();
    let extra = target - v.level;
    let tail: Vec<f64> = (0..pow(n, extra))
        .map(|z| v.measure.cylinder_weight(Word::from_index(z, extra, n).digits()).sqrt())
        .collect();
    let mut amps = Vec::with_capacity(v.amps.len() * tail.len());
    for a in &v.amps {
        for t in &tail {
            amps.push(a * t);
        }
    }
    Ok(CylinderVector { level: target, measure: v.measure.clone(), amps })
}
