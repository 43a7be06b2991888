//! Small dense helpers on top of faer.

use faer::{c64, Mat, MatRef, Side};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn cx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub fn identity(d: usize) -> Mat<c64> {
    Mat::from_fn(d, d, |i, j| if i == j { cx(1.0, 0.0) } else { cx(0.0, 0.0) })
}

pub fn zeros(r: usize, c: usize) -> Mat<c64> {
    Mat::from_fn(r, c, |_, _| cx(0.0, 0.0))
}

/// Kronecker product with the left factor most significant.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    a.kron(b)
}

pub fn pow(n: usize, m: usize) -> usize {
    n.pow(m as u32)
}

/// Largest singular value.
pub fn op_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let sv = a.singular_values().expect("svd did not converge");
    sv.first().copied().unwrap_or(0.0)
}

/// Upper bound ‖H‖ + ‖K‖_F on the operator norm, H and K the hermitian and
/// skew parts; exact for hermitian input and much cheaper than an SVD.
/// Falls back to the SVD for rectangular input.
pub fn hermitian_norm_bound(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() != a.ncols() {
        return op_norm(a);
    }
    if a.nrows() == 0 {
        return 0.0;
    }
    let h = hermitian_part(a);
    let k = a - &h;
    let ev = h.self_adjoint_eigenvalues(Side::Lower).expect("eigensolver did not converge");
    let top = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    top + k.norm_l2()
}

pub fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.singular_values().expect("svd did not converge")
}

/// Eigenvalues of the hermitian part, ascending.
pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Vec<f64> {
    let h = hermitian_part(a);
    h.self_adjoint_eigenvalues(Side::Lower)
        .expect("eigensolver did not converge")
}

/// Eigenvalues (ascending) and eigenvectors (columns) of the hermitian part.
pub fn hermitian_eigen(a: MatRef<'_, c64>) -> (Vec<f64>, Mat<c64>) {
    let h = hermitian_part(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .expect("eigensolver did not converge");
    let s = evd.S();
    let vals = (0..h.nrows()).map(|i| s[i].re).collect();
    (vals, evd.U().to_owned())
}

pub fn hermitian_part(a: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// ‖UᴴU − I‖ in operator norm.
pub fn unitarity_defect(u: MatRef<'_, c64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    op_norm((g - identity(u.nrows())).as_ref())
}

/// Per-slot discrete Fourier matrix, F[x][y] = exp(2πi xy/n)/√n.
/// Column y is the character e_y in point coordinates.
pub fn fourier_matrix(n: usize) -> Mat<c64> {
    let s = 1.0 / (n as f64).sqrt();
    Mat::from_fn(n, n, |x, y| {
        let t = 2.0 * std::f64::consts::PI * ((x * y) % n) as f64 / n as f64;
        c64::from_polar(s, t)
    })
}

/// Apply an n×n matrix to one tensor slot of a level-m amplitude vector.
pub fn apply_slot(amps: &[c64], n: usize, level: usize, slot: usize, m: MatRef<'_, c64>) -> Vec<c64> {
    assert!(slot < level);
    assert_eq!(amps.len(), pow(n, level));
    let inner = pow(n, level - slot - 1);
    let outer = pow(n, slot);
    let mut out = vec![cx(0.0, 0.0); amps.len()];
    for o in 0..outer {
        for r in 0..inner {
            let base = o * n * inner + r;
            for x in 0..n {
                let mut acc = cx(0.0, 0.0);
                for y in 0..n {
                    acc += m[(x, y)] * amps[base + y * inner];
                }
                out[base + x * inner] = acc;
            }
        }
    }
    out
}

pub fn column(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn matvec(m: MatRef<'_, c64>, v: &[c64]) -> Vec<c64> {
    assert_eq!(m.ncols(), v.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn gaussian(rng: &mut impl Rng) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cx(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix(d: usize, rng: &mut impl Rng) -> Mat<c64> {
    let mut m = zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> Mat<c64> {
    hermitian_part(random_matrix(d, rng).as_ref())
}

pub fn random_unit_vector(d: usize, rng: &mut impl Rng) -> Vec<c64> {
    let v: Vec<c64> = (0..d).map(|_| gaussian(rng)).collect();
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of R's diagonal removed.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> Mat<c64> {
    let g = random_matrix(d, rng);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    Mat::from_fn(d, d, |i, j| {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { cx(1.0, 0.0) };
        q[(i, j)] * ph
    })
}

/// Unitary factor of the polar decomposition.
pub fn polar_unitary(a: MatRef<'_, c64>) -> Mat<c64> {
    let svd = a.svd().expect("svd did not converge");
    svd.U() * svd.V().adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fourier_matrix_is_unitary() {
        for n in 2..6 {
            assert!(unitarity_defect(fourier_matrix(n).as_ref()) < 1e-14);
        }
    }

    #[test]
    fn apply_slot_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 3;
        let u = random_unitary(n, &mut rng);
        let v: Vec<c64> = (0..27).map(|_| gaussian(&mut rng)).collect();
        let full = kron(identity(3).as_ref(), kron(u.as_ref(), identity(3).as_ref()).as_ref());
        let want = matvec(full.as_ref(), &v);
        let got = apply_slot(&v, n, 3, 1, u.as_ref());
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [2, 3, 5] {
            assert!(unitarity_defect(random_unitary(d, &mut rng).as_ref()) < 1e-13);
        }
    }

    #[test]
    fn polar_of_unitary_is_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(3, &mut rng);
        let p = polar_unitary(u.as_ref());
        assert!(max_abs_diff(u.as_ref(), p.as_ref()) < 1e-12);
    }

    #[test]
    fn hermitian_norm_bound_dominates_the_operator_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..6 {
            let h = random_hermitian(d, &mut rng);
            assert!((hermitian_norm_bound(h.as_ref()) - op_norm(h.as_ref())).abs() < 1e-12);
            let a = random_matrix(d, &mut rng);
            assert!(hermitian_norm_bound(a.as_ref()) >= op_norm(a.as_ref()) - 1e-12);
        }
        let r = random_matrix(3, &mut rng);
        let tall = Mat::from_fn(4, 3, |i, j| if i < 3 { r[(i, j)] } else { cx(0.0, 0.0) });
        assert!((hermitian_norm_bound(tall.as_ref()) - op_norm(r.as_ref())).abs() < 1e-12);
    }
}
