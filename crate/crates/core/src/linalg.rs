//! Small dense linear algebra for the 4-flux electrical model.
//!
//! Everything here works on fixed-size arrays; the only matrices in the
//! model are the 4×4 state and inductance matrices, a 2×2 Hessian and the
//! 6×6 system that fits the torque quadratic.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

/// Pivots smaller than this are treated as a singular matrix.
pub const PIVOT_TOL: f64 = 1e-12;

const EIG_MAX_ITER: usize = 200;

pub fn identity4() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_vec<const N: usize>(m: &[[f64; N]; N], x: &[f64; N]) -> [f64; N] {
    let mut y = [0.0; N];
    for (yi, row) in y.iter_mut().zip(m) {
        *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    y
}

pub fn mat_mul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut c = [[0.0; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn transpose<const N: usize>(a: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut t = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            t[j][i] = a[i][j];
        }
    }
    t
}

pub fn max_abs<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// LU factorisation with partial pivoting, `P·M = L·U` stored in place.
#[derive(Debug, Clone)]
pub struct Lu<const N: usize> {
    lu: [[f64; N]; N],
    perm: [usize; N],
}

impl<const N: usize> Lu<N> {
    pub fn new(m: &[[f64; N]; N]) -> Result<Self> {
        let mut lu = *m;
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let (p, pivot) = (k..N)
                .map(|r| (r, lu[r][k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if !(pivot > PIVOT_TOL) {
                return Err(Error::SingularMatrix { pivot });
            }
            if p != k {
                lu.swap(p, k);
                perm.swap(p, k);
            }
            for r in k + 1..N {
                let f = lu[r][k] / lu[k][k];
                lu[r][k] = f;
                for c in k + 1..N {
                    lu[r][c] -= f * lu[k][c];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64; N]) -> [f64; N] {
        let mut x = [0.0; N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..N).rev() {
            let mut s = x[i];
            for j in i + 1..N {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
        x
    }

    pub fn inverse(&self) -> [[f64; N]; N] {
        let mut inv = [[0.0; N]; N];
        for j in 0..N {
            let mut e = [0.0; N];
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..N {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}

pub fn solve4(m: &Mat4, b: &Vec4) -> Result<Vec4> {
    Ok(Lu::new(m)?.solve(b))
}

pub fn inverse4(m: &Mat4) -> Result<Mat4> {
    Ok(Lu::new(m)?.inverse())
}

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn to_array(self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEig2 {
    /// Ascending.
    pub values: [f64; 2],
    /// Eigenvectors stored as columns, `vectors[row][col]`.
    pub vectors: [[f64; 2]; 2],
}

/// Closed-form eigendecomposition `S = M·D·Mᵀ`.
///
/// Eigenvalues come out ascending and every eigenvector has its first
/// nonzero component positive, so the factors are reproducible.
pub fn eig2_sym(s: Sym2) -> SymEig2 {
    let Sym2 { a11, a12, a22 } = s;
    let mean = 0.5 * (a11 + a22);
    let half_diff = 0.5 * (a11 - a22);
    let radius = half_diff.hypot(a12);
    let lo = mean - radius;
    let hi = mean + radius;

    // Eigenvector of the smaller eigenvalue, picking the better conditioned
    // of the two row equations.
    let v = if a12 == 0.0 {
        if a11 <= a22 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else {
        let r1 = [a12, lo - a11];
        let r2 = [lo - a22, a12];
        let n1 = r1[0].hypot(r1[1]);
        let n2 = r2[0].hypot(r2[1]);
        if n1 >= n2 {
            [r1[0] / n1, r1[1] / n1]
        } else {
            [r2[0] / n2, r2[1] / n2]
        }
    };
    let v1 = canonical_sign(v);
    let v2 = canonical_sign([-v1[1], v1[0]]);
    SymEig2 {
        values: [lo, hi],
        vectors: [[v1[0], v2[0]], [v1[1], v2[1]]],
    }
}

fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[0] != 0.0 { v[0] } else { v[1] };
    if lead < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Characteristic polynomial `det(λI − M)` by Faddeev–LeVerrier.
///
/// Returns coefficients `[c0, c1, c2, c3, c4]` of `c0 + c1 λ + … + c4 λ⁴`
/// with `c4 = 1`.
pub fn char_poly4(m: &Mat4) -> [f64; 5] {
    let mut c = [0.0; 5];
    c[4] = 1.0;
    let mut mk = [[0.0; 4]; 4];
    for k in 1..=4 {
        let mut next = mat_mul(m, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += c[5 - k];
        }
        mk = next;
        let am = mat_mul(m, &mk);
        let trace: f64 = (0..4).map(|i| am[i][i]).sum();
        c[4 - k] = -trace / k as f64;
    }
    c
}

pub fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn poly_eval_deriv(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a monic quartic via Durand–Kerner, then Newton polishing.
pub fn quartic_roots(coeffs: &[f64; 5]) -> Result<[Complex64; 4]> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    // Fujiwara bound on the root moduli.
    let bound = (1..=4)
        .map(|k| coeffs[4 - k].abs().powf(1.0 / k as f64))
        .fold(0.0f64, f64::max)
        * 2.0;
    let radius = if bound > 0.0 { 0.5 * bound } else { 1.0 };
    let mut z: [Complex64; 4] = std::array::from_fn(|k| {
        Complex64::from_polar(radius, 0.4 + k as f64 * std::f64::consts::FRAC_PI_2)
    });

    for _ in 0..EIG_MAX_ITER {
        let mut delta_max: f64 = 0.0;
        for i in 0..4 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(f64::EPSILON, 0.0);
            }
            let step = poly_eval(coeffs, z[i]) / denom;
            z[i] -= step;
            delta_max = delta_max.max(step.norm() / (1.0 + z[i].norm()));
        }
        if delta_max < 1e-15 {
            break;
        }
    }

    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = poly_eval_deriv(coeffs, *root);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *root - p / dp;
            if poly_eval(coeffs, next).norm() < p.norm() {
                *root = next;
            } else {
                break;
            }
        }
    }

    let residual_ok = z
        .iter()
        .all(|r| poly_eval(coeffs, *r).norm() < 1e-6 * scale);
    if !residual_ok {
        return Err(Error::NoConvergence {
            iterations: EIG_MAX_ITER,
        });
    }
    Ok(z)
}

/// Eigenvalues of a real 4×4 matrix, sorted by (real, imaginary).
pub fn eig4_real(m: &Mat4) -> Result<[Complex64; 4]> {
    let coeffs = char_poly4(m);
    let mut roots = quartic_roots(&coeffs)?;
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(d: Vec4) -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            m[i][i] = d[i];
        }
        m
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng) -> Mat4 {
        // Gram–Schmidt on random columns.
        let mut cols: Vec<Vec4> = Vec::new();
        while cols.len() < 4 {
            let mut v: Vec4 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            for c in &cols {
                let d: f64 = (0..4).map(|i| v[i] * c[i]).sum();
                for i in 0..4 {
                    v[i] -= d * c[i];
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                cols.push(v.map(|x| x / n));
            }
        }
        let mut q = [[0.0; 4]; 4];
        for (j, c) in cols.iter().enumerate() {
            for i in 0..4 {
                q[i][j] = c[i];
            }
        }
        q
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = solve4(&identity4(), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x, [1.0, 2.0, 3.0, 4.0]);
        let x = solve4(&diag([2.0, 4.0, 5.0, 10.0]), &[2.0, 4.0, 5.0, 10.0]).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = identity4();
        m[3][3] = 0.0;
        assert!(matches!(solve4(&m, &[1.0; 4]), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn solve_needs_pivoting() {
        // Zero leading entry: elimination without row swaps divides by zero.
        let m = [
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1e4, 1.0],
            [0.0, 0.0, 1.0, 1e-3],
        ];
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = solve4(&m, &b).unwrap();
        let r = mat_vec(&m, &x);
        for i in 0..4 {
            assert!((r[i] - b[i]).abs() < 1e-9 * (1.0 + max_abs(&b)));
        }
    }

    proptest! {
        #[test]
        fn solve_multiply_back(entries in prop::array::uniform16(-1.0f64..1.0),
                               b in prop::array::uniform4(-10.0f64..10.0)) {
            // Diagonal dominance keeps the system well conditioned.
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = entries[4 * i + j];
                }
                m[i][i] += 5.0;
            }
            let x = solve4(&m, &b).unwrap();
            let r = mat_vec(&m, &x);
            for i in 0..4 {
                prop_assert!((r[i] - b[i]).abs() < 1e-9 * (1.0 + max_abs(&b)));
            }
        }

        #[test]
        fn eig2_reconstructs(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            let e = eig2_sym(Sym2::new(a, b, c));
            prop_assert!(e.values[0] <= e.values[1]);
            let m = e.vectors;
            let d = e.values;
            let s = Sym2::new(a, b, c).to_array();
            for i in 0..2 {
                for j in 0..2 {
                    let rec = m[i][0] * d[0] * m[j][0] + m[i][1] * d[1] * m[j][1];
                    prop_assert!((rec - s[i][j]).abs() < 1e-12 * (1.0 + a.abs().max(b.abs()).max(c.abs())));
                    let gram = m[0][i] * m[0][j] + m[1][i] * m[1][j];
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram - expect).abs() < 1e-12);
                }
                let col = [m[0][i], m[1][i]];
                let lead = if col[0] != 0.0 { col[0] } else { col[1] };
                prop_assert!(lead > 0.0);
            }
        }
    }

    #[test]
    fn eig2_identity_and_swap() {
        let e = eig2_sym(Sym2::new(1.0, 0.0, 1.0));
        assert_eq!(e.values, [1.0, 1.0]);
        let e = eig2_sym(Sym2::new(0.0, 1.0, 0.0));
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig4_diagonal() {
        let ev = eig4_real(&diag([-1.0, -2.0, -3.0, -4.0])).unwrap();
        let expect = [-4.0, -3.0, -2.0, -1.0];
        for (r, e) in ev.iter().zip(expect) {
            assert!((r.re - e).abs() < 1e-9 && r.im.abs() < 1e-9, "{r}");
        }
    }

    #[test]
    fn eig4_rotation_block() {
        let m = [
            [0.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -5.0, 0.0],
            [0.0, 0.0, 0.0, -6.0],
        ];
        let ev = eig4_real(&m).unwrap();
        let expect = [(-6.0, 0.0), (-5.0, 0.0), (0.0, -1.0), (0.0, 1.0)];
        for (re, im) in expect {
            assert!(
                ev.iter().any(|r| (r.re - re).abs() < 1e-9 && (r.im - im).abs() < 1e-9),
                "{re}{im:+}j missing from {ev:?}"
            );
        }
    }

    #[test]
    fn eig4_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d: Vec4 = std::array::from_fn(|i| -1.0 - 2.0 * i as f64 + rng.random_range(-0.5..0.5));
            let q = random_orthogonal(&mut rng);
            let m = mat_mul(&mat_mul(&q, &diag(d)), &transpose(&q));
            let ev = eig4_real(&m).unwrap();
            let mut sorted = d;
            sorted.sort_by(|a, b| a.total_cmp(b));
            for (r, e) in ev.iter().zip(sorted) {
                assert!((r.re - e).abs() < 1e-6 && r.im.abs() < 1e-6, "{r} vs {e}");
            }
        }
    }

    #[test]
    fn char_poly_roots_satisfy_residual() {
        let m = [
            [1.0, 2.0, 0.5, -1.0],
            [0.0, -3.0, 2.0, 1.0],
            [4.0, 1.0, 0.0, 2.0],
            [-1.0, 0.5, 1.0, 1.0],
        ];
        let c = char_poly4(&m);
        let scale = c.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let trace: f64 = (0..4).map(|i| m[i][i]).sum();
        assert!((c[3] + trace).abs() < 1e-12);
        for r in eig4_real(&m).unwrap() {
            assert!(poly_eval(&c, r).norm() < 1e-6 * scale);
        }
    }

    #[test]
    fn lu_inverse_round_trip() {
        let m = [
            [4.0, 1.0, 0.0, 2.0],
            [1.0, 3.0, 1.0, 0.0],
            [0.0, 1.0, 5.0, 1.0],
            [2.0, 0.0, 1.0, 6.0],
        ];
        let inv = inverse4(&m).unwrap();
        let p = mat_mul(&m, &inv);
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - e).abs() < 1e-14);
            }
        }
    }
}
