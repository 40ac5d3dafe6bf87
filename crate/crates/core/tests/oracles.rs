//! Independent reference computations: plane-wave scattering, finite-section resolvents,
//! dense CMV matrices and Bessel propagation. None of them calls the Weyl-function code.

use num_complex::Complex;
use reflectionless::cmv_core::{cmv_r_spec, cmv_resolvent};
use reflectionless::dynamics::evolve;
use reflectionless::lattice_models::{make_jacobi, presets, truncate, JacobiCoeffs, Sequence, TruncatedCmv, VerblunskyCoeffs};
use reflectionless::reflection_jacobi::{r_spec, ReflTolerances};
use reflectionless::weyl_jacobi::{green, SpectralPoint, WeylPolicy};
use reflectionless::{Model, C64};

mod common;
use common::plane_wave_r;

fn c(x: f64, y: f64) -> C64 {
    Complex::new(x, y)
}

#[test]
fn defect_matches_plane_wave_and_closed_form() {
    let policy = WeylPolicy::default();
    let tol = ReflTolerances::default();
    for cc in [0.5, 1.0, 2.0] {
        let j = presets::defect(cc, 0);
        for lambda in [-1.0, 0.0, 1.0] {
            let oracle = plane_wave_r(|_| 1.0, |n| if n == 0 { cc } else { 0.0 }, 0, lambda);
            let k = (lambda / 2.0f64).acos();
            let closed = cc * cc / (cc * cc + 4.0 * k.sin().powi(2));
            assert!((oracle - closed).abs() < 1e-12, "oracle self-check c={cc} λ={lambda}");
            let r = r_spec(&j, lambda, &policy, &tol).unwrap().r_spec;
            assert!((r - oracle).abs() < 1e-6, "c={cc} λ={lambda}: {r} vs {oracle}");
        }
    }
}

fn compact(a: Vec<f64>, b: Vec<f64>, lo: i64) -> JacobiCoeffs<f64> {
    make_jacobi(Sequence::window(lo, a, 1.0), Sequence::window(lo, b, 0.0), None).unwrap()
}

#[test]
fn compact_perturbations_match_plane_wave() {
    let a = vec![1.2, 0.7, 1.0, 1.5, 0.9];
    let b = vec![0.3, -0.8, 0.0, 0.4, 1.1];
    let j = compact(a.clone(), b.clone(), -2);
    let af = |n: i64| if (-2..=2).contains(&n) { a[(n + 2) as usize] } else { 1.0 };
    let bf = |n: i64| if (-2..=2).contains(&n) { b[(n + 2) as usize] } else { 0.0 };
    for lambda in [-1.7, -0.9, 0.1, 0.8, 1.6] {
        let oracle = plane_wave_r(af, bf, 3, lambda);
        let r = r_spec(&j, lambda, &WeylPolicy::default(), &ReflTolerances::default()).unwrap().r_spec;
        assert!((r - oracle).abs() < 1e-9, "λ={lambda}: {r} vs {oracle}");
    }
}

/// `(J_N - z)^{-1} δ_m` on `[-n, n]` by Gaussian elimination on the tridiagonal.
fn finite_section_column(j: &JacobiCoeffs<f64>, n: i64, z: C64, m: i64) -> Vec<C64> {
    let d = (2 * n + 1) as usize;
    let diag: Vec<C64> = (-n..=n).map(|k| c(j.b(k), 0.0) - z).collect();
    let off: Vec<f64> = (-n..n).map(|k| j.a(k)).collect();
    let mut rhs = vec![c(0.0, 0.0); d];
    rhs[(m + n) as usize] = c(1.0, 0.0);
    // Thomas algorithm (no pivoting needed: Im(diag) bounded away from 0)
    let mut cp = vec![c(0.0, 0.0); d];
    let mut dp = vec![c(0.0, 0.0); d];
    cp[0] = off[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..d {
        let den = diag[i] - cp[i - 1] * off[i - 1];
        if i + 1 < d {
            cp[i] = off[i] / den;
        }
        dp[i] = (rhs[i] - dp[i - 1] * off[i - 1]) / den;
    }
    let mut x = vec![c(0.0, 0.0); d];
    x[d - 1] = dp[d - 1];
    for i in (0..d - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[test]
fn green_matches_finite_section() {
    let models = [
        presets::free::<f64>(),
        presets::defect(1.0, 0),
        presets::period2(0.5),
        presets::anderson(1.5, 11, Some(8)),
        presets::almost_mathieu(0.8, (5f64.sqrt() - 1.0) / 2.0, 0.3),
    ];
    let policy = WeylPolicy::default();
    for (mi, j) in models.iter().enumerate() {
        for z in [c(0.4, 0.6), c(-1.3, 0.3), c(2.5, 0.2)] {
            for m in -2..=2i64 {
                let col = finite_section_column(j, 400, z, m);
                for n in -2..=2i64 {
                    let g = green(j, n, m, SpectralPoint::Upper(z), &policy).unwrap();
                    let want = col[(n + 400) as usize];
                    assert!((g - want).norm() < 1e-9, "model {mi} z={z} ({n},{m}): {g} vs {want}");
                }
            }
        }
    }
}

/// Dense `ℒℳ` on sites `[-n, n-1]` with `α_{-n} = α_n = 1`, built from the 2×2 blocks.
fn dense_cmv(alpha: impl Fn(i64) -> C64, n: i64) -> Vec<Vec<C64>> {
    let d = (2 * n) as usize;
    let idx = |s: i64| (s + n) as usize;
    let alpha_at = |j: i64| if j == -n || j == n { c(1.0, 0.0) } else { alpha(j) };
    let factor = |parity: i64| {
        let mut f = vec![vec![c(0.0, 0.0); d]; d];
        for j in -n..=n {
            if j.rem_euclid(2) != parity {
                continue;
            }
            let a = alpha_at(j);
            let rho = c((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0);
            // Θ(α) on (δ_{j-1}, δ_j)
            let block = [[-a, rho], [rho, a.conj()]];
            for (r, sr) in [(0, j - 1), (1, j)] {
                for (k, sk) in [(0, j - 1), (1, j)] {
                    if (-n..n).contains(&sr) && (-n..n).contains(&sk) {
                        f[idx(sr)][idx(sk)] = block[r][k];
                    }
                }
            }
        }
        f
    };
    let (l, m) = (factor(0), factor(1));
    (0..d)
        .map(|r| (0..d).map(|k| (0..d).map(|i| l[r][i] * m[i][k]).sum()).collect())
        .collect()
}

fn solve_dense(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let d = b.len();
    for k in 0..d {
        let piv = (k..d).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..d {
            let f = a[i][k] / a[k][k];
            if f == c(0.0, 0.0) {
                continue;
            }
            for j in k..d {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
            let v = b[k];
            b[i] -= f * v;
        }
    }
    let mut x = vec![c(0.0, 0.0); d];
    for i in (0..d).rev() {
        let s: C64 = (i + 1..d).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn cmv_models() -> Vec<(VerblunskyCoeffs<f64>, Box<dyn Fn(i64) -> C64>)> {
    let r = presets::cmv_random::<f64>(0.7, 4, Some(5));
    let r2 = r.clone();
    vec![
        (presets::cmv_free(), Box::new(|_| c(0.0, 0.0))),
        (presets::cmv_defect(c(0.5, 0.0), 0), Box::new(|j| if j == 0 { c(0.5, 0.0) } else { c(0.0, 0.0) })),
        (presets::cmv_constant(c(0.2, -0.3)), Box::new(|_| c(0.2, -0.3))),
        (r, Box::new(move |j| r2.alpha(j))),
    ]
}

#[test]
fn dense_cmv_matches_truncation_and_is_unitary() {
    for (m, alpha) in cmv_models() {
        let n = 12;
        let mine = dense_cmv(&alpha, n);
        let lib = TruncatedCmv::new(&m, n as usize).dense();
        let d = mine.len();
        for r in 0..d {
            for k in 0..d {
                assert!((mine[r][k] - lib[r][k]).norm() < 1e-14);
                let uu: C64 = (0..d).map(|i| mine[i][r].conj() * mine[i][k]).sum();
                let id = if r == k { 1.0 } else { 0.0 };
                assert!((uu - id).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn cmv_resolvent_matches_dense() {
    for (mi, (m, alpha)) in cmv_models().into_iter().enumerate() {
        let n = 60;
        let u = dense_cmv(&alpha, n);
        let d = u.len();
        for z in [C64::from_polar(0.5, 0.7), C64::from_polar(0.3, -2.0), C64::from_polar(1.8, 2.5)] {
            for col in -2..=2i64 {
                let mut a = u.clone();
                for (i, row) in a.iter_mut().enumerate() {
                    row[i] -= z;
                }
                let mut e = vec![c(0.0, 0.0); d];
                e[(col + n) as usize] = c(1.0, 0.0);
                let x = solve_dense(a, e);
                for row in -2..=2i64 {
                    let lib = cmv_resolvent(&m, row, col, z, &WeylPolicy::default()).unwrap();
                    let want = x[(row + n) as usize];
                    assert!((lib - want).norm() < 1e-10, "model {mi} z={z} ({row},{col}): {lib} vs {want}");
                }
            }
        }
    }
}

#[test]
fn cmv_defect_reflection_is_alpha_squared() {
    // A single Verblunsky coefficient acts as a beam splitter: R = |α|² at every angle.
    let policy = WeylPolicy::default();
    for a in [0.2, 0.5, 0.8] {
        let m = presets::cmv_defect(c(a, 0.0), 0);
        for th in [-2.5, -1.0, 0.4, 2.0, 3.0] {
            let r = cmv_r_spec(&m, th, &policy, &ReflTolerances::default()).unwrap().r_spec;
            assert!((r - a * a).abs() < 1e-10, "α={a} θ={th}: {r}");
        }
    }
}

/// `J_n(x)` by its power series (adequate for `x <= 10`).
fn bessel_j(n: i64, x: f64) -> f64 {
    let sign = if n < 0 && n % 2 != 0 { -1.0 } else { 1.0 };
    let n = n.unsigned_abs();
    let mut term = (0..n).fold(1.0, |t, k| t * (x / 2.0) / (k + 1) as f64);
    let mut sum = 0.0;
    for k in 0..80u64 {
        sum += term;
        term *= -(x * x / 4.0) / ((k + 1) as f64 * (k + 1 + n) as f64);
    }
    sign * sum
}

#[test]
fn free_propagation_is_bessel() {
    let op = truncate(&Model::from(presets::free::<f64>()), 120).unwrap();
    let lo = op.lo();
    let mut psi = vec![c(0.0, 0.0); op.dim()];
    psi[(-lo) as usize] = c(1.0, 0.0);
    let t = 4.0;
    let out = evolve(&op, &psi, t).unwrap();
    for n in -30..=30i64 {
        let want = c(0.0, -1.0).powi(n as i32) * bessel_j(n, 2.0 * t);
        let got = out[(n - lo) as usize];
        assert!((got - want).norm() < 1e-10, "n={n}: {got} vs {want}");
    }
}
