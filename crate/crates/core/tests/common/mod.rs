//! Reference computations shared by the integration tests.

use reflectionless::C64;

/// Reflection probability of a perturbation of the free matrix supported in `[-l, l]`:
/// the solution equal to `e^{ikn}` on the far right is run leftwards and split into
/// `A e^{ikn} + B e^{-ikn}`; `R = |B/A|²`.
pub fn plane_wave_r(a: impl Fn(i64) -> f64, b: impl Fn(i64) -> f64, l: i64, lambda: f64) -> f64 {
    let k = (lambda / 2.0).acos();
    let wave = |n: i64, s: f64| C64::from_polar(1.0, s * k * n as f64);
    let top = l + 3;
    let (mut hi, mut lo) = (wave(top + 1, 1.0), wave(top, 1.0));
    let mut n = top;
    while n > -top {
        let next = ((lambda - b(n)) * lo - a(n) * hi) / a(n - 1);
        hi = lo;
        lo = next;
        n -= 1;
    }
    // lo = u_n, hi = u_{n+1}
    let (p, q) = (wave(n, 1.0), wave(n, -1.0));
    let (p1, q1) = (wave(n + 1, 1.0), wave(n + 1, -1.0));
    let det = p * q1 - q * p1;
    let amp_a = (lo * q1 - q * hi) / det;
    let amp_b = (p * hi - lo * p1) / det;
    (amp_b / amp_a).norm_sqr()
}
