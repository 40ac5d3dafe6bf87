//! Half-line m-functions, boundary values, Weyl solutions and Green's functions (Jacobi case).

mod boundary;
mod bundle;
mod mfunc;

pub use boundary::{extrapolate, ladder_limit, BoundaryValue, LadderPolicy};
pub use bundle::{
    detect_ac2, green, green_diag_via_m, half_line_boundary, weyl_at, weyl_solutions, Ac2Point,
    BoundaryPath, SpectralPoint, WeylBundle, WeylPolicy,
};
pub use mfunc::{constant_tail_m, m_half_line, m_half_line_boundary, m_pm, DepthPolicy};

/// Boundary value of an arbitrary function of `z` at `λ + i0`.
pub fn boundary_value<T: crate::Real>(
    f: impl Fn(num_complex::Complex<T>) -> crate::Result<num_complex::Complex<T>>,
    lambda: T,
    policy: &LadderPolicy<T>,
) -> crate::Result<BoundaryValue<T>> {
    ladder_limit(|eps| f(num_complex::Complex::new(lambda, eps)), policy)
}
