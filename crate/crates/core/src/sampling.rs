//! Seeded random matrix generators used by the property suites and the
//! lower-bound restarts.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{c64, diag, re_part, ComplexMatrix};

/// `(x + jy)/√2` with `x, y` standard normal.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| standard_complex(rng))
}

/// Random Hermitian positive semidefinite matrix of the given rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> ComplexMatrix {
    let f = ComplexMatrix::from_fn(n, rank, |_, _| standard_complex(rng));
    re_part(&(&f * f.adjoint()))
}

/// `T*·diag(e^{jφᵢ})·T` with random `T`; phases drawn from `[lo, hi]`.
pub fn random_sectorial<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> (ComplexMatrix, Vec<f64>) {
    let phases: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let t = random_complex(rng, n) + ComplexMatrix::identity(n, n) * c64(0.5, 0.0);
    let d = diag(
        &phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect::<Vec<_>>(),
    );
    (t.adjoint() * d * t, phases)
}
