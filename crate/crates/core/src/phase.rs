//! Numerical range geometry and matrix phases.
//!
//! The phases of a sectorial matrix `A = T*·diag(e^{jφᵢ})·T` are recovered
//! without ever forming `T`: rotate `A` by the angle `θ*` that maximizes the
//! smallest eigenvalue of `Re(e^{−jθ}A)`, then solve the Hermitian-definite
//! pencil `Im(Ã) x = λ Re(Ã) x`. Congruence maps `Re` and `Im` to
//! `T*·diag(cos)·T` and `T*·diag(sin)·T`, so `λᵢ = tan(φᵢ − θ*)` exactly.
//!
//! Quasi-sectorial matrices have a zero eigenvalue that is normal; its
//! eigenspace is the shared null space of `Re` and `Im` after rotation and is
//! deflated before the pencil is solved.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    c64, eig_hermitian_unchecked, eigenvalues, gevp_hermitian_definite, im_part, lambda_min, re_part, spectral_norm,
    ComplexMatrix,
};

/// Band (relative to `‖A‖`) separating sectorial from boundary cases.
pub const SECTORIAL_MARGIN: f64 = 1e-8;
const KERNEL_CUTOFF: f64 = 1e-8;
const KERNEL_RESIDUAL: f64 = 1e-7;
const GRID_POINTS: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sectoriality {
    Sectorial,
    QuasiSectorial,
    SemiSectorial,
    NonSemiSectorial,
}

impl Sectoriality {
    pub fn is_quasi_sectorial(self) -> bool {
        matches!(self, Self::Sectorial | Self::QuasiSectorial)
    }

    pub fn is_semi_sectorial(self) -> bool {
        !matches!(self, Self::NonSemiSectorial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpectrum {
    pub sectoriality: Sectoriality,
    /// Descending, radians.
    pub phases: Vec<f64>,
    pub center: f64,
    pub field_angle: f64,
    pub phase_index: f64,
    pub rank_deficiency: usize,
}

impl PhaseSpectrum {
    pub fn max_phase(&self) -> f64 {
        self.phases[0]
    }

    pub fn min_phase(&self) -> f64 {
        *self.phases.last().unwrap()
    }
}

/// `λ_min(Re(e^{−jθ}A))`: positive iff `W(A)` lies in the open half plane
/// `Re(e^{−jθ}z) > 0`.
pub fn support_min(a: &ComplexMatrix, theta: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, -theta);
    lambda_min(&re_part(&(a * rot)))
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

/// Result of the separating half plane search.
#[derive(Debug, Clone)]
struct HalfPlane {
    theta: f64,
    value: f64,
}

fn best_half_plane(a: &ComplexMatrix, norm: f64) -> HalfPlane {
    let step = TAU / GRID_POINTS as f64;
    let thetas: Vec<f64> = (0..GRID_POINTS).map(|k| -PI + step * (k as f64 + 1.0)).collect();
    let values: Vec<f64> = thetas.iter().map(|&t| support_min(a, t)).collect();
    let (imax, &gmax) = values.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    let band = 1e-13 * norm;
    // contiguous (circular) run of near-maximal values around the argmax
    let at = |k: isize| values[k.rem_euclid(GRID_POINTS as isize) as usize];
    let mut lo = imax as isize;
    let mut hi = imax as isize;
    while hi - lo < GRID_POINTS as isize - 1 && at(lo - 1) >= gmax - band {
        lo -= 1;
    }
    while hi - lo < GRID_POINTS as isize - 1 && at(hi + 1) >= gmax - band {
        hi += 1;
    }
    let angle = |k: isize| -PI + step * (k as f64 + 1.0);
    if hi > lo {
        // flat top: its midpoint is the separating direction furthest from both edges
        let theta = wrap_angle(0.5 * (angle(lo) + angle(hi)));
        return HalfPlane {
            theta,
            value: support_min(a, theta),
        };
    }
    // golden-section refinement on the bracketing cells
    let g = |t: f64| support_min(a, t);
    let (mut x0, mut x3) = (angle(lo - 1), angle(hi + 1));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = x3 - r * (x3 - x0);
    let mut x2 = x0 + r * (x3 - x0);
    let (mut f1, mut f2) = (g(x1), g(x2));
    while x3 - x0 > 1e-12 {
        if f1 < f2 {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + r * (x3 - x0);
            f2 = g(x2);
        } else {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - r * (x3 - x0);
            f1 = g(x1);
        }
    }
    let mut best = HalfPlane {
        theta: wrap_angle(0.5 * (x0 + x3)),
        value: g(0.5 * (x0 + x3)),
    };
    if gmax > best.value {
        best = HalfPlane {
            theta: thetas[imax],
            value: gmax,
        };
    }
    best
}

#[derive(Debug, Clone)]
enum Analysis {
    Zero,
    Sectorial {
        theta: f64,
        phases: Vec<f64>,
        deficiency: usize,
    },
    /// Zero lies on the boundary of `W(A)` with field angle `π`; `theta` is
    /// the inner normal of the supporting line through the origin.
    Semi {
        theta: f64,
    },
    NonSemi,
}

fn analyze(a: &ComplexMatrix, tol: f64) -> Analysis {
    let norm = spectral_norm(a);
    if norm == 0.0 {
        return Analysis::Zero;
    }
    let hp = best_half_plane(a, norm);
    let margin = tol * norm;
    if hp.value > margin {
        match sectorial_phases(a, hp.theta) {
            Some(phases) => Analysis::Sectorial {
                theta: hp.theta,
                phases,
                deficiency: 0,
            },
            None => Analysis::Semi { theta: hp.theta },
        }
    } else if hp.value < -margin {
        Analysis::NonSemi
    } else {
        deflate_kernel(a, hp.theta, norm, tol)
    }
}

fn sectorial_phases(a: &ComplexMatrix, theta: f64) -> Option<Vec<f64>> {
    let rotated = a * Complex64::from_polar(1.0, -theta);
    let ratios = gevp_hermitian_definite(&im_part(&rotated), &re_part(&rotated), 0.0).ok()?;
    let mut phases: Vec<f64> = ratios.iter().map(|&l| theta + l.atan()).collect();
    phases.sort_by(|x, y| y.total_cmp(x));
    Some(phases)
}

fn deflate_kernel(a: &ComplexMatrix, theta: f64, norm: f64, tol: f64) -> Analysis {
    let n = a.nrows();
    let rotated = a * Complex64::from_polar(1.0, -theta);
    let eig = eig_hermitian_unchecked(&re_part(&rotated));
    let cutoff = KERNEL_CUTOFF.max(tol) * norm * (1.0 + 1e-6);
    let null_dim = eig.eigenvalues.iter().filter(|&&l| l.abs() <= cutoff).count();
    if null_dim == 0 || null_dim == n {
        return Analysis::Semi { theta };
    }
    // eigenvalues ascending and the rest nonnegative: the null block leads
    let null = eig.eigenvectors.columns(0, null_dim).into_owned();
    let range = eig.eigenvectors.columns(null_dim, n - null_dim).into_owned();
    let resid = spectral_norm(&(a * &null)).max(spectral_norm(&(a.adjoint() * &null)));
    if resid > KERNEL_RESIDUAL * norm {
        return Analysis::Semi { theta };
    }
    let reduced = range.adjoint() * a * &range;
    match analyze(&reduced, tol) {
        Analysis::Sectorial {
            theta,
            phases,
            deficiency,
        } => Analysis::Sectorial {
            theta,
            phases,
            deficiency: deficiency + null_dim,
        },
        Analysis::Semi { theta } => Analysis::Semi { theta },
        Analysis::NonSemi | Analysis::Zero => Analysis::Semi { theta },
    }
}

/// Classify `A` by its field angle.
pub fn classify_sectoriality(a: &ComplexMatrix, tol: f64) -> Result<Sectoriality> {
    Ok(match analyze(a, tol) {
        Analysis::Zero => return Err(Error::ZeroMatrix),
        Analysis::Sectorial { deficiency: 0, .. } => Sectoriality::Sectorial,
        Analysis::Sectorial { .. } => Sectoriality::QuasiSectorial,
        Analysis::Semi { .. } => Sectoriality::SemiSectorial,
        Analysis::NonSemi => Sectoriality::NonSemiSectorial,
    })
}

fn spectrum_from(phases: Vec<f64>, deficiency: usize) -> PhaseSpectrum {
    let hi = phases[0];
    let lo = *phases.last().unwrap();
    let center = 0.5 * (hi + lo);
    let shift = wrap_angle(center) - center;
    let phases: Vec<f64> = phases.into_iter().map(|p| p + shift).collect();
    let (hi, lo) = (phases[0], *phases.last().unwrap());
    PhaseSpectrum {
        sectoriality: if deficiency == 0 {
            Sectoriality::Sectorial
        } else {
            Sectoriality::QuasiSectorial
        },
        center: 0.5 * (hi + lo),
        field_angle: hi - lo,
        phase_index: PI.min(hi.abs().max(lo.abs())),
        phases,
        rank_deficiency: deficiency,
    }
}

/// Phases of a quasi-sectorial matrix.
pub fn matrix_phases(a: &ComplexMatrix, tol: f64) -> Result<PhaseSpectrum> {
    match analyze(a, tol) {
        Analysis::Zero => Err(Error::ZeroMatrix),
        Analysis::Sectorial { phases, deficiency, .. } => {
            if phases.is_empty() {
                return Err(Error::DegenerateRotation);
            }
            Ok(spectrum_from(phases, deficiency))
        }
        Analysis::Semi { .. } | Analysis::NonSemi => Err(Error::NotQuasiSectorial),
    }
}

/// Field angle `Θ(A)`: `π` for the semi-sectorial boundary case, `2π` when
/// zero is interior to `W(A)`.
pub fn field_angle(a: &ComplexMatrix, tol: f64) -> Result<f64> {
    match analyze(a, tol) {
        Analysis::Zero => Err(Error::ZeroMatrix),
        Analysis::Sectorial { phases, .. } => Ok(phases[0] - phases[phases.len() - 1]),
        Analysis::Semi { .. } => Ok(PI),
        Analysis::NonSemi => Ok(TAU),
    }
}

/// `sup |∠z|` over `W(A) \ {0}`; zero for the zero matrix.
pub fn phase_index(a: &ComplexMatrix, tol: f64) -> f64 {
    match analyze(a, tol) {
        Analysis::Zero => 0.0,
        Analysis::Sectorial { phases, deficiency, .. } => spectrum_from(phases, deficiency).phase_index,
        Analysis::Semi { theta } => PI.min(0.5 * PI + wrap_angle(theta).abs()),
        Analysis::NonSemi => PI,
    }
}

/// Cone test: `κRe(A) ∓ Im(A) ⪰ 0` up to `tol·‖A‖`.
pub fn phase_bound_lmi_check(a: &ComplexMatrix, kappa: f64, tol: f64) -> bool {
    let slack = -tol * spectral_norm(a);
    let re = re_part(a) * c64(kappa, 0.0);
    let im = im_part(a);
    // Re(A) ⪰ 0 follows from the pair when κ > 0 but must be stated for κ = 0
    lambda_min(&re_part(a)) >= slack && lambda_min(&(&re - &im)) >= slack && lambda_min(&(&re + &im)) >= slack
}

/// Whether every eigenvalue of `AB` has phase within
/// `[φ̲(A)+φ̲(B), φ̄(A)+φ̄(B)]` modulo `2π`.
pub fn eig_phase_bound_holds(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<bool> {
    let pa = matrix_phases(a, tol)?;
    let pb = matrix_phases(b, tol)?;
    let lo = pa.min_phase() + pb.min_phase();
    let hi = pa.max_phase() + pb.max_phase();
    let slack = 1e-7;
    let scale = spectral_norm(a) * spectral_norm(b);
    for lam in eigenvalues(&(a * b))? {
        if lam.norm() <= 1e-10 * scale {
            continue;
        }
        let ang = lam.arg();
        // move ang by a multiple of 2π to the nearest position at or above lo
        let shifted = ang + TAU * ((lo - slack - ang) / TAU).ceil();
        if shifted > hi + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Support points of `W(A)`: for each direction `θ`, the point `x*Ax` where
/// `x` maximizes `Re(e^{−jθ}x*Ax)`.
pub fn numerical_range_boundary(a: &ComplexMatrix, samples: usize) -> Vec<(f64, Complex64)> {
    (0..samples)
        .map(|k| {
            let theta = -PI + TAU * (k as f64 + 1.0) / samples as f64;
            let rot = Complex64::from_polar(1.0, -theta);
            let eig = eig_hermitian_unchecked(&re_part(&(a * rot)));
            let x = eig.eigenvectors.column(a.nrows() - 1).into_owned();
            let z = x.dotc(&(a * &x));
            (theta, z)
        })
        .collect()
}
