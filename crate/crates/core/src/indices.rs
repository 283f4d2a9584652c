//! Structured gain and phase indices of a single complex matrix.
//!
//! * [`mu_upper`]: D-scaled upper bound on the structured singular value.
//! * [`psi_upper`]: two-stage LMI upper bound on the structured phase index.
//! * [`psi_lower`]: local ascent on `|∠λ(XAX)|`, a certified lower bound.
//! * [`relative_passivity`]: `mu_upper` of the scattering matrix.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{self, Bisection, LinearMatrixPencil, Normalization, SolverOptions, KAPPA_MAX};
use crate::matrix::{
    c64, condition_number, eig_general, eigenvalues, gevp_hermitian_definite, hermitian_function, hermitian_parts,
    identity, inverse, lambda_min, spectral_norm, ComplexMatrix, GeneralEigen,
};
use crate::structure::{BlockDims, StructuredBasis, StructuredSet};

/// Default bisection tolerance (on κ for ψ̄, on γ/‖A‖ for μ̄).
pub const INDEX_TOL: f64 = 1e-7;
/// Default number of ψ̲ restarts.
pub const DEFAULT_RESTARTS: usize = 8;
/// Eigenvalues this close in phase are treated as tied when picking λ⋆.
const PHASE_TIE: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest modulus count as zero.
const ZERO_EIG: f64 = 1e-8;
/// Largest σ_min(I + AB) a lower-bound witness may leave.
const WITNESS_TOL: f64 = 1e-8;
/// Largest condition number of `I + M` accepted by [`scattering`].
const SCATTERING_COND: f64 = 1e12;

fn decide() -> SolverOptions {
    SolverOptions {
        decide_only: true,
        ..SolverOptions::default()
    }
}

fn trace_normalization(basis: &StructuredBasis, n: usize, extra: usize) -> Normalization {
    let mut weights: Vec<f64> = basis.basis.iter().map(|b| b.trace().re).collect();
    weights.extend(std::iter::repeat(0.0).take(extra));
    Normalization {
        weights,
        value: n as f64,
    }
}

fn check_square(a: &ComplexMatrix, chi: &BlockDims) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    chi.check(n)?;
    Ok(n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuUpperResult {
    pub value: f64,
    /// Hermitian positive definite `P = D*D` in 𝐃_χ.
    #[serde(with = "crate::serial::matrix")]
    pub witness_p: ComplexMatrix,
}

/// Least γ with `γ²P − A*PA ⪰ 0` for some `P ≻ 0` in 𝐃_χ.
///
/// The value returned is `‖P^{1/2} A P^{-1/2}‖` at the bisection witness,
/// which never exceeds the bisected γ.
pub fn mu_upper(a: &ComplexMatrix, chi: &BlockDims, tol: f64) -> Result<MuUpperResult> {
    let n = check_square(a, chi)?;
    let scale = spectral_norm(a);
    if scale == 0.0 {
        return Ok(MuUpperResult {
            value: 0.0,
            witness_p: identity(n),
        });
    }
    let an = a / c64(scale, 0.0);
    let basis = chi.hermitian_basis(StructuredSet::DChi);
    let quad: Vec<ComplexMatrix> = basis.basis.iter().map(|d| an.adjoint() * d * &an).collect();
    let norm = trace_normalization(&basis, n, 0);
    let positivity = LinearMatrixPencil::homogeneous(basis.basis.clone());

    let gamma_max = 1.0 + 1e-6;
    let outcome = lmi::gevp_bisection(
        |gamma| {
            let g2 = gamma * gamma;
            let coeffs = basis
                .basis
                .iter()
                .zip(&quad)
                .map(|(d, q)| d * c64(g2, 0.0) - q)
                .collect();
            lmi::feasibility(
                &[positivity.clone(), LinearMatrixPencil::homogeneous(coeffs)],
                &norm,
                &decide(),
            )
        },
        gamma_max,
        tol,
    )?;
    let p = match outcome {
        Bisection::Feasible { witness, .. } => basis.combine(&witness.witness),
        Bisection::Infeasible { .. } => identity(n),
    };
    let value = scaled_norm(&an, &p).min(1.0) * scale;
    Ok(MuUpperResult { value, witness_p: p })
}

/// `‖P^{1/2} A P^{-1/2}‖` for Hermitian positive definite `P`.
pub fn scaled_norm(a: &ComplexMatrix, p: &ComplexMatrix) -> f64 {
    let half = hermitian_function(p, |v| v.max(0.0).sqrt());
    let inv_half = hermitian_function(p, |v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt());
    spectral_norm(&(half * a * inv_half))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiStage {
    /// `ψ̄ = arctan κ` with a Hermitian positive definite scaling.
    PositiveDefiniteD,
    /// `ψ̄ = π/2 + arctan κ` with a complex scaling of positive real part.
    RotatedD,
    /// Neither stage succeeded; `ψ̄ = π`.
    Vacuous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiUpperResult {
    pub value: f64,
    pub stage: PsiStage,
    #[serde(with = "crate::serial::matrix")]
    pub witness_d: ComplexMatrix,
    pub kappa: f64,
}

/// Smallest `κ` with `κP ∓ M ⪰ 0` for a witness found at `kappa`; never above it.
fn tightest_kappa(m: &ComplexMatrix, p: &ComplexMatrix, kappa: f64) -> f64 {
    match gevp_hermitian_definite(m, p, 1e-14) {
        Ok(l) => l.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).min(kappa),
        Err(_) => kappa,
    }
}

/// Rotate a stage-2 scaling `D` towards the centre of its phase interval while
/// `Re(AD) ⪰ 0` still holds. The admissible rotations form an arc because the
/// numerical range of `AD` is convex.
fn recentre(an: &ComplexMatrix, d: ComplexMatrix, kappa: f64) -> (f64, ComplexMatrix) {
    let (h1, h2) = hermitian_parts(&d);
    let Ok(l) = gevp_hermitian_definite(&h2, &h1, 1e-14) else {
        return (kappa, d);
    };
    let (lo, hi) = (l[0].atan(), l[l.len() - 1].atan());
    let mid = 0.5 * (lo + hi);
    let ad = an * &d;
    let admissible = |t: f64| lambda_min(&hermitian_parts(&(&ad * c64(t.cos(), -t.sin()))).0) >= 0.0;
    let mut s = 1.0;
    if !admissible(mid) {
        let (mut ok, mut bad) = (0.0, 1.0);
        for _ in 0..50 {
            let m = 0.5 * (ok + bad);
            if admissible(m * mid) {
                ok = m;
            } else {
                bad = m;
            }
        }
        s = ok;
    }
    let t = s * mid;
    let spread = (hi - t).abs().max((lo - t).abs()).tan();
    if spread >= kappa {
        return (kappa, d);
    }
    (spread, d * c64(t.cos(), -t.sin()))
}

/// Two-stage upper bound on the structured phase index.
pub fn psi_upper(a: &ComplexMatrix, chi: &BlockDims, tol: f64) -> Result<PsiUpperResult> {
    let n = check_square(a, chi)?;
    let scale = spectral_norm(a);
    if scale == 0.0 {
        return Ok(PsiUpperResult {
            value: 0.0,
            stage: PsiStage::PositiveDefiniteD,
            witness_d: identity(n),
            kappa: 0.0,
        });
    }
    let an = a / c64(scale, 0.0);
    let basis = chi.hermitian_basis(StructuredSet::DChi);
    let k = basis.len();
    let j = c64(0.0, 1.0);

    // stage 1: D ≻ 0 Hermitian, κRe(AD) ∓ Im(AD) ⪰ 0
    let parts: Vec<(ComplexMatrix, ComplexMatrix)> = basis.basis.iter().map(|d| hermitian_parts(&(&an * d))).collect();
    let positivity = LinearMatrixPencil::homogeneous(basis.basis.clone());
    let norm1 = trace_normalization(&basis, n, 0);
    let cone = |kappa: f64, sign: f64| {
        LinearMatrixPencil::homogeneous(
            parts
                .iter()
                .map(|(re, im)| re * c64(kappa, 0.0) - im * c64(sign, 0.0))
                .collect(),
        )
    };
    let stage1 = lmi::gevp_bisection(
        |kappa| {
            lmi::feasibility(
                &[positivity.clone(), cone(kappa, 1.0), cone(kappa, -1.0)],
                &norm1,
                &decide(),
            )
        },
        KAPPA_MAX,
        tol,
    )?;
    if let Bisection::Feasible { kappa, witness, .. } = stage1 {
        let d = basis.combine(&witness.witness);
        let (re, im) = hermitian_parts(&(&an * &d));
        let kappa = tightest_kappa(&im, &re, kappa);
        return Ok(PsiUpperResult {
            value: kappa.atan(),
            stage: PsiStage::PositiveDefiniteD,
            witness_d: d,
            kappa,
        });
    }

    // stage 2: D = H₁ + jH₂, H₁ ≻ 0, Re(AD) ⪰ 0, κH₁ ∓ H₂ ⪰ 0
    let zero = ComplexMatrix::zeros(n, n);
    let h1: Vec<ComplexMatrix> = basis
        .basis
        .iter()
        .cloned()
        .chain(std::iter::repeat(zero.clone()).take(k))
        .collect();
    let re_ad: Vec<ComplexMatrix> = basis
        .basis
        .iter()
        .map(|d| hermitian_parts(&(&an * d)).0)
        .chain(basis.basis.iter().map(|d| hermitian_parts(&(&an * d * j)).0))
        .collect();
    let positivity2 = LinearMatrixPencil::homogeneous(h1);
    let real_part = LinearMatrixPencil::homogeneous(re_ad);
    let norm2 = trace_normalization(&basis, n, k);
    let rotated = |kappa: f64, sign: f64| {
        LinearMatrixPencil::homogeneous(
            basis
                .basis
                .iter()
                .map(|d| d * c64(kappa, 0.0))
                .chain(basis.basis.iter().map(|d| d * c64(-sign, 0.0)))
                .collect(),
        )
    };
    let stage2 = lmi::gevp_bisection(
        |kappa| {
            lmi::feasibility(
                &[
                    positivity2.clone(),
                    real_part.clone(),
                    rotated(kappa, 1.0),
                    rotated(kappa, -1.0),
                ],
                &norm2,
                &decide(),
            )
        },
        KAPPA_MAX,
        tol,
    )?;
    if let Bisection::Feasible { kappa, witness, .. } = stage2 {
        let (x1, x2) = witness.witness.split_at(k);
        let kappa = tightest_kappa(&basis.combine(x2), &basis.combine(x1), kappa);
        let (kappa, d) = recentre(&an, basis.combine(x1) + basis.combine(x2) * j, kappa);
        return Ok(PsiUpperResult {
            value: std::f64::consts::FRAC_PI_2 + kappa.atan(),
            stage: PsiStage::RotatedD,
            witness_d: d,
            kappa,
        });
    }

    Ok(PsiUpperResult {
        value: std::f64::consts::PI,
        stage: PsiStage::Vacuous,
        witness_d: identity(n),
        kappa: f64::INFINITY,
    })
}

/// First-order change `dλ = v*·dA·u / v*u` of the `k`-th eigenvalue.
pub fn eig_derivative(eig: &GeneralEigen, k: usize, da: &ComplexMatrix) -> Result<Complex64> {
    if !eig.simple[k] {
        return Err(Error::NonSimpleEigenvalue);
    }
    let u = eig.right(k);
    let v = eig.left(k);
    let vu = v.dotc(&u);
    if vu.norm() < 1e-10 * u.norm() * v.norm() {
        return Err(Error::IllConditionedPair(vu.norm()));
    }
    Ok(v.dotc(&(da * u)) / vu)
}

/// Index of the eigenvalue of largest absolute phase (zero eigenvalues skipped).
pub fn dominant_phase_index(lambdas: &[Complex64]) -> Option<usize> {
    let top = lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let mut best: Option<usize> = None;
    for (i, l) in lambdas.iter().enumerate() {
        if l.norm() <= ZERO_EIG * top || top == 0.0 {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let (pb, pl) = (lambdas[b].arg().abs(), l.arg().abs());
                let better = if (pl - pb).abs() > PHASE_TIE {
                    pl > pb
                } else if (l.norm() - lambdas[b].norm()).abs() > PHASE_TIE * top {
                    l.norm() > lambdas[b].norm()
                } else {
                    (l.re, l.im) > (lambdas[b].re, lambdas[b].im)
                };
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// `f(x) = |∠λ⋆(X(x)·A·X(x))|` together with λ⋆ and, when λ⋆ is simple, ∇f.
#[derive(Debug, Clone)]
pub struct PhaseObjective {
    pub value: f64,
    pub eig: Complex64,
    pub gradient: Option<Vec<f64>>,
}

pub fn phase_objective(a: &ComplexMatrix, basis: &StructuredBasis, x: &[f64]) -> Result<PhaseObjective> {
    let xm = basis.combine(x);
    let m = &xm * a * &xm;
    let eig = eig_general(&m)?;
    let Some(k) = dominant_phase_index(&eig.eigenvalues) else {
        return Ok(PhaseObjective {
            value: 0.0,
            eig: c64(0.0, 0.0),
            gradient: None,
        });
    };
    let lam = eig.eigenvalues[k];
    let angle = lam.arg();
    let sign = if angle < 0.0 { -1.0 } else { 1.0 };
    let ax = a * &xm;
    let xa = &xm * a;
    let gradient = basis
        .basis
        .iter()
        .map(|xi| {
            // product rule on X·A·X
            let da = xi * &ax + &xa * xi;
            eig_derivative(&eig, k, &da).map(|dl| sign * (lam.conj() * dl).im / lam.norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()
        .ok();
    Ok(PhaseObjective {
        value: angle.abs(),
        eig: lam,
        gradient,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiLowerResult {
    pub value: f64,
    /// Coordinates of X in the Hermitian 𝐁_χ basis.
    pub witness_x: Vec<f64>,
    #[serde(with = "crate::serial::complex")]
    pub witness_eig: Complex64,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PsiLowerOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for PsiLowerOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            max_iter: 300,
        }
    }
}

/// Coordinates of `m` in an orthogonal Hermitian basis.
fn coordinates(basis: &StructuredBasis, m: &ComplexMatrix) -> Vec<f64> {
    basis
        .basis
        .iter()
        .map(|b| (b.adjoint() * m).trace().re / b.norm_squared())
        .collect()
}

fn unit(x: &DVector<f64>) -> DVector<f64> {
    let n = x.norm();
    if n > 0.0 {
        x / n
    } else {
        x.clone()
    }
}

struct Ascent<'a> {
    a: &'a ComplexMatrix,
    basis: &'a StructuredBasis,
    rng: ChaCha8Rng,
}

impl Ascent<'_> {
    fn jitter(&mut self, x: &DVector<f64>) -> DVector<f64> {
        let noise = DVector::from_fn(x.len(), |_, _| StandardNormal.sample(&mut self.rng));
        let noise: DVector<f64> = noise;
        unit(&(x + noise * 1e-8))
    }

    /// Objective with gradient, perturbing away from non-simple λ⋆.
    fn eval(&mut self, x: &DVector<f64>) -> Result<(DVector<f64>, PhaseObjective)> {
        let mut x = x.clone();
        for _ in 0..5 {
            let obj = phase_objective(self.a, self.basis, x.as_slice())?;
            if obj.gradient.is_some() || obj.eig == c64(0.0, 0.0) {
                return Ok((x, obj));
            }
            x = self.jitter(&x);
        }
        let obj = phase_objective(self.a, self.basis, x.as_slice())?;
        Ok((x, obj))
    }

    fn run(&mut self, start: DVector<f64>, max_iter: usize) -> Result<(DVector<f64>, PhaseObjective)> {
        let (mut x, mut obj) = self.eval(&unit(&start))?;
        let mut step: f64 = 0.1;
        for _ in 0..max_iter {
            let Some(g) = obj.gradient.clone() else { break };
            let g = DVector::from_vec(g);
            // f is scale invariant, so only the tangential part matters
            let g = &g - &x * x.dot(&g);
            let gn = g.norm();
            if gn < 1e-12 {
                break;
            }
            let mut moved = false;
            let mut trial_step = (step * 2.0).min(1.0);
            while trial_step > 1e-12 {
                let trial = unit(&(&x + &g * (trial_step / gn)));
                let (trial, tobj) = self.eval(&trial)?;
                if tobj.value > obj.value + 1e-4 * trial_step * gn {
                    x = trial;
                    obj = tobj;
                    step = trial_step;
                    moved = true;
                    break;
                }
                trial_step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Ok((x, obj))
    }
}

/// `B = −λ⁻¹X²` must make `I + AB` singular to working accuracy.
fn witness_singular(a: &ComplexMatrix, x: &ComplexMatrix, lam: Complex64) -> bool {
    let n = a.nrows();
    let m = identity(n) - a * (x * x) / lam;
    m.singular_values().min() <= WITNESS_TOL
}

/// Local maximization of `|∠λ(XAX)|` over Hermitian `X ∈ 𝐁_χ`.
pub fn psi_lower(a: &ComplexMatrix, chi: &BlockDims, restarts: usize) -> Result<PsiLowerResult> {
    psi_lower_with(
        a,
        chi,
        &PsiLowerOptions {
            restarts,
            ..PsiLowerOptions::default()
        },
    )
}

pub fn psi_lower_with(a: &ComplexMatrix, chi: &BlockDims, opts: &PsiLowerOptions) -> Result<PsiLowerResult> {
    let n = check_square(a, chi)?;
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("psi_lower needs at least one restart".into()));
    }
    let basis = chi.hermitian_basis(StructuredSet::BChi);
    let x_id = DVector::from_vec(coordinates(&basis, &identity(n)));

    // spectral bound: the X = I value, never beaten downward
    let lambdas = eigenvalues(a)?;
    let mut best = PsiLowerResult {
        value: 0.0,
        witness_x: unit(&x_id).as_slice().to_vec(),
        witness_eig: c64(0.0, 0.0),
        restarts_used: 0,
    };
    if let Some(k) = dominant_phase_index(&lambdas) {
        best.value = lambdas[k].arg().abs();
        best.witness_eig = lambdas[k];
    }
    if spectral_norm(a) == 0.0 {
        return Ok(best);
    }

    let mut ascent = Ascent {
        a,
        basis: &basis,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
    };
    for r in 0..opts.restarts {
        let start = if r == 0 {
            x_id.clone()
        } else {
            DVector::from_fn(basis.len(), |_, _| StandardNormal.sample(&mut ascent.rng))
        };
        let (x, obj) = ascent.run(start, opts.max_iter)?;
        best.restarts_used = r + 1;
        if obj.value > best.value && witness_singular(a, &basis.combine(x.as_slice()), obj.eig) {
            best.value = obj.value;
            best.witness_x = x.as_slice().to_vec();
            best.witness_eig = obj.eig;
        }
    }
    Ok(best)
}

/// Scattering transform `(I − M)(I + M)^{-1}`.
pub fn scattering(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.nrows();
    let plus = identity(n) + m;
    if condition_number(&plus) > SCATTERING_COND {
        return Err(Error::SingularScattering);
    }
    let inv = inverse(&plus).ok_or(Error::SingularScattering)?;
    Ok((identity(n) - m) * inv)
}

/// Relative passivity index: `mu_upper` of the scattering matrix.
pub fn relative_passivity(m: &ComplexMatrix, chi: &BlockDims, tol: f64) -> Result<f64> {
    Ok(mu_upper(&scattering(m)?, chi, tol)?.value)
}
