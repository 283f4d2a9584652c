//! Small dense Hermitian LMI feasibility and the quasi-convex bisection
//! driver built on it.
//!
//! The inner problem is
//!
//! ```text
//! maximize t   subject to   Fⱼ(x) = Fⱼ₀ + Σ xᵢ Fⱼᵢ ⪰ t·I   for every pencil j,
//!                           wᵀx = c                         (normalization)
//! ```
//!
//! Complex Hermitian blocks are realified (`[[Re, −Im], [Im, Re]]`), the
//! normalization is eliminated through an orthonormal basis of `w⊥`, and the
//! result is solved by a log-det barrier method. A box `|xᵢ| ≤ R` keeps the
//! barrier subproblems bounded.

use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector, DVectorViewMut, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::{c64, lambda_min, realify, ComplexMatrix};

/// Margin a witness must clear for the LMIs to count as strictly feasible.
pub const EPS_FEAS: f64 = 1e-8;
/// Target accuracy on the optimal margin.
pub const EPS_SDP: f64 = 1e-7;
/// `tan(89.9°)`.
pub const KAPPA_MAX: f64 = 572.957_213_354_738_1;

/// `x ↦ F₀ + Σ xᵢFᵢ` with Hermitian coefficients.
#[derive(Debug, Clone)]
pub struct LinearMatrixPencil {
    pub constant: ComplexMatrix,
    pub coefficients: Vec<ComplexMatrix>,
}

impl LinearMatrixPencil {
    pub fn new(constant: ComplexMatrix, coefficients: Vec<ComplexMatrix>) -> Self {
        Self { constant, coefficients }
    }

    /// Pencil with zero constant term.
    pub fn homogeneous(coefficients: Vec<ComplexMatrix>) -> Self {
        let d = coefficients[0].nrows();
        Self::new(ComplexMatrix::zeros(d, d), coefficients)
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> ComplexMatrix {
        let mut out = self.constant.clone();
        for (xi, fi) in x.iter().zip(&self.coefficients) {
            out += fi * c64(*xi, 0.0);
        }
        out
    }
}

/// Linear equality `Σ weightsᵢ xᵢ = value`.
#[derive(Debug, Clone)]
pub struct Normalization {
    pub weights: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness: Vec<f64>,
    /// Smallest eigenvalue over all pencils at the witness.
    pub margin: f64,
    /// Upper bound on the optimal margin, where known.
    pub upper_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub eps_feas: f64,
    pub eps_sdp: f64,
    /// Stop as soon as feasibility is decided instead of optimizing fully.
    pub decide_only: bool,
    pub box_radius: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_feas: EPS_FEAS,
            eps_sdp: EPS_SDP,
            decide_only: false,
            box_radius: 1e4,
            max_newton: 400,
        }
    }
}

/// Reduced problem in the variables `y = (z, t)` with `x = x₀ + N z`.
struct Reduced {
    /// Per block: constant and the coefficients of `y` stacked side by side
    /// (`d × d·m`), so the same buffer read as `d² × m` is the flattened set.
    blocks: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    x0: DVector<f64>,
    basis: DMatrix<f64>,
    /// Box bound on every original variable.
    radius: f64,
    /// Barrier degree (sum of block dimensions).
    degree: f64,
}

impl Reduced {
    fn nvars(&self) -> usize {
        self.basis.ncols() + 1
    }

    fn x_of(&self, y: &DVector<f64>) -> DVector<f64> {
        let z = y.rows(0, self.basis.ncols());
        &self.x0 + &self.basis * z
    }

    fn block_value(&self, j: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let (c, stack) = &self.blocks[j];
        let d = c.nrows();
        let mut g = c.clone();
        let flat = DMatrixView::from_slice(stack.as_slice(), d * d, y.len());
        let mut gv = DVectorViewMut::from_slice(g.as_mut_slice(), d * d);
        gv.gemv(1.0, &flat, y, 1.0);
        g
    }

    /// Barrier value without the objective, or `None` outside the domain.
    fn barrier(&self, y: &DVector<f64>) -> Option<f64> {
        let mut acc = 0.0;
        for xi in self.x_of(y).iter() {
            let (lo, hi) = (self.radius + xi, self.radius - xi);
            if lo <= 0.0 || hi <= 0.0 {
                return None;
            }
            acc -= lo.ln() + hi.ln();
        }
        for j in 0..self.blocks.len() {
            let g = self.block_value(j, y);
            let chol = Cholesky::new(g)?;
            acc -= 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        }
        Some(acc)
    }

    fn grad_hess(&self, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let m = self.nvars();
        let mut grad = DVector::zeros(m);
        let mut hess = DMatrix::zeros(m, m);
        for (j, (_, stack)) in self.blocks.iter().enumerate() {
            let l = Cholesky::new(self.block_value(j, y))?.l();
            let d = l.nrows();
            let linv = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
            // whitened coefficients Wᵢ = L⁻¹AᵢL⁻ᵀ: H = Σ vec(Wᵢ)ᵀvec(W_q), g = −tr Wᵢ
            let mut t = &linv * stack;
            for p in 0..m {
                let mut blk = t.columns_mut(p * d, d);
                blk.transpose_mut();
            }
            let w = &linv * &t;
            let flat = DMatrixView::from_slice(w.as_slice(), d * d, m);
            for p in 0..m {
                grad[p] -= (0..d).map(|i| w[(i, p * d + i)]).sum::<f64>();
            }
            hess.gemm_tr(1.0, &flat, &flat, 1.0);
        }
        // box terms −log(R ± xᵢ), with ∂xᵢ/∂z = N[i, :]
        let nz = self.basis.ncols();
        let x = self.x_of(y);
        let gcoef = x.map(|xi| 1.0 / (self.radius - xi) - 1.0 / (self.radius + xi));
        let hroot = x.map(|xi| (1.0 / (self.radius + xi).powi(2) + 1.0 / (self.radius - xi).powi(2)).sqrt());
        let mut scaled = self.basis.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= hroot[i];
        }
        grad.rows_mut(0, nz).gemv_tr(1.0, &self.basis, &gcoef, 1.0);
        hess.view_mut((0, 0), (nz, nz)).gemm_tr(1.0, &scaled, &scaled, 1.0);
        Some((grad, hess))
    }

    /// Smallest eigenvalue of the pencil blocks at `t = 0`.
    fn pencil_margin(&self, y: &DVector<f64>) -> f64 {
        let mut y0 = y.clone();
        let last = y0.len() - 1;
        y0[last] = 0.0;
        (0..self.blocks.len())
            .map(|j| SymmetricEigen::new(self.block_value(j, &y0)).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }
}

fn orthonormal_complement(w: &DVector<f64>) -> DMatrix<f64> {
    let k = w.len();
    let norm = w.norm();
    let mut v = w.clone() / norm;
    // Householder reflector mapping e₀ to w/‖w‖; remaining columns span w⊥
    v[0] -= 1.0;
    let vv = v.dot(&v);
    let h = if vv < 1e-30 {
        DMatrix::identity(k, k)
    } else {
        DMatrix::identity(k, k) - (&v * v.transpose()) * (2.0 / vv)
    };
    h.columns(1, k - 1).into_owned()
}

fn reduce(pencils: &[LinearMatrixPencil], norm: &Normalization, opts: &SolverOptions) -> Result<Reduced> {
    let k = norm.weights.len();
    if k == 0 || pencils.iter().any(|p| p.coefficients.len() != k) {
        return Err(Error::InvalidParameter(
            "pencil/normalization variable count mismatch".into(),
        ));
    }
    let w = DVector::from_column_slice(&norm.weights);
    let wn = w.norm_squared();
    if wn == 0.0 {
        return Err(Error::InvalidParameter("normalization functional is zero".into()));
    }
    let x0 = &w * (norm.value / wn);
    let basis = orthonormal_complement(&w);
    let nz = basis.ncols();
    let radius = opts.box_radius * (1.0 + x0.amax());

    let mut blocks = Vec::new();
    let mut degree = 0.0;
    for p in pencils {
        let fr: Vec<DMatrix<f64>> = p.coefficients.iter().map(realify).collect();
        let mut c = realify(&p.constant);
        for (i, f) in fr.iter().enumerate() {
            c += f * x0[i];
        }
        let d = c.nrows();
        let mut stack = DMatrix::zeros(d, d * (nz + 1));
        for q in 0..nz {
            let mut a = stack.columns_mut(q * d, d);
            for (i, f) in fr.iter().enumerate() {
                if basis[(i, q)] != 0.0 {
                    a += f * basis[(i, q)];
                }
            }
        }
        stack.columns_mut(nz * d, d).fill_with_identity();
        stack.columns_mut(nz * d, d).neg_mut();
        degree += d as f64;
        blocks.push((c, stack));
    }
    degree += (2 * k) as f64;
    Ok(Reduced {
        blocks,
        x0,
        basis,
        radius,
        degree,
    })
}

/// Maximize the common margin `t` of a family of pencils sharing `x`.
pub fn feasibility(
    pencils: &[LinearMatrixPencil],
    normalization: &Normalization,
    opts: &SolverOptions,
) -> Result<FeasibilityResult> {
    let red = reduce(pencils, normalization, opts)?;
    let m = red.nvars();
    let mut y = DVector::zeros(m);
    // start strictly inside: t below every block's smallest eigenvalue
    let start = red.pencil_margin(&y);
    y[m - 1] = start - 1.0 - start.abs();

    let finish = |y: &DVector<f64>, upper: f64| -> FeasibilityResult {
        let x = red.x_of(y);
        let witness: Vec<f64> = x.iter().copied().collect();
        let margin = pencils
            .iter()
            .map(|p| lambda_min(&p.eval(&witness)))
            .fold(f64::INFINITY, f64::min);
        FeasibilityResult {
            feasible: margin >= opts.eps_feas,
            witness,
            margin,
            upper_bound: upper,
        }
    };

    let mut s = 1.0;
    let mut newton_total = 0;
    let degree = red.degree;
    // last centered iterate with its gap; a cap hit after the gap is already
    // below ε_sdp returns it instead of failing
    let mut centered: Option<(DVector<f64>, f64)> = None;
    loop {
        // centering: minimize −s·t + barrier
        let mut inner = 0;
        loop {
            let (mut g, h) = match red.grad_hess(&y) {
                Some(v) => v,
                None => {
                    return Err(Error::SolverStall {
                        gap: f64::NAN,
                        iterations: newton_total,
                    })
                }
            };
            g[m - 1] -= s;
            let step = match Cholesky::new(h.clone()) {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    let reg = h.clone() + DMatrix::identity(m, m) * (1e-12 * h.diagonal().amax().max(1e-300));
                    match Cholesky::new(reg) {
                        Some(ch) => ch.solve(&(-&g)),
                        None => break,
                    }
                }
            };
            let decrement = -g.dot(&step);
            if decrement < 1e-10 {
                break;
            }
            let phi = |y: &DVector<f64>| red.barrier(y).map(|b| b - s * y[m - 1]);
            let f0 = phi(&y).unwrap_or(f64::INFINITY);
            // damped step of a self-concordant barrier stays in the domain
            let mut alpha = if decrement < 0.0625 {
                1.0
            } else {
                1.0 / (1.0 + decrement.sqrt())
            };
            let mut moved = false;
            while alpha > 1e-12 {
                let trial = &y + &step * alpha;
                if let Some(f1) = phi(&trial) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        y = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            inner += 1;
            newton_total += 1;
            if !moved || inner > 60 {
                break;
            }
            if newton_total > opts.max_newton {
                if let Some((yc, gap)) = centered.take().filter(|(_, gap)| *gap <= opts.eps_sdp) {
                    let upper = yc[m - 1] + gap;
                    return Ok(finish(&yc, upper));
                }
                return Err(Error::SolverStall {
                    gap: degree / s,
                    iterations: newton_total,
                });
            }
        }
        let t = y[m - 1];
        let gap = degree / s;
        if std::env::var("LMI_TRACE").is_ok() {
            eprintln!("TRACE outer s={s:e} t={t:e} gap={gap:e} newton={newton_total} m={m}");
        }
        if opts.decide_only {
            if t >= opts.eps_feas {
                let res = finish(&y, t + gap);
                if res.feasible {
                    return Ok(res);
                }
            }
            if t + gap < opts.eps_feas {
                return Ok(finish(&y, t + gap));
            }
        }
        if gap < opts.eps_sdp.min(0.1 * opts.eps_feas) || s > 1e16 {
            return Ok(finish(&y, t + gap));
        }
        centered = Some((y.clone(), gap));
        s *= 8.0;
    }
}

/// Outcome of the bisection on the cone parameter.
#[derive(Debug, Clone)]
pub enum Bisection {
    Feasible {
        kappa: f64,
        witness: FeasibilityResult,
        calls: usize,
    },
    Infeasible {
        calls: usize,
    },
}

/// Least `κ ∈ [0, κ_max]` (within `tol`) at which a monotone LMI family
/// becomes feasible.
pub fn gevp_bisection<F>(mut feasible_at: F, kappa_max: f64, tol: f64) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<FeasibilityResult>,
{
    let mut calls = 1;
    let top = feasible_at(kappa_max)?;
    if !top.feasible {
        return Ok(Bisection::Infeasible { calls });
    }
    calls += 1;
    let bottom = feasible_at(0.0)?;
    if bottom.feasible {
        return Ok(Bisection::Feasible {
            kappa: 0.0,
            witness: bottom,
            calls,
        });
    }
    let (mut lo, mut hi, mut best) = (0.0, kappa_max, top);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        calls += 1;
        let r = feasible_at(mid)?;
        if r.feasible {
            hi = mid;
            best = r;
        } else {
            lo = mid;
        }
    }
    Ok(Bisection::Feasible {
        kappa: hi,
        witness: best,
        calls,
    })
}
