//! Frequency-sweep robust stability certification.
//!
//! At each grid frequency three sufficient conditions are tested:
//!
//! * phase: `φ(Δ) + ψ̄(G) < π − margin_φ`
//! * gain: `‖Δ‖·μ̄(G) < 1 − margin_g`
//! * passivity: `R(G)·‖S_Δ‖ < 1 − margin_g`
//!
//! The loop is reported stable when every grid point passes at least one
//! enabled condition. A finite grid only samples `[0, ∞]`, so reports carry
//! the qualifier [`GRID_QUALIFIER`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indices::{self, MuUpperResult, PsiLowerOptions, PsiStage, PsiUpperResult, INDEX_TOL};
use crate::lti::{freq_response, StateSpace};
use crate::matrix::{c64, gevp_hermitian_definite, hermitian_parts, inverse, lambda_min, spectral_norm, ComplexMatrix};
use crate::phase::{matrix_phases, phase_index};
use crate::structure::BlockDims;

pub use crate::indices::scattering;

pub const MARGIN_PHASE: f64 = 0.01;
pub const MARGIN_GAIN: f64 = 0.005;
pub const GRID_QUALIFIER: &str = "grid-certified";
/// Environment variable capping the sweep's worker threads.
pub const THREADS_ENV: &str = "PHASECERT_THREADS";
/// Most negative FDI margin tolerated before the audit reports a failure.
const FDI_SLACK: f64 = 1e-8;
const PHASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Margins {
    pub phase: f64,
    pub gain: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self {
            phase: MARGIN_PHASE,
            gain: MARGIN_GAIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Phase,
    Gain,
    Passivity,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phase" => Ok(Criterion::Phase),
            "gain" => Ok(Criterion::Gain),
            "passivity" => Ok(Criterion::Passivity),
            other => Err(Error::Config(format!("unknown criterion \"{other}\""))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Phase => "phase",
            Criterion::Gain => "gain",
            Criterion::Passivity => "passivity",
        })
    }
}

/// Set of enabled criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Criterion>", try_from = "Vec<Criterion>")]
pub struct Criteria {
    pub phase: bool,
    pub gain: bool,
    pub passivity: bool,
}

impl Criteria {
    pub const ALL: Criteria = Criteria {
        phase: true,
        gain: true,
        passivity: true,
    };

    pub fn of(list: &[Criterion]) -> Self {
        let mut c = Criteria {
            phase: false,
            gain: false,
            passivity: false,
        };
        for k in list {
            match k {
                Criterion::Phase => c.phase = true,
                Criterion::Gain => c.gain = true,
                Criterion::Passivity => c.passivity = true,
            }
        }
        c
    }

    pub fn list(&self) -> Vec<Criterion> {
        let mut v = Vec::new();
        if self.phase {
            v.push(Criterion::Phase);
        }
        if self.gain {
            v.push(Criterion::Gain);
        }
        if self.passivity {
            v.push(Criterion::Passivity);
        }
        v
    }

    pub fn is_empty(&self) -> bool {
        !(self.phase || self.gain || self.passivity)
    }
}

impl From<Criteria> for Vec<Criterion> {
    fn from(c: Criteria) -> Self {
        c.list()
    }
}

impl TryFrom<Vec<Criterion>> for Criteria {
    type Error = Error;

    fn try_from(v: Vec<Criterion>) -> Result<Self> {
        let c = Criteria::of(&v);
        if c.is_empty() {
            return Err(Error::Config("at least one criterion must be enabled".into()));
        }
        Ok(c)
    }
}

impl FromStr for Criteria {
    type Err = Error;

    /// Comma separated, e.g. `gain,phase`.
    fn from_str(s: &str) -> Result<Self> {
        let list = s.split(',').map(Criterion::from_str).collect::<Result<Vec<_>>>()?;
        Criteria::try_from(list)
    }
}

impl fmt::Display for Criteria {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.list().iter().map(|c| c.to_string()).collect();
        f.write_str(&names.join("+"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyRecord {
    #[serde(with = "crate::serial::extended")]
    pub omega: f64,
    pub psi_bar_g: f64,
    pub mu_bar_g: f64,
    #[serde(with = "crate::serial::extended")]
    pub r_g: f64,
    pub phi_delta: f64,
    pub norm_delta: f64,
    #[serde(with = "crate::serial::extended")]
    pub norm_s_delta: f64,
    pub phase_ok: bool,
    pub gain_ok: bool,
    pub passivity_ok: bool,
    pub stage: PsiStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_lower_g: Option<f64>,
}

impl FrequencyRecord {
    pub fn holds(&self, c: Criterion) -> bool {
        match c {
            Criterion::Phase => self.phase_ok,
            Criterion::Gain => self.gain_ok,
            Criterion::Passivity => self.passivity_ok,
        }
    }

    pub fn covered_by(&self, criteria: &Criteria) -> bool {
        criteria.list().into_iter().any(|c| self.holds(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedStable,
    NotCertified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationReport {
    /// Always [`GRID_QUALIFIER`]: conditions are checked on grid points only.
    pub qualifier: String,
    #[serde(with = "crate::serial::extended::vec")]
    pub grid: Vec<f64>,
    pub records: Vec<FrequencyRecord>,
    pub omega_psi: Vec<usize>,
    pub omega_mu: Vec<usize>,
    pub omega_passivity: Vec<usize>,
    /// Grid indices where no enabled criterion holds.
    pub uncovered: Vec<usize>,
    pub verdict: Verdict,
    pub criteria_used: Criteria,
    pub margins: Margins,
}

/// Plant-side indices at one frequency. They do not depend on Δ, so a sweep
/// over a perturbation family can reuse them.
#[derive(Debug, Clone)]
pub struct PlantPoint {
    pub omega: f64,
    pub response: ComplexMatrix,
    pub psi: PsiUpperResult,
    pub mu: MuUpperResult,
    /// Relative passivity index; `∞` when `I + G(jω)` is singular.
    pub r: f64,
    pub psi_lower: Option<f64>,
}

/// Perturbation-side quantities at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSide {
    /// Phase index `φ(Δ(jω))`.
    pub phase: f64,
    /// `‖Δ(jω)‖`.
    pub gain: f64,
    /// `‖S_Δ(jω)‖`; `∞` when unknown or singular.
    #[serde(with = "crate::serial::extended")]
    pub scattering_gain: f64,
}

impl DeltaSide {
    /// Quantities of a perturbation response, which must lie in 𝐁_χ.
    pub fn from_response(dw: &ComplexMatrix, chi: &BlockDims, omega: f64) -> Result<Self> {
        if !chi.is_member_b(dw, 1e-9)? {
            return Err(Error::StructureViolation(omega));
        }
        let scattering_gain = match scattering(dw) {
            Ok(s) => spectral_norm(&s),
            Err(Error::SingularScattering) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(Self {
            phase: phase_index(dw, PHASE_TOL),
            gain: spectral_norm(dw),
            scattering_gain,
        })
    }

    /// Bounds only: the scattering gain is unknown.
    pub fn from_bounds(phase: f64, gain: f64) -> Self {
        Self {
            phase,
            gain,
            scattering_gain: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantSweep {
    pub chi: BlockDims,
    pub points: Vec<PlantPoint>,
}

/// `[0, 200 log points over 10⁻²..10³, ∞]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e3, 200)
}

/// `0`, `points` log-spaced values over `[lo, hi]`, and `∞`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    let steps = points.max(2) - 1;
    g.extend((0..points).map(|i| lo * (hi / lo).powf(i as f64 / steps as f64)));
    g.push(f64::INFINITY);
    g
}

/// `0` (unless `lo` is already zero), `points` evenly spaced values over
/// `[lo, hi]`, and `∞`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut g = if lo > 0.0 { vec![0.0] } else { Vec::new() };
    let steps = points.max(2) - 1;
    g.extend((0..points).map(|i| lo + (hi - lo) * i as f64 / steps as f64));
    g.push(f64::INFINITY);
    g
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got \"{v}\"")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

fn at(omega: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtFrequency {
        omega,
        source: Box::new(e),
    }
}

fn plant_point(
    gw: ComplexMatrix,
    omega: f64,
    chi: &BlockDims,
    tol: f64,
    lower: Option<&PsiLowerOptions>,
) -> Result<PlantPoint> {
    let psi = indices::psi_upper(&gw, chi, tol)?;
    let psi_lower = match lower {
        Some(opts) => Some(indices::psi_lower_with(&gw, chi, opts)?.value),
        None => None,
    };
    let mu = indices::mu_upper(&gw, chi, tol)?;
    let r = match indices::relative_passivity(&gw, chi, tol) {
        Ok(v) => v,
        Err(Error::SingularScattering) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(PlantPoint {
        omega,
        response: gw,
        psi,
        mu,
        r,
        psi_lower,
    })
}

/// Plant-side indices over a grid, computed in parallel.
pub fn plant_sweep(g: &StateSpace, chi: &BlockDims, grid: &[f64], tol: f64) -> Result<PlantSweep> {
    plant_sweep_with(g, chi, grid, tol, None)
}

/// As [`plant_sweep`], optionally adding `ψ̲` (restart seed offset by grid index).
pub fn plant_sweep_with(
    g: &StateSpace,
    chi: &BlockDims,
    grid: &[f64],
    tol: f64,
    lower: Option<PsiLowerOptions>,
) -> Result<PlantSweep> {
    check_grid(grid)?;
    if g.outputs() != g.inputs() {
        return Err(Error::DimensionMismatch {
            expected: g.outputs(),
            got: g.inputs(),
        });
    }
    chi.check(g.outputs())?;
    let pool = thread_pool()?;
    let points = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &w)| {
                let gw = freq_response(g, w).map_err(at(w))?;
                let opts = lower.map(|o| PsiLowerOptions {
                    seed: o.seed.wrapping_add(i as u64),
                    ..o
                });
                plant_point(gw, w, chi, tol, opts.as_ref()).map_err(at(w))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PlantSweep {
        chi: chi.clone(),
        points,
    })
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("frequency grid is empty".into()));
    }
    if grid.iter().any(|w| w.is_nan() || *w < 0.0) || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParameter(
            "frequency grid must be ascending and nonnegative".into(),
        ));
    }
    Ok(())
}

fn record(p: &PlantPoint, side: DeltaSide, margins: &Margins) -> FrequencyRecord {
    let psi = p.psi.value;
    let mu = p.mu.value;
    FrequencyRecord {
        omega: p.omega,
        psi_bar_g: psi,
        mu_bar_g: mu,
        r_g: p.r,
        phi_delta: side.phase,
        norm_delta: side.gain,
        norm_s_delta: side.scattering_gain,
        phase_ok: side.phase + psi < std::f64::consts::PI - margins.phase,
        gain_ok: side.gain * mu < 1.0 - margins.gain,
        // 0·∞ is NaN and counts as failing
        passivity_ok: p.r * side.scattering_gain < 1.0 - margins.gain,
        stage: p.psi.stage,
        psi_lower_g: p.psi_lower,
    }
}

/// All indices and verdicts at one frequency.
pub fn analyze_frequency(
    gw: &ComplexMatrix,
    dw: &ComplexMatrix,
    chi: &BlockDims,
    margins: &Margins,
) -> Result<FrequencyRecord> {
    analyze_frequency_at(f64::NAN, gw, dw, chi, margins)
}

fn analyze_frequency_at(
    omega: f64,
    gw: &ComplexMatrix,
    dw: &ComplexMatrix,
    chi: &BlockDims,
    margins: &Margins,
) -> Result<FrequencyRecord> {
    let side = DeltaSide::from_response(dw, chi, omega)?;
    let p = plant_point(gw.clone(), omega, chi, INDEX_TOL, None)?;
    Ok(record(&p, side, margins))
}

/// Certify a perturbation against precomputed plant indices.
pub fn certify_sweep(
    plant: &PlantSweep,
    delta: &StateSpace,
    criteria: Criteria,
    margins: &Margins,
) -> Result<CertificationReport> {
    if criteria.is_empty() {
        return Err(Error::Config("no criteria enabled".into()));
    }
    delta.require_stable("perturbation")?;
    let sides = plant
        .points
        .iter()
        .map(|p| {
            let dw = freq_response(delta, p.omega).map_err(at(p.omega))?;
            DeltaSide::from_response(&dw, &plant.chi, p.omega).map_err(at(p.omega))
        })
        .collect::<Result<Vec<_>>>()?;
    certify_sides(plant, &sides, criteria, margins)
}

/// Certify against perturbation-side data given per grid point.
pub fn certify_sides(
    plant: &PlantSweep,
    sides: &[DeltaSide],
    criteria: Criteria,
    margins: &Margins,
) -> Result<CertificationReport> {
    if criteria.is_empty() {
        return Err(Error::Config("no criteria enabled".into()));
    }
    if sides.len() != plant.points.len() {
        return Err(Error::DimensionMismatch {
            expected: plant.points.len(),
            got: sides.len(),
        });
    }
    let records = plant
        .points
        .iter()
        .zip(sides)
        .map(|(p, side)| record(p, *side, margins))
        .collect();
    Ok(assemble(
        plant.points.iter().map(|p| p.omega).collect(),
        records,
        criteria,
        *margins,
    ))
}

fn assemble(
    grid: Vec<f64>,
    records: Vec<FrequencyRecord>,
    criteria: Criteria,
    margins: Margins,
) -> CertificationReport {
    let pick = |f: &dyn Fn(&FrequencyRecord) -> bool| -> Vec<usize> {
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| f(r))
            .map(|(i, _)| i)
            .collect()
    };
    let omega_psi = pick(&|r| r.phase_ok);
    let omega_mu = pick(&|r| r.gain_ok);
    let omega_passivity = pick(&|r| r.passivity_ok);
    let uncovered = pick(&|r| !r.covered_by(&criteria));
    let verdict = if uncovered.is_empty() {
        Verdict::CertifiedStable
    } else {
        Verdict::NotCertified
    };
    CertificationReport {
        qualifier: GRID_QUALIFIER.into(),
        grid,
        records,
        omega_psi,
        omega_mu,
        omega_passivity,
        uncovered,
        verdict,
        criteria_used: criteria,
        margins,
    }
}

/// Grid certification of the loop `(G, Δ)` with the enabled criteria.
pub fn certify(
    g: &StateSpace,
    delta: &StateSpace,
    chi: &BlockDims,
    grid: &[f64],
    criteria: Criteria,
    margins: &Margins,
) -> Result<CertificationReport> {
    g.require_stable("plant")?;
    delta.require_stable("perturbation")?;
    if delta.inputs() != g.outputs() || delta.outputs() != g.inputs() {
        return Err(Error::DimensionMismatch {
            expected: g.outputs(),
            got: delta.inputs(),
        });
    }
    let plant = plant_sweep(g, chi, grid, INDEX_TOL)?;
    certify_sweep(&plant, delta, criteria, margins)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Multiplier {
    /// Off-diagonal multiplier built from the phase scaling `D` and rotation `β`.
    Phase {
        #[serde(with = "crate::serial::matrix")]
        d: ComplexMatrix,
        beta: f64,
    },
    /// `blkdiag(c⁻²P, −P)` with `P = D*D` from the gain bound and
    /// `μ̄ ≤ c ≤ 1/‖Δ‖`.
    Gain {
        #[serde(with = "crate::serial::matrix")]
        p: ComplexMatrix,
        mu_bar: f64,
        level: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqcCertificate {
    #[serde(with = "crate::serial::extended")]
    pub omega: f64,
    pub kind: Multiplier,
    /// Normalized smallest eigenvalue of the Δ-side inequality.
    pub fdi_delta_margin: f64,
    /// Largest ε in the G-side inequality (`∞` when `G(jω) = 0`).
    #[serde(with = "crate::serial::extended")]
    pub fdi_g_margin: f64,
}

/// Orthonormal basis of `ker(M)⊥`.
fn range_basis(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * top && top > 0.0)
        .collect();
    let mut u = ComplexMatrix::zeros(m.ncols(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        u.set_column(c, &v_t.row(i).adjoint());
    }
    u
}

/// Smallest eigenvalue of `Re(M)` on `ker(M)⊥`, relative to `‖M‖`.
fn restricted_real_margin(m: &ComplexMatrix) -> f64 {
    let u = range_basis(m);
    if u.ncols() == 0 {
        return f64::INFINITY;
    }
    let re = hermitian_parts(m).0;
    lambda_min(&(u.adjoint() * re * &u)) / spectral_norm(m)
}

/// Phase interval `[min, max]` of a quasi-sectorial matrix, `None` for zero.
fn phase_interval(m: &ComplexMatrix) -> Result<Option<(f64, f64)>> {
    if spectral_norm(m) == 0.0 {
        return Ok(None);
    }
    let s = matrix_phases(m, PHASE_TOL)?;
    Ok(Some((s.min_phase(), s.max_phase())))
}

/// Rotation `β` centring the phase intervals of `GD` and `D⁻¹Δ`: the midpoint
/// of the set of admissible rotations.
pub fn centering_beta(gd: Option<(f64, f64)>, dd: Option<(f64, f64)>) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let (a1, b1) = gd.unwrap_or((0.0, 0.0));
    let (a2, b2) = dd.unwrap_or((0.0, 0.0));
    let lo = (-FRAC_PI_2 - a1).max(b2 - FRAC_PI_2);
    let hi = (FRAC_PI_2 - b1).min(FRAC_PI_2 + a2);
    (0.5 * (lo + hi)).clamp(-FRAC_PI_2 + 1e-6, FRAC_PI_2 - 1e-6)
}

/// Rebuild the multiplier that certifies `record` and evaluate both FDIs.
pub fn build_iqc_certificate(
    omega: f64,
    gw: &ComplexMatrix,
    dw: &ComplexMatrix,
    chi: &BlockDims,
    rec: &FrequencyRecord,
) -> Result<IqcCertificate> {
    let cert = if rec.phase_ok {
        let psi = indices::psi_upper(gw, chi, INDEX_TOL)?;
        let d = psi.witness_d;
        let d_inv = inverse(&d).ok_or_else(|| Error::CertificateFailure("phase scaling is singular".into()))?;
        let gd = gw * &d;
        let dd = &d_inv * dw;
        let beta = centering_beta(phase_interval(&gd)?, phase_interval(&dd)?);
        let rot = c64(beta.cos(), beta.sin());
        let delta_margin = restricted_real_margin(&(&dd * rot.conj()));
        // Re(e^{jβ}GD) ⪰ ε·(GD)*(GD) on ker(GD)⊥
        let u = range_basis(&gd);
        let g_margin = if u.ncols() == 0 {
            f64::INFINITY
        } else {
            let lhs = u.adjoint() * hermitian_parts(&(&gd * rot)).0 * &u;
            let rhs = u.adjoint() * gd.adjoint() * &gd * &u;
            gevp_hermitian_definite(&lhs, &rhs, 1e-9)?[0]
        };
        IqcCertificate {
            omega,
            kind: Multiplier::Phase { d, beta },
            fdi_delta_margin: delta_margin,
            fdi_g_margin: g_margin,
        }
    } else if rec.gain_ok {
        let mu = indices::mu_upper(gw, chi, INDEX_TOL)?;
        let nd = spectral_norm(dw);
        // geometric mean of μ̄ and 1/‖Δ‖ balances the two inequalities
        let level = match (mu.value > 0.0, nd > 0.0) {
            (true, true) => (mu.value / nd).sqrt(),
            (false, true) => 0.5 / nd,
            (true, false) => 2.0 * mu.value,
            (false, false) => 1.0,
        };
        let p = mu.witness_p;
        let scale = spectral_norm(&p);
        let c2 = level * level;
        let delta_side = &p * c64(1.0 / c2, 0.0) - dw.adjoint() * &p * dw;
        let g_side = &p - gw.adjoint() * &p * gw * c64(1.0 / c2, 0.0);
        IqcCertificate {
            omega,
            kind: Multiplier::Gain {
                p,
                mu_bar: mu.value,
                level,
            },
            fdi_delta_margin: lambda_min(&delta_side) * c2 / scale,
            fdi_g_margin: lambda_min(&g_side) / scale,
        }
    } else {
        return Err(Error::CertificateFailure(format!(
            "no criterion holds at omega = {omega}"
        )));
    };
    if cert.fdi_delta_margin < -FDI_SLACK || cert.fdi_g_margin < -FDI_SLACK {
        return Err(Error::CertificateFailure(format!(
            "FDI margins ({:.3e}, {:.3e}) at omega = {omega}",
            cert.fdi_delta_margin, cert.fdi_g_margin
        )));
    }
    Ok(cert)
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.14e}")
    }
}

impl CertificationReport {
    /// One row per grid point, 15 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "omega,psi_bar_G,mu_bar_G,R_G,phi_Delta,norm_Delta,norm_S_Delta,phase_ok,gain_ok,passivity_ok,psi_bar_G_deg,phi_Delta_deg,psi_lower_G\n",
        );
        for r in &self.records {
            let cells = [
                fmt_value(r.omega),
                fmt_value(r.psi_bar_g),
                fmt_value(r.mu_bar_g),
                fmt_value(r.r_g),
                fmt_value(r.phi_delta),
                fmt_value(r.norm_delta),
                fmt_value(r.norm_s_delta),
                r.phase_ok.to_string(),
                r.gain_ok.to_string(),
                r.passivity_ok.to_string(),
                fmt_value(r.psi_bar_g.to_degrees()),
                fmt_value(r.phi_delta.to_degrees()),
                r.psi_lower_g.map(fmt_value).unwrap_or_default(),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
