//! Command implementations behind the `phasecert` binary.
//!
//! Each command returns its text output; the binary only prints and maps
//! results to exit codes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::{
    certify_sides, check_grid, linear_grid, log_grid, plant_sweep_with, CertificationReport, Criteria, DeltaSide,
    Margins, Verdict,
};
use crate::error::{Error, Result};
use crate::indices::{self, PsiLowerOptions, INDEX_TOL};
use crate::lti::{delta_family, freq_response, rotating_body_t, StateSpace};
use crate::matrix::{c64, spectral_norm, ComplexMatrix};
use crate::phase::{classify_sectoriality, field_angle, matrix_phases, numerical_range_boundary, phase_index};
use crate::structure::BlockDims;

const PHASE_TOL: f64 = 1e-9;

/// Exit code for a completed analysis that could not certify stability.
pub const EXIT_NOT_CERTIFIED: u8 = 2;

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    matrix: Vec<Vec<Entry>>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Parse a square complex matrix. JSON files may hold the bare row array
/// or `{"matrix": …}`; anything else is read as TOML with a `matrix` key.
/// Entries are reals or `[re, im]` pairs.
pub fn parse_matrix(text: &str, json: bool) -> Result<ComplexMatrix> {
    let rows = if json {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let doc = if value.is_array() {
            serde_json::from_value::<Vec<Vec<Entry>>>(value)
        } else {
            serde_json::from_value::<MatrixDoc>(value).map(|d| d.matrix)
        };
        doc.map_err(|e| Error::Config(format!("field \"matrix\": {e}")))?
    } else {
        toml::from_str::<MatrixDoc>(text)
            .map_err(|e| Error::Config(e.to_string()))?
            .matrix
    };
    let n = rows.len();
    if n == 0 {
        return Err(Error::Config("field \"matrix\": no rows".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Config(format!(
            "field \"matrix\": row {i} has {} entries, expected {n} (square)",
            rows[i].len()
        )));
    }
    let m = ComplexMatrix::from_fn(n, n, |i, j| match rows[i][j] {
        Entry::Real(re) => c64(re, 0.0),
        Entry::Complex([re, im]) => c64(re, im),
    });
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Config("field \"matrix\": entries must be finite".into()));
    }
    Ok(m)
}

pub fn load_matrix(path: &Path) -> Result<ComplexMatrix> {
    parse_matrix(&read(path)?, is_json(path)).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn fmt_angles(v: &[f64], deg: bool) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|x| {
            if deg {
                format!("{:.6}", x.to_degrees())
            } else {
                format!("{x:.9}")
            }
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

/// `phases`: sectoriality, phases and the derived angles.
pub fn phases_command(a: &ComplexMatrix, boundary: Option<usize>) -> Result<String> {
    let mut out = String::new();
    let class = classify_sectoriality(a, PHASE_TOL)?;
    writeln!(out, "sectoriality: {class:?}").unwrap();
    match matrix_phases(a, PHASE_TOL) {
        Ok(sp) => {
            writeln!(out, "phases (rad): {}", fmt_angles(&sp.phases, false)).unwrap();
            writeln!(out, "phases (deg): {}", fmt_angles(&sp.phases, true)).unwrap();
            writeln!(out, "center (rad): {:.9}", sp.center).unwrap();
            if sp.rank_deficiency > 0 {
                writeln!(out, "kernel dimension: {}", sp.rank_deficiency).unwrap();
            }
        }
        Err(Error::NotQuasiSectorial) => writeln!(out, "phases: undefined (not quasi-sectorial)").unwrap(),
        Err(e) => return Err(e),
    }
    writeln!(out, "field angle (rad): {:.9}", field_angle(a, PHASE_TOL)?).unwrap();
    writeln!(out, "phase index (rad): {:.9}", phase_index(a, PHASE_TOL)).unwrap();
    if let Some(samples) = boundary {
        writeln!(out, "boundary: theta,re,im").unwrap();
        for (theta, z) in numerical_range_boundary(a, samples.max(3)) {
            writeln!(out, "{theta:.9},{:.12e},{:.12e}", z.re, z.im).unwrap();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicesSummary {
    pub structure: String,
    pub psi_upper: f64,
    pub psi_stage: indices::PsiStage,
    pub psi_lower: f64,
    pub mu_upper: f64,
    #[serde(with = "crate::serial::extended")]
    pub relative_passivity: f64,
    pub norm: f64,
    pub witness_d_norm: f64,
    pub witness_p_norm: f64,
    pub witness_x_norm: f64,
}

pub fn indices_summary(a: &ComplexMatrix, chi: &BlockDims, lower: &PsiLowerOptions) -> Result<IndicesSummary> {
    let psi = indices::psi_upper(a, chi, INDEX_TOL)?;
    let low = indices::psi_lower_with(a, chi, lower)?;
    let mu = indices::mu_upper(a, chi, INDEX_TOL)?;
    let r = match indices::relative_passivity(a, chi, INDEX_TOL) {
        Ok(r) => r,
        Err(Error::SingularScattering) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let x_norm = low.witness_x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(IndicesSummary {
        structure: chi.to_string(),
        psi_upper: psi.value,
        psi_stage: psi.stage,
        psi_lower: low.value,
        mu_upper: mu.value,
        relative_passivity: r,
        norm: spectral_norm(a),
        witness_d_norm: spectral_norm(&psi.witness_d),
        witness_p_norm: spectral_norm(&mu.witness_p),
        witness_x_norm: x_norm,
    })
}

impl IndicesSummary {
    pub fn text(&self) -> String {
        let fmt_r = if self.relative_passivity.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.9}", self.relative_passivity)
        };
        format!(
            "structure: {}\n\
             psi_upper: {:.9} rad ({:.6} deg), stage {:?}\n\
             psi_lower: {:.9} rad ({:.6} deg)\n\
             mu_upper: {:.9} (norm {:.9})\n\
             relative passivity: {fmt_r}\n\
             witness norms: |D| {:.6e}, |P| {:.6e}, |x| {:.6e}\n",
            self.structure,
            self.psi_upper,
            self.psi_upper.to_degrees(),
            self.psi_stage,
            self.psi_lower,
            self.psi_lower.to_degrees(),
            self.mu_upper,
            self.norm,
            self.witness_d_norm,
            self.witness_p_norm,
            self.witness_x_norm,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: 1e-2,
            max: 1e3,
            points: 200,
            spacing: Spacing::Log,
        }
    }
}

impl GridConfig {
    /// Frequencies including the endpoints `0` and `∞`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let bad = |why: String| Err(Error::Config(format!("grid: {why}")));
        if self.points < 2 {
            return bad(format!("points must be at least 2, got {}", self.points));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min >= 0.0 && self.min < self.max) {
            return bad(format!(
                "need 0 <= min < max, got min = {}, max = {}",
                self.min, self.max
            ));
        }
        let grid = match self.spacing {
            Spacing::Log if self.min <= 0.0 => return bad("log spacing needs min > 0".into()),
            Spacing::Log => log_grid(self.min, self.max, self.points),
            Spacing::Linear => linear_grid(self.min, self.max, self.points),
        };
        check_grid(&grid)?;
        Ok(grid)
    }
}

/// Per-frequency bounds on the perturbation, interpolated linearly in `ω`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundTable {
    #[serde(with = "crate::serial::extended::vec")]
    pub omega: Vec<f64>,
    pub phase: Vec<f64>,
    pub gain: Vec<f64>,
    /// Optional `‖S_Δ‖` bounds; without them passivity never holds.
    #[serde(default)]
    pub scattering: Option<Vec<f64>>,
}

impl BoundTable {
    fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Config(format!("perturbation_bounds: {why}")));
        let n = self.omega.len();
        if n == 0 {
            return bad("omega is empty".into());
        }
        let lens = [("phase", self.phase.len()), ("gain", self.gain.len())]
            .into_iter()
            .chain(self.scattering.as_ref().map(|s| ("scattering", s.len())));
        for (name, len) in lens {
            if len != n {
                return bad(format!("{name} has {len} entries, omega has {n}"));
            }
        }
        if self.omega.windows(2).any(|w| !(w[0] < w[1])) || self.omega[0] < 0.0 {
            return bad("omega must be nonnegative and strictly increasing".into());
        }
        if let Some(i) = self
            .phase
            .iter()
            .position(|p| !(0.0..=std::f64::consts::PI).contains(p))
        {
            return bad(format!("phase[{i}] must lie in [0, pi]"));
        }
        if let Some(i) = self.gain.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad(format!("gain[{i}] must be finite and nonnegative"));
        }
        Ok(())
    }

    fn at(&self, w: f64) -> Result<DeltaSide> {
        let om = &self.omega;
        let scat = |k: usize| self.scattering.as_ref().map_or(f64::INFINITY, |s| s[k]);
        if let Some(k) = om.iter().position(|&x| x == w) {
            return Ok(DeltaSide {
                phase: self.phase[k],
                gain: self.gain[k],
                scattering_gain: scat(k),
            });
        }
        let k = om
            .iter()
            .position(|&x| x > w)
            .filter(|&k| k > 0 && om[k].is_finite())
            .ok_or_else(|| {
                Error::Config(format!(
                    "perturbation_bounds: grid frequency {w} lies outside the table"
                ))
            })?;
        let t = (w - om[k - 1]) / (om[k] - om[k - 1]);
        let lerp = |a: f64, b: f64| a + t * (b - a);
        Ok(DeltaSide {
            phase: lerp(self.phase[k - 1], self.phase[k]),
            gain: lerp(self.gain[k - 1], self.gain[k]),
            scattering_gain: lerp(scat(k - 1), scat(k)),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkParams {
    /// Defaults to the calibrated value.
    pub a: Option<f64>,
    pub b: f64,
}

fn default_criteria() -> Criteria {
    Criteria::ALL
}

fn parse_structure<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<BlockDims>, D::Error> {
    use serde::de::Error as _;
    let s = Option::<String>::deserialize(d)?;
    s.map(|s| s.parse().map_err(|e: Error| D::Error::custom(e.to_string())))
        .transpose()
}

/// `analyze` configuration (TOML).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub plant: Option<StateSpace>,
    #[serde(default)]
    pub perturbation: Option<StateSpace>,
    #[serde(default)]
    pub perturbation_bounds: Option<BoundTable>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkParams>,
    #[serde(default, deserialize_with = "parse_structure")]
    pub structure: Option<BlockDims>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_criteria")]
    pub criteria: Criteria,
    #[serde(default)]
    pub margins: Margins,
    #[serde(default)]
    pub seed: u64,
    /// Also compute `ψ̲(G(jω))` at every grid point.
    #[serde(default)]
    pub lower_bound: bool,
}

impl AnalysisConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

enum PerturbationSource {
    System(StateSpace),
    Bounds(BoundTable),
}

/// Analysis result together with the resolved inputs.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub structure: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: CertificationReport,
}

impl AnalysisOutput {
    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let r = &self.report;
        let mut out = format!(
            "verdict: {:?} ({}, {} frequencies, criteria {})\n",
            r.verdict,
            r.qualifier,
            r.grid.len(),
            r.criteria_used
        );
        writeln!(
            out,
            "points passing: phase {}, gain {}, passivity {}",
            r.omega_psi.len(),
            r.omega_mu.len(),
            r.omega_passivity.len()
        )
        .unwrap();
        if !r.uncovered.is_empty() {
            let w: Vec<String> = r.uncovered.iter().map(|&i| format!("{:.6e}", r.grid[i])).collect();
            writeln!(out, "uncovered frequencies: {}", w.join(", ")).unwrap();
        }
        out
    }
}

/// Resolve a configuration into plant, perturbation and structure, then
/// run the sweep.
pub fn analyze(cfg: &AnalysisConfig) -> Result<AnalysisOutput> {
    let cfg_err = |m: &str| Error::Config(m.to_string());
    if cfg.margins.phase < 0.0 || cfg.margins.gain < 0.0 || cfg.margins.gain >= 1.0 {
        return Err(cfg_err("margins: need phase >= 0 and 0 <= gain < 1"));
    }
    let given = [
        cfg.perturbation.is_some(),
        cfg.perturbation_bounds.is_some(),
        cfg.benchmark.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(cfg_err(
            "exactly one of [perturbation], [perturbation_bounds] or [benchmark] must be given",
        ));
    }
    let (plant, source) = match &cfg.benchmark {
        Some(bm) => {
            if cfg.plant.is_some() {
                return Err(cfg_err("[plant] conflicts with [benchmark]"));
            }
            let a = match bm.a {
                Some(a) => a,
                None => crate::lti::calibrate_a()?.a,
            };
            let delta = delta_family(bm.b).map_err(|e| Error::Config(format!("benchmark.b: {e}")))?;
            (rotating_body_t(a), PerturbationSource::System(delta))
        }
        None => {
            let plant = cfg.plant.clone().ok_or_else(|| cfg_err("[plant] is required"))?;
            let source = match (&cfg.perturbation, &cfg.perturbation_bounds) {
                (Some(d), _) => PerturbationSource::System(d.clone()),
                (_, Some(t)) => {
                    t.validate()?;
                    PerturbationSource::Bounds(t.clone())
                }
                _ => unreachable!(),
            };
            (plant, source)
        }
    };
    let chi = match (&cfg.structure, &cfg.benchmark) {
        (Some(chi), _) => chi.clone(),
        (None, Some(_)) => BlockDims::diagonal(2),
        (None, None) => return Err(cfg_err("structure is required, e.g. structure = \"((), (1, 1))\"")),
    };
    if plant.inputs() != plant.outputs() {
        return Err(cfg_err("plant: must be square"));
    }
    chi.check(plant.outputs())
        .map_err(|e| Error::Config(format!("structure: {e}")))?;
    plant.require_stable("plant")?;
    let grid = cfg.grid.frequencies()?;
    let lower = cfg.lower_bound.then_some(PsiLowerOptions {
        seed: cfg.seed,
        ..PsiLowerOptions::default()
    });
    let sweep = plant_sweep_with(&plant, &chi, &grid, INDEX_TOL, lower)?;
    let sides = match &source {
        PerturbationSource::System(delta) => {
            if delta.inputs() != plant.outputs() || delta.outputs() != plant.inputs() {
                return Err(cfg_err("perturbation: dimensions do not match the plant"));
            }
            delta.require_stable("perturbation")?;
            grid.iter()
                .map(|&w| {
                    let dw = freq_response(delta, w).map_err(|e| at_frequency(w, e))?;
                    DeltaSide::from_response(&dw, &chi, w).map_err(|e| at_frequency(w, e))
                })
                .collect::<Result<Vec<_>>>()?
        }
        PerturbationSource::Bounds(t) => grid.iter().map(|&w| t.at(w)).collect::<Result<Vec<_>>>()?,
    };
    let report = certify_sides(&sweep, &sides, cfg.criteria, &cfg.margins)?;
    Ok(AnalysisOutput {
        structure: chi.to_string(),
        seed: cfg.seed,
        report,
    })
}

fn at_frequency(omega: f64, e: Error) -> Error {
    Error::AtFrequency {
        omega,
        source: Box::new(e),
    }
}

/// Exit code for an analysis verdict.
pub fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::CertifiedStable => 0,
        Verdict::NotCertified => EXIT_NOT_CERTIFIED,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_formats() {
        let a = parse_matrix("[[1, [0, 2]], [0, 3.5]]", true).unwrap();
        assert_eq!(a[(0, 1)], c64(0.0, 2.0));
        let b = parse_matrix(r#"{"matrix": [[1, [0, 2]], [0, 3.5]]}"#, true).unwrap();
        assert_eq!(a, b);
        let c = parse_matrix("matrix = [[1, [0, 2]], [0, 3.5]]", false).unwrap();
        assert_eq!(a, c);
        let err = parse_matrix("[[1, 2], [3]]", true).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        assert!(parse_matrix("matrix = [[1, [0, 2, 3]]]", false).is_err());
    }

    #[test]
    fn phases_of_rotated_identity() {
        let a = crate::matrix::identity(2) * c64(0.0, 1.0);
        let out = phases_command(&a, Some(8)).unwrap();
        assert!(out.contains("sectoriality: Sectorial"));
        assert!(out.contains("phases (deg): [90.000000, 90.000000]"), "{out}");
        assert_eq!(out.lines().filter(|l| l.split(',').count() == 3).count(), 9);
    }

    #[test]
    fn grid_validation() {
        let g = GridConfig {
            points: 1,
            ..Default::default()
        };
        assert!(g.frequencies().unwrap_err().to_string().contains("points"));
        let g = GridConfig {
            min: 0.0,
            ..Default::default()
        };
        assert!(g.frequencies().is_err());
        let g = GridConfig {
            min: 0.0,
            max: 10.0,
            points: 11,
            spacing: Spacing::Linear,
        };
        let w = g.frequencies().unwrap();
        assert_eq!(w.len(), 12);
        assert_eq!(w[0], 0.0);
        assert!(w[11].is_infinite());
    }

    #[test]
    fn config_errors_name_the_field() {
        let err = AnalysisConfig::from_toml("structure = \"((),(1,1))\"\n[grid]\npoints = \"x\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("points") && err.contains("line 3"), "{err}");
        let err = AnalysisConfig::from_toml("structure = \"((1)\"")
            .unwrap_err()
            .to_string();
        assert!(err.contains("structure"), "{err}");
        let cfg = AnalysisConfig::from_toml("structure = \"((),(1))\"\n[plant]\nd = [[0.5]]\n").unwrap();
        assert!(analyze(&cfg).unwrap_err().to_string().contains("exactly one"));
    }

    #[test]
    fn static_loop_from_bounds() {
        let text = r#"
structure = "((), (1))"
criteria = ["gain"]
[plant]
d = [[0.5]]
[grid]
min = 1.0
max = 10.0
points = 3
[perturbation_bounds]
omega = [0.0, 100.0, "inf"]
phase = [0.0, 0.0, 0.0]
gain = [1.0, 1.5, 1.0]
"#;
        let out = analyze(&AnalysisConfig::from_toml(text).unwrap()).unwrap();
        assert_eq!(out.report.verdict, Verdict::CertifiedStable);
        assert!(out.report.records.iter().all(|r| !r.passivity_ok));
        let json = out.json();
        assert!(json.contains("\"structure\": \"((), (1))\""));
        assert!(json.contains("\"inf\""));
    }
}
