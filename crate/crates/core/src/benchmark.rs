//! The rotating-body benchmark: `T(s)` against the family `Δ_b(s)`.
//!
//! Plant-side indices are computed once and reused for every `b`.

use serde::{Deserialize, Serialize};

use crate::certify::{
    certify_sweep, log_grid, plant_sweep_with, Criteria, Criterion, Margins, PlantSweep, GRID_QUALIFIER,
};
use crate::error::Result;
use crate::indices::{PsiLowerOptions, INDEX_TOL};
use crate::lti::{benchmark_stable, calibrate_a, delta_family, instability_interval, rotating_body_t};
use crate::structure::BlockDims;

/// The criterion sets compared in the benchmark table.
pub const CRITERIA_SETS: [(&str, &[Criterion]); 3] = [
    ("gain", &[Criterion::Gain]),
    ("gain+passivity", &[Criterion::Gain, Criterion::Passivity]),
    ("gain+phase", &[Criterion::Gain, Criterion::Phase]),
];

/// `points` log-spaced values over `[lo, hi]`, endpoints included.
pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let steps = points.max(2) - 1;
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect()
}

/// Default `b` sweep: 60 log-spaced poles over `[0.05, 100]`.
pub fn default_b_grid() -> Vec<f64> {
    logspace(0.05, 100.0, 60)
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    /// `None` calibrates `a` against the reference instability interval.
    pub a: Option<f64>,
    pub b_grid: Vec<f64>,
    pub grid: Vec<f64>,
    pub margins: Margins,
    /// Also compute `ψ̲(T(jω))` for the series output.
    pub lower_bound: Option<PsiLowerOptions>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            a: None,
            b_grid: default_b_grid(),
            grid: log_grid(1e-2, 1e3, 200),
            margins: Margins::default(),
            lower_bound: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub b: f64,
    pub oracle_stable: bool,
    /// One verdict per entry of [`CRITERIA_SETS`].
    pub certified: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub family: String,
    pub a: f64,
    pub calibrated: bool,
    /// Oracle instability interval in `b` at this `a`.
    pub instability_interval: Option<(f64, f64)>,
    pub margins: Margins,
    pub qualifier: String,
    #[serde(with = "crate::serial::extended::vec")]
    pub grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    pub criteria_sets: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub manifest: Manifest,
    pub rows: Vec<BenchmarkRow>,
    pub plant: PlantSweep,
}

pub fn run(opts: &BenchmarkOptions) -> Result<BenchmarkOutcome> {
    let (a, calibrated) = match opts.a {
        Some(a) => (a, false),
        None => (calibrate_a()?.a, true),
    };
    let interval = instability_interval(a, 1e-2, 1e2)?;
    let t = rotating_body_t(a);
    let chi = BlockDims::diagonal(2);
    let plant = plant_sweep_with(&t, &chi, &opts.grid, INDEX_TOL, opts.lower_bound)?;
    let mut rows = Vec::with_capacity(opts.b_grid.len());
    for &b in &opts.b_grid {
        let delta = delta_family(b)?;
        let oracle_stable = benchmark_stable(a, b)?;
        let certified = CRITERIA_SETS
            .iter()
            .map(|(_, set)| {
                let report = certify_sweep(&plant, &delta, Criteria::of(set), &opts.margins)?;
                Ok(report.verdict == crate::certify::Verdict::CertifiedStable)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(BenchmarkRow {
            b,
            oracle_stable,
            certified,
        });
    }
    let manifest = Manifest {
        family: "rotating-body".into(),
        a,
        calibrated,
        instability_interval: interval,
        margins: opts.margins,
        qualifier: GRID_QUALIFIER.into(),
        grid: opts.grid.clone(),
        b_grid: opts.b_grid.clone(),
        criteria_sets: CRITERIA_SETS.iter().map(|(n, _)| n.to_string()).collect(),
    };
    Ok(BenchmarkOutcome { manifest, rows, plant })
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.14e}")
    }
}

impl BenchmarkOutcome {
    /// Rows where some criterion set certifies a loop the oracle calls unstable.
    pub fn soundness_violations(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| !r.oracle_stable && r.certified.iter().any(|&c| c))
            .map(|r| r.b)
            .collect()
    }

    pub fn certified_count(&self, set: usize) -> usize {
        self.rows.iter().filter(|r| r.certified[set]).count()
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("b,oracle_stable");
        for (name, _) in CRITERIA_SETS {
            out.push_str(&format!(",{name}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{}", num(r.b), r.oracle_stable));
            for c in &r.certified {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }

    /// Plant-side margin curves against frequency.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("omega,inv_mu_bar_T,inv_R_T,psi_bar_T,phase_room,psi_lower_T\n");
        for p in &self.plant.points {
            let line = [
                num(p.omega),
                num(1.0 / p.mu.value),
                num(1.0 / p.r),
                num(p.psi.value),
                num(std::f64::consts::PI - p.psi.value),
                p.psi_lower.map(num).unwrap_or_default(),
            ];
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn table_text(&self) -> String {
        let mut out = format!("{:>12}  {:>6}", "b", "oracle");
        for (name, _) in CRITERIA_SETS {
            out.push_str(&format!("  {name:>14}"));
        }
        out.push('\n');
        let mark = |ok: bool| if ok { "yes" } else { "no" };
        for r in &self.rows {
            out.push_str(&format!(
                "{:>12.6}  {:>6}",
                r.b,
                if r.oracle_stable { "stable" } else { "UNST" }
            ));
            for &c in &r.certified {
                out.push_str(&format!("  {:>14}", mark(c)));
            }
            out.push('\n');
        }
        out
    }
}
