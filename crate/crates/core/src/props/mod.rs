//! Property checks: every structural statement about the operator, its form
//! and its semigroup becomes a measured quantity compared against a bound.

mod checks;
mod positivity;
pub mod scenarios;
mod studies;
pub mod trials;

use std::fmt::Write as _;

use thiserror::Error;

pub use checks::{
    check_accretivity, check_form_continuity, check_l2_quasicontractivity, check_linf_quasicontractivity,
    check_ouhabaz_linf_functional, check_resolvent_bound, check_sector, ouhabaz_functional, sector_ratio, CHECK_TIMES,
    DENSE_EIGEN_LIMIT, LP_EXPONENTS, SECTOR_MARGIN,
};
pub use positivity::{
    check_positivity_forward, check_positivity_reverse, positivity_form_value, tilt_constructions,
    POSITIVITY_FORM_TOL, REVERSE_DYNAMIC_THRESHOLD, REVERSE_FORM_THRESHOLD,
};
pub use studies::{
    adjoint_study, check_kato_inequality, check_reduction_identity, confining_partner, convergence_study,
    lowest_real_parts, smooth_datum, spectrum_study, AdjointStudy, ConvergenceOutcome, KatoField, SpectrumStudy,
    DOMINANCE_FROM, KATO_FLOOR, SPECTRUM_COUNT,
};

use crate::assembly::{assemble_l, AssemblyError, FormEvaluator, SparseOperator};
use crate::check::CheckResult;
use crate::coeffs::{CoeffError, CoefficientSet, HypothesisReport, SamplingConfig};
use crate::evolve::EvolveError;
use crate::grid::{Grid, GridError};
use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropsError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("grid spacing {h} exceeds the monotone step limit {limit}")]
    StepRestriction { h: f64, limit: f64 },
    #[error("precondition not met: {0}")]
    Precondition(String),
}

/// A coefficient set discretized on a grid, with its constants, operator and
/// form.
#[derive(Debug, Clone)]
pub struct Problem {
    pub coeffs: CoefficientSet,
    pub grid: Grid,
    pub hypotheses: HypothesisReport,
    pub op: SparseOperator,
    pub form: FormEvaluator,
}

impl Problem {
    pub fn new(coeffs: CoefficientSet, grid: Grid, sampling: &SamplingConfig) -> Result<Self, PropsError> {
        let hypotheses = HypothesisReport::analyze(&coeffs, sampling);
        Self::with_report(coeffs, grid, hypotheses)
    }

    pub fn with_report(coeffs: CoefficientSet, grid: Grid, hypotheses: HypothesisReport) -> Result<Self, PropsError> {
        let op = assemble_l(&coeffs, &grid)?;
        let form = FormEvaluator::new(&coeffs, &grid)?;
        Ok(Self {
            coeffs,
            grid,
            hypotheses,
            op,
            form,
        })
    }

    /// Same coefficients and constants on another grid.
    pub fn regrid(&self, grid: Grid) -> Result<Self, PropsError> {
        Self::with_report(self.coeffs.clone(), grid, self.hypotheses.clone())
    }

    /// Same coefficients on the uniform grid with the largest per-axis node
    /// count keeping the unknown count at most `max_unknowns`.
    pub fn coarsened(&self, max_unknowns: usize) -> Result<Self, PropsError> {
        if self.op.dim() <= max_unknowns {
            return Ok(self.clone());
        }
        let d = self.grid.dim();
        let per_node = self.coeffs.components();
        let mut n = 3;
        while (n + 1usize).pow(d as u32) * per_node <= max_unknowns {
            n += 1;
        }
        self.regrid(Grid::uniform(*self.grid.domain(), n)?)
    }

    pub fn components(&self) -> usize {
        self.coeffs.components()
    }

    /// `(h, limit)` for the monotone restriction `h <= eta1 / (m |F|_inf)`.
    pub fn monotone_step(&self) -> (f64, f64) {
        (self.grid.max_spacing(), self.hypotheses.monotone_step_limit())
    }

    pub fn require_monotone_step(&self) -> Result<(), PropsError> {
        let (h, limit) = self.monotone_step();
        if h > limit {
            return Err(PropsError::StepRestriction { h, limit });
        }
        Ok(())
    }
}

/// Outcome of one scenario run.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub scenario: String,
    pub preset: String,
    pub seed: u64,
    pub hypotheses: HypothesisReport,
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `check,measured,bound,tolerance,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,measured,bound,tolerance,verdict\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.3e},{}",
                c.name,
                c.measured,
                c.bound,
                c.tolerance,
                c.verdict()
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let h = &self.hypotheses;
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(out, "preset:   {} (d = {}, m = {})", self.preset, h.dim, h.components);
        let _ = writeln!(out, "seed:     {}", self.seed);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "constants: eta1 = {:.6}, eta2 = {:.6}, M = {:.6}, |F| = {:.6}, |C| = {:.6}, gamma = {:.6}",
            h.eta1, h.eta2, h.sectoriality, h.norm_f, h.norm_c, h.gamma
        );
        let _ = writeln!(out, "shifts:    omega = {:.6}, omega_tilde = {:.6}", h.omega, h.omega_tilde);
        let flag = |b: bool| if b { "holds" } else { "FAILS" };
        let _ = writeln!(
            out,
            "hypotheses: ellipticity/bounded drift/sectoriality {}, divergence bound {}, regularity {}",
            flag(h.h1),
            flag(h.h2),
            flag(h.h3)
        );
        for issue in &h.issues {
            let _ = writeln!(out, "  issue: {issue}");
        }
        let _ = writeln!(out);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {}: {:.6e} {} {:.6e} (tol {:.1e}{})",
                c.verdict(),
                c.name,
                c.measured,
                c.comparison.symbol(),
                c.bound,
                c.tolerance,
                if c.trials > 0 {
                    format!(", {} trials", c.trials)
                } else {
                    String::new()
                }
            );
            let _ = writeln!(out, "       {}", c.property);
            if let Some(n) = &c.note {
                let _ = writeln!(out, "       note: {n}");
            }
            if let Some(w) = &c.witness {
                let _ = writeln!(out, "       witness: {}", w.description);
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(out);
        let _ = writeln!(out, "{passed}/{} checks passed", self.checks.len());
        out
    }
}
