//! Named scenarios: each bundles a set of checks on one problem and may emit
//! extra artifacts. Scenarios are registered by name and selected at runtime.

use std::collections::BTreeMap;

use super::{
    adjoint_study, check_accretivity, check_form_continuity, check_kato_inequality, check_l2_quasicontractivity,
    check_linf_quasicontractivity, check_ouhabaz_linf_functional, check_positivity_forward,
    check_positivity_reverse, check_reduction_identity, check_resolvent_bound, check_sector, confining_partner,
    convergence_study, smooth_datum, spectrum_study, KatoField, Problem, PropertyReport, PropsError,
};
use crate::check::{CheckResult, Comparison};
use crate::coeffs::presets::PresetRegistry;
use crate::coeffs::{
    check_generalized_cauchy_schwarz, PositivityStructure, SamplePoints, SamplingConfig,
};
use crate::evolve::{evolve, semigroup_law_check, step_count, EvolutionConfig, SchemeRegistry};
use crate::grid::{BoxDomain, Grid};

/// Node counts of the adjoint refinement study.
pub const ADJOINT_REFINEMENT: [usize; 3] = [16, 32, 64];
/// Upper bound on random initial data for the evolution-based checks.
pub const EVOLUTION_TRIALS: usize = 50;

/// Everything a scenario needs besides the problem itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub preset: String,
    pub dim: usize,
    pub n: usize,
    pub box_lower: f64,
    pub box_upper: f64,
    pub scheme: String,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Random trials of the form-based checks.
    pub trials: usize,
    pub sampling: SamplingConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            preset: "identity".to_string(),
            dim: 1,
            n: 128,
            box_lower: -4.0,
            box_upper: 4.0,
            scheme: "implicit-euler".to_string(),
            dt: 0.01,
            t_final: 1.0,
            seed: 42,
            trials: 1000,
            sampling: SamplingConfig::default(),
        }
    }
}

impl RunSettings {
    pub fn evolution_trials(&self) -> usize {
        self.trials.min(EVOLUTION_TRIALS)
    }

    pub fn build_problem(&self, presets: &PresetRegistry) -> Result<Problem, PropsError> {
        let domain = BoxDomain::cube(self.dim, self.box_lower, self.box_upper)?;
        let coeffs = presets.get(&self.preset)?.build(&domain)?;
        let grid = Grid::uniform(domain, self.n)?;
        let sampling = SamplingConfig {
            seed: self.seed,
            ..self.sampling
        };
        Problem::new(coeffs, grid, &sampling)
    }
}

/// A named output file produced by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOutput {
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl ScenarioOutput {
    fn extend(&mut self, other: ScenarioOutput) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
        self.artifacts.extend(other.artifacts);
    }
}

pub trait Scenario: Send + Sync {
    fn name(&self) -> &str;
    fn summary(&self) -> &str;
    fn run(&self, problem: &Problem, settings: &RunSettings) -> Result<ScenarioOutput, PropsError>;
}

/// A failed precondition that is a property of the discretization rather
/// than a configuration error becomes a failing check.
fn precondition_as_check(err: PropsError, name: &str) -> Result<CheckResult, PropsError> {
    match err {
        PropsError::StepRestriction { h, limit } => Ok(CheckResult::new(
            format!("{name}_monotone_step"),
            "grid spacing within the monotone step limit h <= eta1 / (m |F|_inf)",
            h,
            limit,
            0.0,
            Comparison::AtMost,
        )
        .with_note("the restriction binds: the check was not run")),
        other => Err(other),
    }
}

struct Hypotheses;
struct Generation;
struct Contractivity;
struct Positivity;
struct Adjoint;
struct Spectrum;
struct Kato;
struct Convergence;

fn flag_check(name: &str, property: &str, holds: bool) -> CheckResult {
    CheckResult::new(name, property, if holds { 1.0 } else { 0.0 }, 1.0, 0.0, Comparison::AtLeast)
}

impl Scenario for Hypotheses {
    fn name(&self) -> &str {
        "hypotheses"
    }

    fn summary(&self) -> &str {
        "structural constants and the Cauchy-Schwarz inequality for the potential"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let h = &p.hypotheses;
        let mut out = ScenarioOutput::default();
        out.checks.push(flag_check(
            "hypothesis_ellipticity_drift_sectoriality",
            "uniform ellipticity, bounded drifts and sectorial potential",
            h.h1,
        ));
        out.checks.push(flag_check(
            "hypothesis_divergence",
            "bounded divergence of F and C with consistent supplied divergence",
            h.h2,
        ));
        out.checks.push(flag_check(
            "hypothesis_regularity",
            "bounded diffusion gradients and locally bounded potential",
            h.h3,
        ));
        if h.sectoriality.is_finite() {
            let samples = SamplePoints::new(&p.coeffs.domain, &s.sampling);
            out.checks.push(check_generalized_cauchy_schwarz(
                &p.coeffs.v,
                h.sectoriality,
                &samples,
                s.sampling.pair_trials,
                s.seed,
            )?);
        }
        out.notes.extend(h.issues.iter().cloned());
        Ok(out)
    }
}

impl Scenario for Generation {
    fn name(&self) -> &str {
        "generation"
    }

    fn summary(&self) -> &str {
        "accretivity, sector, resolvent and L2 bounds of the generated semigroup, plus an evolution"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let omega = p.hypotheses.omega;
        let mut out = ScenarioOutput::default();
        out.checks.push(check_accretivity(p, omega, s.trials, s.seed)?);
        out.checks.push(check_form_continuity(p, s.trials, s.seed.wrapping_add(1))?);
        out.checks.extend(check_sector(p, omega, s.trials, s.seed.wrapping_add(2))?);
        out.checks.push(check_resolvent_bound(p, omega, s.evolution_trials().min(10), s.seed.wrapping_add(3))?);
        out.checks.push(check_l2_quasicontractivity(
            p,
            omega,
            s.evolution_trials(),
            s.dt,
            s.seed.wrapping_add(4),
        )?);

        let schemes = SchemeRegistry::standard();
        let scheme = schemes.get(&s.scheme)?;
        let f0 = smooth_datum(p.grid, p.components());
        let half = 0.5 * s.t_final;
        let cfg = if step_count(half, s.dt).is_some() {
            EvolutionConfig::new(&s.scheme, s.dt, s.t_final).with_snapshots(&[0.0, half, s.t_final])
        } else {
            EvolutionConfig::new(&s.scheme, s.dt, s.t_final).with_snapshots(&[0.0, s.t_final])
        };
        let res = evolve(&f0, &cfg, &p.op, scheme)?;
        for (i, (t, _)) in res.snapshots.iter().enumerate() {
            out.artifacts.push(Artifact {
                file_name: format!("snapshot_{i}.csv"),
                contents: res.snapshot_csv(i),
            });
            out.notes.push(format!("snapshot_{i}.csv holds the solution at t = {t}"));
        }
        let mut norms = String::from("step,l2,linf\n");
        for (k, (a, b)) in res.l2_norms.iter().zip(&res.linf_norms).enumerate() {
            norms.push_str(&format!("{k},{a:.12e},{b:.12e}\n"));
        }
        out.artifacts.push(Artifact {
            file_name: "norms.csv".to_string(),
            contents: norms,
        });
        out.artifacts.push(Artifact {
            file_name: "operator.txt".to_string(),
            contents: p.op.to_triplet_text(),
        });
        if step_count(half, s.dt).is_some() || scheme.is_exact() {
            if !scheme.is_exact() || p.op.dim() <= crate::evolve::DENSE_LIMIT {
                out.checks.push(semigroup_law_check(&f0, half, half, scheme, s.dt, &p.op)?);
            }
        }
        Ok(out)
    }
}

impl Scenario for Contractivity {
    fn name(&self) -> &str {
        "contractivity"
    }

    fn summary(&self) -> &str {
        "unit ball invariance criterion and L^p quasi-contractivity after the shift omega_tilde"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let omega_tilde = p.hypotheses.omega_tilde;
        let mut out = ScenarioOutput::default();
        out.checks.push(check_ouhabaz_linf_functional(p, omega_tilde, s.trials, s.seed)?);
        match check_linf_quasicontractivity(p, omega_tilde, s.evolution_trials(), s.dt, s.seed.wrapping_add(1)) {
            Ok(v) => out.checks.extend(v),
            Err(e) => out.checks.push(precondition_as_check(e, "lp_quasicontractivity")?),
        }
        Ok(out)
    }
}

impl Scenario for Positivity {
    fn name(&self) -> &str {
        "positivity"
    }

    fn summary(&self) -> &str {
        "positivity of the semigroup: forward checks on compliant coefficients, refutation otherwise"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let samples = SamplePoints::new(&p.coeffs.domain, &s.sampling);
        let structure = PositivityStructure::measure(&p.coeffs, &samples);
        let mut out = ScenarioOutput::default();
        out.notes.push(format!(
            "off-diagonal structure: sup |F_ij - C_ij| = {:.3e}, sup (v_ij - div C_ij) = {:.3e}",
            structure.offdiag_drift, structure.offdiag_potential
        ));
        if structure.is_positive() && p.coeffs.c.is_identically_zero() {
            match check_positivity_forward(p, s.evolution_trials(), s.dt, s.seed) {
                Ok(v) => out.checks.extend(v),
                Err(e) => out.checks.push(precondition_as_check(e, "positivity_forward")?),
            }
            let control = check_positivity_reverse(p, s.dt)?;
            out.notes.push(format!(
                "refutation control: {}",
                control.note.clone().unwrap_or_default()
            ));
        } else {
            out.notes.push("structure is not positive: the semigroup must lose positivity".to_string());
            out.checks.push(check_positivity_reverse(p, s.dt)?);
        }
        Ok(out)
    }
}

impl Scenario for Adjoint {
    fn name(&self) -> &str {
        "adjoint"
    }

    fn summary(&self) -> &str {
        "assembled adjoint against the transpose, symmetry, and the divergence reduction"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let mut out = ScenarioOutput::default();
        let study = adjoint_study(&p.coeffs, &ADJOINT_REFINEMENT)?;
        out.checks.push(study.check.clone());
        let mut csv = String::from("n,duality_defect,transpose_defect\n");
        for ((n, a), b) in study.ns.iter().zip(&study.duality_defects).zip(&study.transpose_defects) {
            csv.push_str(&format!("{n},{a:.12e},{b:.12e}\n"));
        }
        out.artifacts.push(Artifact {
            file_name: "adjoint.csv".to_string(),
            contents: csv,
        });
        let c = &p.coeffs;
        let samples = SamplePoints::new(&c.domain, &s.sampling);
        let v_symmetric = samples.iter().all(|x| {
            let v = c.v.eval(x);
            (&v - v.transpose()).amax() == 0.0
        });
        if c.f.is_identically_zero() && c.c.is_identically_zero() && v_symmetric {
            let defect = p.op.max_abs_diff(&p.op.transpose());
            out.checks.push(CheckResult::new(
                "operator_symmetry",
                "without drifts and with symmetric V the operator is symmetric",
                defect,
                0.0,
                0.0,
                Comparison::AtMost,
            ));
        }
        out.checks.push(check_reduction_identity(p, &s.sampling)?);
        Ok(out)
    }
}

impl Scenario for Spectrum {
    fn name(&self) -> &str {
        "spectrum"
    }

    fn summary(&self) -> &str {
        "lowest eigenvalues with and without an added confining potential |x|^2"
    }

    fn run(&self, p: &Problem, _s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let confining = Problem::new(
            confining_partner(&p.coeffs, 1.0),
            p.grid,
            &SamplingConfig {
                quasi_points: 1000,
                ..SamplingConfig::default()
            },
        )?;
        let study = spectrum_study(p, &confining)?;
        let mut csv = String::from("k,bounded,confining\n");
        for (k, (a, b)) in study.bounded.iter().zip(&study.confining).enumerate() {
            csv.push_str(&format!("{},{a:.12e},{b:.12e}\n", k + 1));
        }
        Ok(ScenarioOutput {
            checks: study.checks,
            notes: vec![format!("confining gap slope {:.6e}", study.gap_slope)],
            artifacts: vec![Artifact {
                file_name: "spectrum.csv".to_string(),
                contents: csv,
            }],
        })
    }
}

impl Scenario for Kato {
    fn name(&self) -> &str {
        "kato"
    }

    fn summary(&self) -> &str {
        "modulus inequality for the diffusion part on scalar, polar and constant fields"
    }

    fn run(&self, p: &Problem, _s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let mut out = ScenarioOutput::default();
        for field in [KatoField::Scalar, KatoField::Polar, KatoField::Constant] {
            out.checks.push(check_kato_inequality(p, field)?);
        }
        Ok(out)
    }
}

impl Scenario for Convergence {
    fn name(&self) -> &str {
        "convergence"
    }

    fn summary(&self) -> &str {
        "time-scheme orders and the semigroup law against the dense exponential"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let outcome = convergence_study(p, s.t_final)?;
        let mut csv = String::from("scheme,dt,error\n");
        for st in &outcome.studies {
            for (dt, e) in st.dts.iter().zip(&st.errors) {
                csv.push_str(&format!("{},{dt:.12e},{e:.12e}\n", st.scheme));
            }
        }
        Ok(ScenarioOutput {
            checks: outcome.checks,
            notes: Vec::new(),
            artifacts: vec![Artifact {
                file_name: "convergence.csv".to_string(),
                contents: csv,
            }],
        })
    }
}

/// Runs every registered scenario except itself, concurrently, and
/// concatenates the outputs in name order.
struct All {
    members: Vec<Box<dyn Scenario>>,
}

impl Scenario for All {
    fn name(&self) -> &str {
        "all"
    }

    fn summary(&self) -> &str {
        "every scenario above"
    }

    fn run(&self, p: &Problem, s: &RunSettings) -> Result<ScenarioOutput, PropsError> {
        let results: Vec<Result<ScenarioOutput, PropsError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .members
                .iter()
                .map(|m| scope.spawn(move || m.run(p, s)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        });
        let mut out = ScenarioOutput::default();
        for (m, r) in self.members.iter().zip(results) {
            let mut part = r?;
            for a in &mut part.artifacts {
                a.file_name = format!("{}_{}", m.name(), a.file_name);
            }
            out.extend(part);
        }
        Ok(out)
    }
}

fn standard_members() -> Vec<Box<dyn Scenario>> {
    vec![
        Box::new(Hypotheses),
        Box::new(Generation),
        Box::new(Contractivity),
        Box::new(Positivity),
        Box::new(Adjoint),
        Box::new(Spectrum),
        Box::new(Kato),
        Box::new(Convergence),
    ]
}

pub struct ScenarioRegistry {
    entries: BTreeMap<String, Box<dyn Scenario>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        for s in standard_members() {
            r.register(s);
        }
        r.register(Box::new(All {
            members: standard_members(),
        }));
        r
    }

    pub fn register(&mut self, scenario: Box<dyn Scenario>) {
        self.entries.insert(scenario.name().to_string(), scenario);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Scenario> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Builds the problem for `settings`, runs `scenario` and assembles the
/// report together with the artifacts.
pub fn run_scenario(
    scenario: &dyn Scenario,
    settings: &RunSettings,
    presets: &PresetRegistry,
) -> Result<(PropertyReport, Vec<Artifact>), PropsError> {
    let problem = settings.build_problem(presets)?;
    let out = scenario.run(&problem, settings)?;
    let mut notes = out.notes;
    let (h, limit) = problem.monotone_step();
    if h > limit {
        notes.push(format!(
            "grid spacing {h:.4e} exceeds the monotone step limit {limit:.4e}; sign-based checks do not apply"
        ));
    }
    Ok((
        PropertyReport {
            scenario: scenario.name().to_string(),
            preset: settings.preset.clone(),
            seed: settings.seed,
            hypotheses: problem.hypotheses,
            checks: out.checks,
            notes,
        },
        out.artifacts,
    ))
}
