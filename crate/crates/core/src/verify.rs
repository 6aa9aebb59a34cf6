//! Verification suites over a frame system, producing a machine-readable report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{verify_uep_matrix, SamplingPlan, VerificationReport, DEFAULT_GRID, DEFAULT_RANDOM, DEFAULT_SEED};
use crate::frame::{
    fiberization_both_sides, fiberization_on_integers, frame_operator, identity_defect, parseval_residual,
    random_test_function, telescoping_residual, FrameSystem, GenId, TestFunction, DEFAULT_WINDOW,
};
use crate::group::{Elem, GroupSpec};
use crate::sequence::Sequence;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Uep,
    Refinement,
    Fiber,
    Telescope,
    Parseval,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uep" => Suite::Uep,
            "refinement" => Suite::Refinement,
            "fiber" => Suite::Fiber,
            "telescope" => Suite::Telescope,
            "parseval" => Suite::Parseval,
            "all" => Suite::All,
            other => return Err(Error::Input(format!("suite: unknown suite {other:?}"))),
        })
    }
}

/// The identity each report line certifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    UepMatrixCondition,
    RefinementEquation,
    FiberizationIdentity,
    TelescopingIdentity,
    ParsevalIdentity,
    LimitNormalization,
    TranslateDisjointness,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::UepMatrixCondition => "uep_matrix_condition",
            Condition::RefinementEquation => "refinement_equation",
            Condition::FiberizationIdentity => "fiberization_identity",
            Condition::TelescopingIdentity => "telescoping_identity",
            Condition::ParsevalIdentity => "parseval_identity",
            Condition::LimitNormalization => "limit_normalization",
            Condition::TranslateDisjointness => "translate_disjointness",
        }
    }

    pub fn statement(&self) -> &'static str {
        match self {
            Condition::UepMatrixCondition => "P_k* P_k = d_k I on V_k",
            Condition::RefinementEquation => "Phi_k = H_k Phi_{k+1}",
            Condition::FiberizationIdentity => "lattice sum of |<F, M_lambda Phi>|^2 equals the fiber integral over V",
            Condition::TelescopingIdentity => "level k+1 energy equals level k energy plus the wavelet energies",
            Condition::ParsevalIdentity => "sum of |coefficients|^2 equals ||f||^2",
            Condition::LimitNormalization => "mu(V_k1) |Phi_k1|^2 = 1 on the reproduction set",
            Condition::TranslateDisjointness => "Phi_k1 vanishes on the annihilator translates of the reproduction set",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub condition: Condition,
    pub statement: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<usize>,
    pub status: Status,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub certification: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst_point: Option<Elem>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub descriptor_sha256: String,
    pub seed: String,
    pub suite: Suite,
    pub family: String,
    pub group: String,
    pub tolerance: f64,
    pub trials: usize,
    pub checks: Vec<CheckLine>,
    pub passed: bool,
}

impl Report {
    /// 0 when every check passed or was skipped, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            let level = c.level.map(|k| format!(" k={k}")).unwrap_or_default();
            let residual = c.residual.map(|r| format!(" residual={r:.3e}")).unwrap_or_default();
            let note = c.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default();
            out.push_str(&format!(
                "{status} {}{level}{residual} tol={:.1e} samples={} [{}]{note}\n",
                c.condition.label(),
                c.tolerance,
                c.samples,
                c.certification
            ));
        }
        out.push_str(if self.passed { "verification passed\n" } else { "verification FAILED\n" });
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub suite: Suite,
    /// Regular grid size on continuous duals; a quarter as many random points are added.
    pub samples: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { suite: Suite::All, samples: None, trials: DEFAULT_TRIALS, seed: DEFAULT_SEED, tolerance: DEFAULT_TOLERANCE }
    }
}

impl VerifyOptions {
    pub fn plan(&self) -> SamplingPlan {
        match self.samples {
            None => SamplingPlan::Standard { grid: DEFAULT_GRID, random: DEFAULT_RANDOM, seed: self.seed },
            Some(n) => SamplingPlan::Standard { grid: n, random: n / 4, seed: self.seed },
        }
    }
}

struct Builder<'a> {
    opts: &'a VerifyOptions,
    lines: Vec<CheckLine>,
}

impl Builder<'_> {
    fn from_report(&mut self, condition: Condition, level: Option<usize>, r: &VerificationReport) {
        let ok = r.residual <= self.opts.tolerance;
        self.lines.push(CheckLine {
            condition,
            statement: condition.statement().into(),
            level,
            status: if ok { Status::Pass } else { Status::Fail },
            residual: Some(r.residual),
            tolerance: self.opts.tolerance,
            samples: r.samples,
            certification: r.certification().into(),
            worst_point: r.worst_point.clone(),
            note: None,
        });
    }

    fn trials(&mut self, condition: Condition, level: Option<usize>, residual: f64, trials: usize, note: Option<String>) {
        let ok = residual <= self.opts.tolerance;
        self.lines.push(CheckLine {
            condition,
            statement: condition.statement().into(),
            level,
            status: if ok { Status::Pass } else { Status::Fail },
            residual: Some(residual),
            tolerance: self.opts.tolerance,
            samples: trials,
            certification: "checked on seeded random test functions".into(),
            worst_point: None,
            note,
        });
    }

    fn not_run(&mut self, condition: Condition, level: Option<usize>, status: Status, note: String) {
        self.lines.push(CheckLine {
            condition,
            statement: condition.statement().into(),
            level,
            status,
            residual: None,
            tolerance: self.opts.tolerance,
            samples: 0,
            certification: "not evaluated".into(),
            worst_point: None,
            note: Some(note),
        });
    }

    /// Unsupported operations become skips; failed preconditions become failures.
    fn outcome(&mut self, condition: Condition, level: Option<usize>, e: Error) -> Result<()> {
        match e {
            Error::Unsupported(msg) => {
                self.not_run(condition, level, Status::Skip, format!("out of desk-scale scope: {msg}"));
                Ok(())
            }
            Error::Precondition { condition: c, detail } => {
                self.not_run(condition, level, Status::Fail, format!("precondition {c}: {detail}"));
                Ok(())
            }
            other => Err(other),
        }
    }
}

fn rng_for(opts: &VerifyOptions, suite: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed ^ suite.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn uep(system: &FrameSystem, b: &mut Builder) -> Result<()> {
    let plan = b.opts.plan();
    for k in system.k0..system.k1 {
        let r = verify_uep_matrix(&system.uep_matrix(k)?, &plan)?;
        b.from_report(Condition::UepMatrixCondition, Some(k), &r);
    }
    Ok(())
}

fn refinement(system: &FrameSystem, b: &mut Builder) -> Result<()> {
    let plan = b.opts.plan();
    for k in system.k0..system.k1 {
        match system.refinement_report(k, &plan) {
            Ok(r) => b.from_report(Condition::RefinementEquation, Some(k), &r),
            Err(e) => b.outcome(Condition::RefinementEquation, Some(k), e)?,
        }
    }
    Ok(())
}

/// Generator values on the index window of `f`.
fn generator_on(system: &FrameSystem, id: GenId, f: &Sequence) -> Result<Sequence> {
    let vals = (0..f.values.len() as i64)
        .map(|i| system.gen_hat(id, &Elem::int(f.start + i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(match f.modulus {
        Some(n) => Sequence::on_cyclic(n, vals),
        None => Sequence::on_integers(f.start, vals),
    })
}

fn fiber_residual(system: &FrameSystem, id: GenId, f: &TestFunction) -> Result<f64> {
    let (lhs, rhs) = match (system.group(), f) {
        (GroupSpec::Integers, TestFunction::Time(s)) => fiberization_on_integers(system, id, s)?,
        (GroupSpec::FiniteCyclic { .. } | GroupSpec::Torus, TestFunction::Frequency(s)) => {
            let lv = system.chain.level(id.k)?;
            let phi = generator_on(system, id, s)?;
            fiberization_both_sides(&system.group(), &lv.lattice, &lv.v, s, &phi)?
        }
        _ => return Err(Error::Unsupported("direct analysis on R^s".into())),
    };
    Ok((lhs - rhs).abs() / (1.0 + lhs))
}

fn fiber(system: &FrameSystem, b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b.opts, 3);
    let trials = b.opts.trials;
    for id in system.generator_ids() {
        let mut worst: f64 = 0.0;
        let mut err = None;
        for _ in 0..trials {
            let r = random_test_function(system, &mut rng, DEFAULT_WINDOW).and_then(|f| fiber_residual(system, id, &f));
            match r {
                Ok(r) => worst = worst.max(r),
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        match err {
            Some(e) => b.outcome(Condition::FiberizationIdentity, Some(id.k), e)?,
            None => b.trials(Condition::FiberizationIdentity, Some(id.k), worst, trials, Some(id.to_string())),
        }
        if matches!(b.lines.last(), Some(l) if l.status == Status::Skip) {
            break;
        }
    }
    Ok(())
}

fn telescope(system: &FrameSystem, b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b.opts, 4);
    let trials = b.opts.trials;
    for k in system.k0..system.k1 {
        let mut worst: f64 = 0.0;
        let mut err = None;
        for _ in 0..trials {
            match random_test_function(system, &mut rng, DEFAULT_WINDOW).and_then(|f| telescoping_residual(system, k, &f)) {
                Ok(r) => worst = worst.max(r),
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        match err {
            Some(e) => b.outcome(Condition::TelescopingIdentity, Some(k), e)?,
            None => b.trials(Condition::TelescopingIdentity, Some(k), worst, trials, None),
        }
    }
    Ok(())
}

fn parseval(system: &FrameSystem, b: &mut Builder) -> Result<()> {
    if matches!(system.group(), GroupSpec::Euclidean { .. }) {
        b.not_run(
            Condition::ParsevalIdentity,
            None,
            Status::Skip,
            "out of desk-scale scope: R^s systems are certified through matrix conditions only".into(),
        );
        return Ok(());
    }
    if system.reproduction_set().is_none() {
        b.not_run(
            Condition::ParsevalIdentity,
            None,
            Status::Skip,
            format!("the top level {} does not reproduce every frequency; Parseval is not claimed", system.k1),
        );
        return Ok(());
    }
    if let (GroupSpec::FiniteCyclic { modulus }, Some(crate::lattice::Domain::Whole)) =
        (system.group(), system.reproduction_set())
    {
        let s = frame_operator(system)?;
        b.lines.push(CheckLine {
            condition: Condition::ParsevalIdentity,
            statement: "frame operator equals the identity".into(),
            level: None,
            status: if identity_defect(&s) <= b.opts.tolerance { Status::Pass } else { Status::Fail },
            residual: Some(identity_defect(&s)),
            tolerance: b.opts.tolerance,
            samples: modulus as usize,
            certification: "exact on the whole finite domain".into(),
            worst_point: None,
            note: Some("max entry of |S - I|".into()),
        });
    }
    let mut rng = rng_for(b.opts, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..b.opts.trials {
        let f = random_test_function(system, &mut rng, DEFAULT_WINDOW)?;
        match parseval_residual(system, &f) {
            Ok(r) => worst = worst.max(r),
            Err(e) => return b.outcome(Condition::ParsevalIdentity, None, e),
        }
    }
    b.trials(Condition::ParsevalIdentity, None, worst, b.opts.trials, Some("relative residual".into()));
    Ok(())
}

fn top_level(system: &FrameSystem, b: &mut Builder) -> Result<()> {
    let plan = b.opts.plan();
    if system.reproduction_set().is_none() {
        for c in [Condition::LimitNormalization, Condition::TranslateDisjointness] {
            b.not_run(c, Some(system.k1), Status::Skip, "the top level does not reproduce every frequency".into());
        }
        return Ok(());
    }
    match system.limit_normalization(&plan) {
        Ok(r) => b.from_report(Condition::LimitNormalization, Some(system.k1), &r),
        Err(e) => b.outcome(Condition::LimitNormalization, Some(system.k1), e)?,
    }
    match system.translate_disjointness(&plan) {
        Ok(r) => b.from_report(Condition::TranslateDisjointness, Some(system.k1), &r),
        Err(e) => b.outcome(Condition::TranslateDisjointness, Some(system.k1), e)?,
    }
    Ok(())
}

pub fn verify_system(system: &FrameSystem, opts: &VerifyOptions, descriptor_sha256: &str) -> Result<Report> {
    if !(opts.tolerance >= 0.0) {
        return Err(Error::Input(format!("tolerance: {} must be a non-negative number", opts.tolerance)));
    }
    let mut b = Builder { opts, lines: Vec::new() };
    let run = |s: Suite| opts.suite == s || opts.suite == Suite::All;
    if run(Suite::Uep) {
        uep(system, &mut b)?;
    }
    if run(Suite::Refinement) {
        refinement(system, &mut b)?;
    }
    if run(Suite::Fiber) {
        fiber(system, &mut b)?;
    }
    if run(Suite::Telescope) {
        telescope(system, &mut b)?;
    }
    if run(Suite::Parseval) {
        parseval(system, &mut b)?;
    }
    if opts.suite == Suite::All {
        top_level(system, &mut b)?;
    }
    let passed = b.lines.iter().all(|l| l.status != Status::Fail);
    Ok(Report {
        descriptor_sha256: descriptor_sha256.into(),
        seed: crate::descriptor::format_seed(opts.seed),
        suite: opts.suite,
        family: system.family.label(),
        group: system.group().variant_name().into(),
        tolerance: opts.tolerance,
        trials: opts.trials,
        checks: b.lines,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::parse_descriptor;
    use std::collections::BTreeSet;

    fn system(text: &str) -> FrameSystem {
        parse_descriptor(text).unwrap().build().unwrap()
    }

    #[test]
    fn haar_all_suites_pass() {
        let s = system(r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":1}}}"#);
        let r = verify_system(&s, &VerifyOptions::default(), "x").unwrap();
        assert!(r.passed, "{}", r.human_summary());
        let names: BTreeSet<_> = r.checks.iter().map(|c| c.condition).collect();
        assert_eq!(names.len(), 7);
        assert!(r.checks.iter().all(|c| c.residual.unwrap() <= 1e-10));
    }

    #[test]
    fn shannon_parseval_is_exact() {
        let s = system(r#"{"group":{"variant":"cyclic","params":{"modulus":8}},"family":{"charfun":{"mode":"shannon"}}}"#);
        let opts = VerifyOptions { suite: Suite::Parseval, ..Default::default() };
        let r = verify_system(&s, &opts, "x").unwrap();
        assert!(r.passed);
        assert!(r.checks[0].residual.unwrap() <= 1e-15);
    }

    #[test]
    fn zeroed_filter_fails() {
        let mut s = system(r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":1}}}"#);
        s.zero_wavelet(0, 1).unwrap();
        let r = verify_system(&s, &VerifyOptions::default(), "x").unwrap();
        assert!(!r.passed);
        assert_eq!(r.exit_code(), 1);
        let uep0 = r.checks.iter().find(|c| c.condition == Condition::UepMatrixCondition && c.level == Some(0)).unwrap();
        assert!((uep0.residual.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_parseval_is_skipped() {
        let s = system(
            r#"{"group":{"variant":"euclidean","params":{"dimension":1}},"M_table":[[2,2,2]],"family":{"bspline":{"order":2}}}"#,
        );
        let opts = VerifyOptions { suite: Suite::All, samples: Some(256), trials: 2, ..Default::default() };
        let r = verify_system(&s, &opts, "x").unwrap();
        assert!(r.passed, "{}", r.human_summary());
        assert!(r.checks.iter().any(|c| c.status == Status::Skip));
    }
}
