//! The five subcommands. Each resolves its configuration, runs the library
//! and returns an [`Outcome`] holding every artifact it produced.

use std::path::Path;

use rug::ops::Pow;
use rug::Float;
use serde::Serialize;
use serde_json::{json, Value};
use twistbad_core::game::{run_game, verify_avoidance, BobStrategy, CurveSpec, GameConfig, GameOptions, GameTranscript, Interval};
use twistbad_core::geometry::{AffineSubspace, LinearSubspace};
use twistbad_core::lattice::{build_lambda, LambdaOptions, LambdaSequence};
use twistbad_core::numeric::{fmt_real, Precision, RealScalar, Weights};
use twistbad_core::quality::{lower_estimate, theta_row_apply, BadnessCertificate, QualityKind, SystemMatrix};
use twistbad_core::transference::{check_q, verify_fact_a, QCheck, TransferenceReport};
use twistbad_core::Error as CoreError;

use crate::config::ExperimentConfig;
use crate::error::{core_exit_code, exit, CliError, StageContext};

/// Everything a command writes, plus its exit status.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub command: &'static str,
    pub status: i32,
    pub notes: Vec<String>,
    pub report: Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    /// Extra files as `(name, contents)`.
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    fn new(command: &'static str, config: &ExperimentConfig, result: Value, status: i32, notes: Vec<String>) -> Self {
        let report = json!({
            "command": command,
            "config": config,
            "notes": notes,
            "result": result,
            "status": status,
        });
        Outcome {
            command,
            status,
            notes,
            report,
            csv_header: Vec::new(),
            csv_rows: Vec::new(),
            extra: Vec::new(),
        }
    }

    fn with_csv(mut self, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.csv_header = header.iter().map(|s| s.to_string()).collect();
        self.csv_rows = rows;
        self
    }

    /// Canonical JSON: sorted keys, two-space indent, trailing newline.
    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("values serialize");
        s.push('\n');
        s
    }

    pub fn csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.csv_header)?;
        for row in &self.csv_rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }

    /// `(file name, contents)` for every artifact.
    pub fn files(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut files = vec![
            (format!("{}.json", self.command), self.json()),
            (format!("{}.csv", self.command), self.csv()?),
        ];
        files.extend(self.extra.iter().cloned());
        Ok(files)
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let io = |source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        for (name, contents) in self.files()? {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Precision, matrix and weights shared by every stage.
pub struct Instance {
    pub prec: Precision,
    pub theta: SystemMatrix,
    pub k: Weights,
}

impl Instance {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let prec = Precision::new(cfg.digits).stage("config")?;
        let theta = SystemMatrix::parse(&cfg.theta, &prec).stage("config")?;
        let k = Weights::parse(&cfg.k, theta.m(), &prec).stage("config")?;
        if k.n() != theta.n() {
            return Err(CliError::Config(format!(
                "{} weights for a matrix with {} rows",
                k.n(),
                theta.n()
            )));
        }
        Ok(Instance { prec, theta, k })
    }

    fn scalar(&self, text: &str) -> Result<Float, CliError> {
        RealScalar::parse(text, &self.prec).map(|s| s.value().clone()).stage("config")
    }

    fn point(&self, literals: &[String]) -> Result<Vec<Float>, CliError> {
        if literals.len() != self.theta.n() {
            return Err(CliError::Config(format!(
                "target has {} coordinates, expected {}",
                literals.len(),
                self.theta.n()
            )));
        }
        literals.iter().map(|s| self.scalar(s)).collect()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("values serialize")
}

fn ints(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}


pub fn cmd_quality(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let inst = Instance::from_config(cfg)?;
    let x = match &cfg.quality.x {
        Some(lits) => Some(inst.point(lits)?),
        None => None,
    };
    let mut certs = Vec::new();
    for &kind in &cfg.quality.kinds {
        let target = if kind == QualityKind::Twisted { x.as_deref() } else { None };
        certs.push(
            lower_estimate(kind, &inst.theta, &inst.k, target, cfg.quality.q_range, &inst.prec).stage("quality")?,
        );
    }
    let rows = certs
        .iter()
        .map(|c| vec![to_value(&c.kind).as_str().unwrap_or_default().to_string(), c.q_range.to_string(), fmt_real(&c.gamma), ints(&c.argmin_q)])
        .collect();
    let out = Outcome::new("quality", cfg, json!({ "certificates": certs }), exit::PASS, Vec::new());
    Ok(out.with_csv(&["kind", "Q", "gamma", "argmin_q"], rows))
}


/// Result of the game stage.
pub struct GameStage {
    pub curve: CurveSpec,
    pub certificate: BadnessCertificate,
    pub transcript: GameTranscript,
    pub avoidance_verified: bool,
    pub status: i32,
    pub notes: Vec<String>,
}

fn curve_from(value: &Value, prec: &Precision) -> Result<CurveSpec, CliError> {
    match value {
        Value::String(name) => CurveSpec::from_name(name, prec).stage("game"),
        Value::Object(_) => CurveSpec::from_json(value, prec).stage("game"),
        other => Err(CliError::Config(format!("curve must be a name or an object, got {other}"))),
    }
}

pub fn game_stage(cfg: &mut ExperimentConfig, inst: &Instance) -> Result<GameStage, CliError> {
    let prec = &inst.prec;
    let params = &cfg.game;
    let curve = curve_from(&params.curve, prec)?;
    let beta = inst.scalar(&params.beta)?;
    let bob: BobStrategy = params.bob.parse().stage("game")?;
    if beta <= 0 || beta >= 1 {
        return Err(CliError::Stage {
            stage: "game",
            source: CoreError::Validation(format!("beta = {} is not in (0, 1)", params.beta)),
        });
    }
    let r_game = GameConfig::game_ratio(&beta, &inst.k);
    let certificate_q = match params.certificate_q {
        Some(q) => q,
        None => {
            let cover = Float::with_val(prec.bits(), (&r_game).pow(params.depth.saturating_sub(1))) * 2u32;
            cover.ceil().to_integer().and_then(|i| i.to_u64()).unwrap_or(u64::MAX)
        }
    };
    let certificate = lower_estimate(QualityKind::Homogeneous, &inst.theta, &inst.k, None, certificate_q, prec).stage("quality")?;
    let b0 = match &params.b0 {
        Some([lo, hi]) => Some(Interval::new(inst.scalar(lo)?, inst.scalar(hi)?).stage("game")?),
        None => None,
    };
    let epsilon = params.epsilon.as_deref().map(|e| inst.scalar(e)).transpose()?;
    let game_cfg = GameConfig::new(&curve, &inst.k, beta, &certificate, b0, epsilon, prec).stage("game")?;
    let opts = GameOptions {
        budget: cfg.budgets.game as u128,
        seed: cfg.seed,
        witness_check: params.witness_check,
    };
    let transcript = run_game(&curve, &inst.theta, &inst.k, &game_cfg, bob, params.depth, &opts, prec).stage("game")?;
    verify_avoidance(&transcript, &curve, &inst.theta, &inst.k).stage("game")?;

    let mut notes = Vec::new();
    let mut status = exit::PASS;
    if !transcript.completed {
        status = exit::BUDGET;
        notes.push(format!(
            "game stopped at depth {} of {}: {}",
            transcript.depth_reached,
            transcript.depth_requested,
            transcript.stop_reason.as_deref().unwrap_or("budget")
        ));
    }
    if !transcript.certificate_covers_run {
        status = worse(status, exit::WARNING);
        notes.push(format!(
            "certificate Q = {} is below 2 R^(S-1); c_hom may not hold for every difference of the run",
            transcript.certificate_q
        ));
    }
    if let Some(check) = &transcript.witness_check {
        if check.estimate.gamma <= 0 {
            status = worse(status, exit::INVARIANT);
            notes.push("witness has zero twisted quality on its checked range".into());
        }
    }
    cfg.game.certificate_q = Some(certificate_q);
    Ok(GameStage {
        curve,
        certificate,
        transcript,
        avoidance_verified: true,
        status,
        notes,
    })
}

fn game_rows(t: &GameTranscript) -> Vec<Vec<String>> {
    t.stages
        .iter()
        .map(|st| {
            let (p, q, dlo, dhi) = match &st.dangerous {
                Some(d) => (ints(&d.p), ints(&d.q), fmt_real(&d.delta.lo), fmt_real(&d.delta.hi)),
                None => Default::default(),
            };
            vec![
                st.s.to_string(),
                fmt_real(&st.b_s.lo),
                fmt_real(&st.b_s.hi),
                st.q_range.0.to_string(),
                st.q_range.1.to_string(),
                p,
                q,
                dlo,
                dhi,
                fmt_real(&st.a_s.lo),
                fmt_real(&st.a_s.hi),
            ]
        })
        .collect()
}

const GAME_HEADER: [&str; 11] = ["s", "b_lo", "b_hi", "q_lo", "q_hi", "p", "q", "delta_lo", "delta_hi", "a_lo", "a_hi"];

pub fn cmd_game(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let inst = Instance::from_config(cfg)?;
    let g = game_stage(cfg, &inst)?;
    let result = json!({
        "avoidance_verified": g.avoidance_verified,
        "certificate": g.certificate,
        "curve": g.curve,
        "transcript": g.transcript,
    });
    let mut out = Outcome::new("game", cfg, result, g.status, g.notes).with_csv(&GAME_HEADER, game_rows(&g.transcript));
    out.extra.push(("game.jsonl".into(), g.transcript.to_jsonl()));
    Ok(out)
}


pub struct LambdaStage {
    pub certificate: BadnessCertificate,
    pub subspace: AffineSubspace,
    pub sequence: LambdaSequence,
    pub r_max_requested: usize,
    pub status: i32,
    pub notes: Vec<String>,
}

pub fn lambda_stage(cfg: &mut ExperimentConfig, inst: &Instance) -> Result<LambdaStage, CliError> {
    let prec = &inst.prec;
    let n = inst.theta.n();
    let subspace = match &cfg.lambda.subspace {
        Some(v) => AffineSubspace::from_json(v, prec).stage("lambda")?,
        None => {
            let basis = (0..n)
                .map(|i| (0..n).map(|j| prec.float(u32::from(i == j))).collect())
                .collect();
            AffineSubspace::through_origin(LinearSubspace::new(n, basis, prec).stage("lambda")?, prec)
        }
    };
    let certificate = lower_estimate(QualityKind::Dual, &inst.theta, &inst.k, None, cfg.lambda.gamma_q, prec).stage("lambda")?;
    let opts = LambdaOptions {
        budget: cfg.budgets.enumeration as u128,
        max_halvings: cfg.lambda.max_halvings,
    };
    let requested = cfg.lambda.r_max;
    let mut r_max = requested;
    let mut notes = Vec::new();
    let sequence = loop {
        match build_lambda(&inst.theta, &inst.k, &subspace, &certificate, r_max, &opts, prec) {
            Ok(seq) => break seq,
            Err(CoreError::BudgetExceeded { needed, budget, .. }) if r_max > 2 => {
                notes.push(format!(
                    "T_{r_max} needs {needed} candidate checks, over the budget {budget}; checks apply to r_max = {}",
                    r_max - 1
                ));
                r_max -= 1;
            }
            Err(e) => return Err(CliError::Stage { stage: "lambda", source: e }),
        }
    };
    let status = if r_max < requested { exit::WARNING } else { exit::PASS };
    cfg.lambda.subspace = Some(subspace.to_json());
    Ok(LambdaStage {
        certificate,
        subspace,
        sequence,
        r_max_requested: requested,
        status,
        notes,
    })
}

fn lambda_rows(seq: &LambdaSequence) -> Vec<Vec<String>> {
    seq.entries
        .iter()
        .map(|e| {
            vec![
                e.r.to_string(),
                fmt_real(&e.scale),
                ints(&e.w.u),
                ints(&e.w.v),
                fmt_real(&e.psi),
                fmt_real(&e.u_tilde_norm),
                fmt_real(&e.u_proj_norm),
                e.big_box_points.to_string(),
                e.checks.iter().all(|c| c.holds).to_string(),
            ]
        })
        .collect()
}

const LAMBDA_HEADER: [&str; 9] = ["r", "T", "u", "v", "psi", "u_tilde_norm", "u_proj_norm", "big_box_points", "checks_hold"];

fn lambda_value(l: &LambdaStage) -> Value {
    json!({
        "certificate": l.certificate,
        "r_max_reached": l.sequence.r_max(),
        "r_max_requested": l.r_max_requested,
        "sequence": l.sequence,
        "subspace": l.subspace.to_json(),
    })
}

pub fn cmd_lambda(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let inst = Instance::from_config(cfg)?;
    let l = lambda_stage(cfg, &inst)?;
    let out = Outcome::new("lambda", cfg, lambda_value(&l), l.status, l.notes.clone());
    Ok(out.with_csv(&LAMBDA_HEADER, lambda_rows(&l.sequence)))
}


/// `x = Theta(q0) mod 1` must fail the chain at `q0`, and its admissible
/// range must end below `|q0|`.
#[derive(Clone, Debug, Serialize)]
pub struct NegativeControl {
    pub q0: Vec<i64>,
    pub x: Vec<String>,
    /// `None` when `c(x)` is not positive at all.
    pub q_admissible: Option<u64>,
    pub at_q0: QCheck,
    pub fails_at_q0: bool,
    pub as_predicted: bool,
}

pub fn negative_control(inst: &Instance, seq: &LambdaSequence, q0: &[i64], budget: u128) -> Result<NegativeControl, CliError> {
    let bits = inst.prec.bits();
    let x = (0..inst.theta.n())
        .map(|i| {
            let v = theta_row_apply(&inst.theta, i, q0)?;
            Ok(Float::with_val(bits, &v - Float::with_val(bits, v.floor_ref())))
        })
        .collect::<Result<Vec<_>, CoreError>>()
        .stage("negative-control")?;
    let q_admissible = match verify_fact_a(&x, seq, &inst.theta, &inst.k, None, budget, &inst.prec) {
        Ok(rep) => Some(rep.q_admissible),
        Err(CoreError::Precondition(_)) => None,
        Err(e) => return Err(CliError::Stage { stage: "negative-control", source: e }),
    };
    let at_q0 = check_q(&x, seq, &inst.theta, &inst.k, q0, &inst.prec).stage("negative-control")?;
    let norm = q0.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    let fails_at_q0 = !at_q0.failures.is_empty();
    let as_predicted = fails_at_q0 && q_admissible.is_none_or(|q| q < norm);
    Ok(NegativeControl {
        q0: q0.to_vec(),
        x: x.iter().map(fmt_real).collect(),
        q_admissible,
        at_q0,
        fails_at_q0,
        as_predicted,
    })
}

fn transfer_status(rep: &TransferenceReport, notes: &mut Vec<String>) -> i32 {
    if !rep.counterexamples.is_empty() {
        notes.push(format!("{} counterexamples to the transference chain", rep.counterexamples.len()));
        exit::INVARIANT
    } else if rep.q_admissible == 0 {
        notes.push("admissible Q range is empty; nothing was verified".into());
        exit::WARNING
    } else if !rep.passed {
        notes.push("transference check did not pass".into());
        exit::INVARIANT
    } else {
        exit::PASS
    }
}

fn transfer_rows(rep: &TransferenceReport) -> Vec<Vec<String>> {
    rep.per_q_r_choices
        .iter()
        .map(|c| vec![c.r.to_string(), c.q_from.to_string(), c.q_to.to_string(), fmt_real(&c.psi_prev), fmt_real(&c.psi_r)])
        .collect()
}

const TRANSFER_HEADER: [&str; 5] = ["r", "q_from", "q_to", "psi_prev", "psi_r"];

/// Verification at `x` plus the optional orbit control.
fn transfer_stage(
    cfg: &ExperimentConfig,
    inst: &Instance,
    lambda: &LambdaStage,
    x: &[Float],
    status: &mut i32,
    notes: &mut Vec<String>,
) -> Result<(Value, Vec<Vec<String>>), CliError> {
    let budget = cfg.budgets.transfer as u128;
    let report = match verify_fact_a(x, &lambda.sequence, &inst.theta, &inst.k, cfg.transfer.q_max, budget, &inst.prec) {
        Ok(r) => r,
        Err(e @ CoreError::RangeExhausted { .. }) => {
            *status = worse(*status, core_exit_code(&e));
            notes.push(e.to_string());
            return Ok((json!({ "negative_control": Value::Null, "report": Value::Null }), Vec::new()));
        }
        Err(e) => return Err(CliError::Stage { stage: "transfer", source: e }),
    };
    *status = worse(*status, transfer_status(&report, notes));
    let control = match &cfg.transfer.negative_control_q {
        Some(q0) => {
            let c = negative_control(inst, &lambda.sequence, q0, budget)?;
            if !c.as_predicted {
                *status = worse(*status, exit::INVARIANT);
                notes.push(format!("orbit point for q0 = {:?} did not fail as predicted", c.q0));
            }
            Some(c)
        }
        None => None,
    };
    let rows = transfer_rows(&report);
    Ok((json!({ "negative_control": control, "report": report }), rows))
}

pub fn cmd_transfer(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let inst = Instance::from_config(cfg)?;
    let lits = cfg
        .transfer
        .x
        .clone()
        .ok_or_else(|| CliError::Config("transfer needs a target x".into()))?;
    let x = inst.point(&lits)?;
    let lambda = lambda_stage(cfg, &inst)?;
    let (mut status, mut notes) = (lambda.status, lambda.notes.clone());
    let (transfer, rows) = transfer_stage(cfg, &inst, &lambda, &x, &mut status, &mut notes)?;
    let result = json!({ "lambda": lambda_value(&lambda), "transfer": transfer });
    Ok(Outcome::new("transfer", cfg, result, status, notes).with_csv(&TRANSFER_HEADER, rows))
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}


/// Certificate, game witness, sequence and transference at the witness.
pub fn cmd_pipeline(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let inst = Instance::from_config(cfg)?;
    let game = game_stage(cfg, &inst)?;
    let lambda = lambda_stage(cfg, &inst)?;
    let mut status = worse(game.status, lambda.status);
    let mut notes: Vec<String> = game.notes.iter().chain(&lambda.notes).cloned().collect();
    let x = game.transcript.witness_point.clone();
    cfg.transfer.x = Some(x.iter().map(fmt_real).collect());
    let (transfer, _) = transfer_stage(cfg, &inst, &lambda, &x, &mut status, &mut notes)?;
    let mut rows: Vec<Vec<String>> = vec![
        vec!["game".into(), game.status.to_string(), format!("witness {}", fmt_real(&game.transcript.witness))],
        vec!["lambda".into(), lambda.status.to_string(), format!("r_max {}", lambda.sequence.r_max())],
    ];
    let summary = match transfer.get("report") {
        Some(Value::Object(r)) => format!(
            "kappa {} Q_admissible {} counterexamples {}",
            r.get("kappa_transfer").map(plain).unwrap_or_default(),
            r.get("Q_admissible").map(plain).unwrap_or_default(),
            r.get("counterexamples").and_then(Value::as_array).map_or(0, Vec::len)
        ),
        _ => "no admissible range".into(),
    };
    rows.push(vec!["transfer".into(), status.to_string(), summary]);
    let result = json!({
        "game": {
            "avoidance_verified": game.avoidance_verified,
            "certificate": game.certificate,
            "curve": game.curve,
            "transcript": game.transcript,
        },
        "lambda": lambda_value(&lambda),
        "transfer": transfer,
    });
    let mut out = Outcome::new("pipeline", cfg, result, status, notes).with_csv(&["stage", "status", "summary"], rows);
    out.extra.push(("game.jsonl".into(), game.transcript.to_jsonl()));
    Ok(out)
}

/// Combines two statuses; invariant beats budget beats warning beats pass.
pub fn worse(a: i32, b: i32) -> i32 {
    let rank = |c: i32| match c {
        exit::INVARIANT => 3,
        exit::BUDGET => 2,
        exit::WARNING => 1,
        _ => 0,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}
