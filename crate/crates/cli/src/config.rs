//! Experiment configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twistbad_core::game::DEFAULT_GAME_BUDGET;
use twistbad_core::lattice::DEFAULT_BUDGET;
use twistbad_core::quality::QualityKind;
use twistbad_core::transference::DEFAULT_Q_BUDGET;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Working precision in decimal digits.
    pub digits: u32,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Not echoed, so artifacts do not depend on where they are written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Rows split by `;`, entries by `,`.
    pub theta: String,
    pub k: Vec<String>,
    pub budgets: Budgets,
    pub quality: QualityParams,
    pub game: GameParams,
    pub lambda: LambdaParams,
    pub transfer: TransferParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            digits: 50,
            seed: 0,
            threads: None,
            out: None,
            theta: "phi".into(),
            k: vec!["1".into()],
            budgets: Budgets::default(),
            quality: QualityParams::default(),
            game: GameParams::default(),
            lambda: LambdaParams::default(),
            transfer: TransferParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Candidate checks per parallelepiped enumeration.
    pub enumeration: u64,
    /// `q` values scanned over a whole game.
    pub game: u64,
    /// `q` values checked by the transference verifier.
    pub transfer: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            enumeration: DEFAULT_BUDGET as u64,
            game: DEFAULT_GAME_BUDGET as u64,
            transfer: DEFAULT_Q_BUDGET as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityParams {
    pub kinds: Vec<QualityKind>,
    #[serde(rename = "Q")]
    pub q_range: u64,
    /// Target for the twisted functional.
    pub x: Option<Vec<String>>,
}

impl Default for QualityParams {
    fn default() -> Self {
        QualityParams {
            kinds: vec![QualityKind::Homogeneous],
            q_range: 1000,
            x: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameParams {
    /// A builtin name or a curve object.
    pub curve: serde_json::Value,
    pub beta: String,
    pub depth: u32,
    pub bob: String,
    /// `Q` of the homogeneous certificate; `ceil(2 R^(S-1))` when absent.
    pub certificate_q: Option<u64>,
    pub b0: Option<[String; 2]>,
    pub epsilon: Option<String>,
    pub witness_check: bool,
}

impl Default for GameParams {
    fn default() -> Self {
        GameParams {
            curve: serde_json::Value::String("identity".into()),
            beta: "1/2".into(),
            depth: 5,
            bob: "center".into(),
            certificate_q: None,
            b0: None,
            epsilon: None,
            witness_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaParams {
    /// Subspace object; the whole space when absent.
    pub subspace: Option<serde_json::Value>,
    /// `Q` of the dual certificate.
    pub gamma_q: u64,
    pub r_max: usize,
    pub max_halvings: u32,
}

impl Default for LambdaParams {
    fn default() -> Self {
        LambdaParams {
            subspace: None,
            gamma_q: 1000,
            r_max: 3,
            max_halvings: 40,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    /// Target point; the pipeline uses the game witness instead.
    pub x: Option<Vec<String>>,
    pub q_max: Option<u64>,
    /// `q0` of the orbit-point control `x = Theta(q0) mod 1`.
    pub negative_control_q: Option<Vec<i64>>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}
