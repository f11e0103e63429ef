use std::fmt;
use std::path::Path;

use persuade_core::corpus::CorpusError;
use persuade_core::eval::EvalError;
use persuade_core::features::FeatureError;
use persuade_core::predictors::PredictorError;
use persuade_core::sim::SimError;
use persuade_core::trainer::TrainerError;

/// Exit status classes: bad input is 1, anything failing after validation is 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Runtime,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub code: String,
    pub message: String,
}

impl Failure {
    pub fn validation(code: &str, message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Validation,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn runtime(code: &str, message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Runtime,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::runtime("io", format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 1,
            Kind::Runtime => 2,
        }
    }

    /// One `key=value` line; the message is JSON-quoted so it stays on one line.
    pub fn line(&self) -> String {
        let kind = match self.kind {
            Kind::Validation => "validation",
            Kind::Runtime => "runtime",
        };
        format!(
            "error kind={kind} code={} message={}",
            self.code,
            serde_json::to_string(&self.message).expect("string serializes")
        )
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => Failure::runtime("io", e.to_string()),
            _ => Failure::validation("input", e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::validation("simulation", e.to_string())
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        Failure::validation("features", e.to_string())
    }
}

impl From<PredictorError> for Failure {
    fn from(e: PredictorError) -> Self {
        match e {
            PredictorError::Config(_) | PredictorError::EmptyTrainingSet | PredictorError::Checkpoint(_) => {
                Failure::validation("predictor", e.to_string())
            }
            PredictorError::NonFinite { .. } => Failure::runtime("non_finite", e.to_string()),
            PredictorError::Io(_) => Failure::runtime("io", e.to_string()),
        }
    }
}

impl From<TrainerError> for Failure {
    fn from(e: TrainerError) -> Self {
        match e {
            TrainerError::Schedule(_) => Failure::validation("s_r", e.to_string()),
            TrainerError::Predictor(p) => p.into(),
            TrainerError::Sim(s) => s.into(),
            TrainerError::Features(f) => f.into(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::StrategyOverlap(_) => Failure::validation("strategy_overlap", e.to_string()),
            EvalError::DmOverlap(_) => Failure::validation("dm_overlap", e.to_string()),
            EvalError::Predictor(p) => p.into(),
            EvalError::Trainer(t) => t.into(),
            EvalError::Sim(s) => s.into(),
            EvalError::Features(f) => f.into(),
            EvalError::Corpus(c) => c.into(),
            _ => Failure::validation("evaluation", e.to_string()),
        }
    }
}
