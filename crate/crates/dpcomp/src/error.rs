use serde::{Deserialize, Serialize};

use crate::api::rational_string;

/// Failure of a request, as reported by both the CLI and the service.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),

    /// No finite `epsilon_g` exists for the requested `delta_g`.
    #[error("{message}")]
    Infeasible { message: String, threshold: String },

    /// The global budget leaves nothing to hand out.
    #[error("{0}")]
    ZeroBudget(String),

    #[error("{0}")]
    TooLarge(String),
}

/// JSON body of an error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::BadRequest(_) => 400,
            ApiError::Infeasible { .. } | ApiError::ZeroBudget(_) => 422,
            ApiError::TooLarge(_) => 413,
        }
    }

    pub fn reason(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Infeasible { .. } => "infeasible_delta",
            ApiError::ZeroBudget(_) => "zero_budget",
            ApiError::TooLarge(_) => "too_large",
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> u8 {
        match self {
            ApiError::Infeasible { .. } | ApiError::ZeroBudget(_) => 2,
            ApiError::BadRequest(_) | ApiError::TooLarge(_) => 1,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: self.to_string(),
            reason: self.reason().to_string(),
            threshold: match self {
                ApiError::Infeasible { threshold, .. } => Some(threshold.clone()),
                _ => None,
            },
        }
    }
}

impl From<dpcomp_core::Error> for ApiError {
    fn from(err: dpcomp_core::Error) -> Self {
        use dpcomp_core::Error;
        match &err {
            Error::InfeasibleDelta { threshold, .. } => ApiError::Infeasible {
                message: err.to_string(),
                threshold: rational_string(threshold),
            },
            Error::EnumerationTooLarge { .. } | Error::TooLarge(_) => ApiError::TooLarge(err.to_string()),
            Error::InvalidParams(_) | Error::InvalidArgument(_) | Error::Parse(_) | Error::NotHomogeneous => {
                ApiError::BadRequest(err.to_string())
            }
        }
    }
}
