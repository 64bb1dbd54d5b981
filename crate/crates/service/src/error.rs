use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use synroute_core::chem::SmilesError;
use synroute_core::corpus::CorpusError;
use synroute_core::extraction::{ConversionError, ExtractionError};
use synroute_core::projection::ProjectionError;
use synroute_core::ranking::RankingError;
use synroute_core::route::{RecordError, RouteError};

/// JSON error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                details: Value::Null,
            },
        }
    }

    pub fn with_details(mut self, details: Value) -> ApiError {
        self.body.details = details;
        self
    }

    pub fn not_found(code: &str, what: impl std::fmt::Display) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, code, format!("{what} not found"))
    }

    pub fn unprocessable(code: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn code(&self) -> &str {
        &self.body.code
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.body.code, self.body.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn smiles_code(e: &SmilesError) -> &'static str {
    match e {
        SmilesError::EmptyInput => "EmptyInput",
        SmilesError::UnmatchedRing { .. } => "UnmatchedRing",
        SmilesError::UnbalancedParen { .. } => "UnbalancedParen",
        SmilesError::UnknownAtomSymbol { .. } => "UnknownAtomSymbol",
        SmilesError::UnexpectedCharacter { .. } => "UnexpectedCharacter",
        SmilesError::DanglingBond { .. } => "DanglingBond",
        SmilesError::DuplicateBond { .. } => "DuplicateBond",
        SmilesError::SelfBond { .. } => "SelfBond",
        SmilesError::ConflictingRingBond { .. } => "ConflictingRingBond",
    }
}

impl From<SmilesError> for ApiError {
    fn from(e: SmilesError) -> Self {
        ApiError::unprocessable(smiles_code(&e), e.to_string())
    }
}

impl From<RouteError> for ApiError {
    fn from(e: RouteError) -> Self {
        let msg = e.to_string();
        match e {
            RouteError::ParentNotFound(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "ParentNotFound", msg).with_details(json!({ "node": id }))
            }
            RouteError::NodeNotFound(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "NodeNotFound", msg).with_details(json!({ "node": id }))
            }
            RouteError::ReactantMismatch {
                parent,
                expected,
                found,
            } => ApiError::conflict("ReactantMismatch", msg).with_details(json!({
                "parent": parent,
                "expected": expected,
                "found": found,
            })),
            RouteError::CannotRemoveRoot => ApiError::conflict("CannotRemoveRoot", msg),
            RouteError::RootHasNoProduct => ApiError::conflict("RootHasNoProduct", msg),
            RouteError::ComparisonFull => ApiError::conflict("ComparisonFull", msg),
        }
    }
}

impl From<RankingError> for ApiError {
    fn from(e: RankingError) -> Self {
        match e {
            RankingError::EmptyInput => ApiError::unprocessable("EmptyInput", e.to_string()),
            RankingError::InvalidWeights { .. } => ApiError::unprocessable("InvalidWeights", e.to_string()),
        }
    }
}

impl From<RecordError> for ApiError {
    fn from(e: RecordError) -> Self {
        let code = match e {
            RecordError::InvalidYield(_) => "InvalidYield",
            RecordError::InvalidDuration(_) => "InvalidDuration",
            RecordError::InvalidTier(_) => "InvalidTier",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<ProjectionError> for ApiError {
    fn from(e: ProjectionError) -> Self {
        let code = match &e {
            ProjectionError::TooFewPoints(_) => "TooFewPoints",
            ProjectionError::BadPerplexity { .. } => "BadPerplexity",
            ProjectionError::BadParams(_) => "BadParams",
            ProjectionError::Canceled => "Canceled",
            ProjectionError::Embedding(_) => "EmbeddingFailed",
            _ => "ProjectionFailed",
        };
        let status = match e {
            ProjectionError::TooFewPoints(_)
            | ProjectionError::BadPerplexity { .. }
            | ProjectionError::BadParams(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ProjectionError::Canceled => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let msg = e.to_string();
        match e {
            CorpusError::InvalidQuery(s) => s.into(),
            CorpusError::ProviderUnavailable(_) => ApiError::new(StatusCode::BAD_GATEWAY, "ProviderUnavailable", msg),
            CorpusError::FullTextUnavailable { .. } => ApiError::unprocessable("FullTextUnavailable", msg),
            CorpusError::ExtractionFailed { .. } => ApiError::unprocessable("ExtractionFailed", msg),
            _ => ApiError::internal(msg),
        }
    }
}

impl From<ExtractionError> for ApiError {
    fn from(e: ExtractionError) -> Self {
        let msg = e.to_string();
        match e {
            ExtractionError::MalformedAfterRetries { attempts, .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "MalformedAfterRetries", msg)
                    .with_details(json!({ "attempts": attempts }))
            }
            ExtractionError::ProviderUnavailable(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "ProviderUnavailable", msg)
            }
            ExtractionError::EmptyDocument => ApiError::unprocessable("EmptyDocument", msg),
            ExtractionError::MissingQuery => ApiError::unprocessable("MissingQuery", msg),
            _ => ApiError::internal(msg),
        }
    }
}

impl From<ConversionError> for ApiError {
    fn from(e: ConversionError) -> Self {
        let msg = e.to_string();
        match e {
            ConversionError::NotFound => ApiError::unprocessable("ExtractionNotFound", msg),
            ConversionError::UnparseableMolecule(field) => {
                ApiError::unprocessable("UnparseableMolecule", msg).with_details(json!({ "field": field }))
            }
            ConversionError::MissingYield => ApiError::unprocessable("MissingYield", msg),
            ConversionError::MissingDuration => ApiError::unprocessable("MissingDuration", msg),
            ConversionError::Record(r) => r.into(),
        }
    }
}
