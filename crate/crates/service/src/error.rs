use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Error body: `{"error": {"code", "message", "field"?}}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: Inner<'a>,
}

#[derive(Serialize)]
struct Inner<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), field: None }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session '{id}'"))
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "recommendation_running", "a recommendation is already being computed for this session")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    /// Malformed JSON body. Picks the offending field out of serde's message
    /// when it names one.
    pub fn bad_body(e: serde_json::Error) -> Self {
        let msg = e.to_string();
        let field = ["missing field `", "unknown field `"]
            .iter()
            .find_map(|p| msg.split_once(p).and_then(|(_, rest)| rest.split_once('`')).map(|(f, _)| f.to_string()));
        let err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", msg);
        match field {
            Some(f) => err.with_field(f),
            None => err,
        }
    }
}

impl From<abcd::Error> for ApiError {
    fn from(e: abcd::Error) -> Self {
        use abcd::Error as E;
        let unprocessable = |code, field: Option<&str>| {
            let err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string());
            match field {
                Some(f) => err.with_field(f),
                None => err,
            }
        };
        match &e {
            E::TooFewSamples { .. } => unprocessable("too_few_samples", Some("observations")),
            E::ClampMismatch { .. } => unprocessable("clamp_mismatch", Some("values")),
            E::InvalidSample(_) => unprocessable("invalid_sample", None),
            E::DimensionOutOfRange { .. } => unprocessable("dimension_out_of_range", Some("d")),
            E::DimensionMismatch { .. } => unprocessable("dimension_mismatch", None),
            E::InvalidPrior(_) | E::EmptyHypothesisSpace => unprocessable("invalid_prior", Some("prior")),
            E::InvalidDesign(_) | E::OutsideDomain { .. } => unprocessable("invalid_design", Some("design")),
            E::InvalidHyperparams(_) => unprocessable("invalid_model", Some("model")),
            E::InvalidGraph(_) => unprocessable("invalid_graph", None),
            E::GraphNotInUniverse => unprocessable("unknown_graph", Some("graph")),
            E::InvalidEpisode(_) => unprocessable("invalid_config", None),
            E::Parse(_) => unprocessable("invalid_body", None),
            _ => Self::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body { error: Inner { code: self.code, message: &self.message, field: self.field.as_deref() } };
        (self.status, Json(body)).into_response()
    }
}
