//! Async client for the annotation service.

use hgml_core::api::{
    ErrorBody, RectangleList, ScoreResponse, SubmitResponse, TaskDescriptor, VerifyResponse,
};
use hgml_core::Rectangle;
use reqwest::Response;
pub use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),

    #[error("server returned {status}: {}", .body.error)]
    Api { status: StatusCode, body: ErrorBody },
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let body = match resp.json::<ErrorBody>().await {
            Ok(body) => body,
            Err(_) => ErrorBody {
                error: status.canonical_reason().unwrap_or("error").to_owned(),
                field: None,
            },
        };
        Err(ClientError::Api { status, body })
    }

    pub async fn task(&self, worker: Option<&str>) -> Result<TaskDescriptor> {
        let mut req = self.http.get(format!("{}/task", self.base));
        if let Some(w) = worker {
            req = req.query(&[("worker", w)]);
        }
        Self::decode(req.send().await?).await
    }

    /// Scores rectangles on the validation split without changing the session.
    pub async fn score(&self, session: &str, rects: &[Rectangle]) -> Result<ScoreResponse> {
        let resp = self
            .http
            .post(format!("{}/task/{session}/rectangles", self.base))
            .json(&RectangleList::from_rectangles(rects))
            .send()
            .await?;
        Self::decode(resp).await
    }

    pub async fn submit(&self, session: &str, rects: &[Rectangle]) -> Result<SubmitResponse> {
        let resp = self
            .http
            .post(format!("{}/task/{session}/submit", self.base))
            .json(&RectangleList::from_rectangles(rects))
            .send()
            .await?;
        Self::decode(resp).await
    }

    pub async fn verify(&self, code: &str) -> Result<VerifyResponse> {
        let resp = self
            .http
            .get(format!("{}/codes/verify", self.base))
            .query(&[("code", code)])
            .send()
            .await?;
        Self::decode(resp).await
    }
}
