//! Drives a `Router` in-process through real HTTP requests.

use anyhow::{bail, Context, Result};
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower::ServiceExt;

const BOUNDARY: &str = "foodwise-sim-boundary";

#[derive(Clone)]
pub struct InProcessClient {
    app: Router,
}

impl InProcessClient {
    pub fn new(app: Router) -> Self {
        Self { app }
    }

    async fn send(&self, req: Request<Body>) -> Result<(StatusCode, Vec<u8>)> {
        let res = self.app.clone().oneshot(req).await.context("router call")?;
        let status = res.status();
        let body = res.into_body().collect().await.context("reading body")?.to_bytes().to_vec();
        Ok((status, body))
    }

    async fn expect<T: DeserializeOwned>(&self, req: Request<Body>, want: StatusCode) -> Result<T> {
        let what = format!("{} {}", req.method(), req.uri());
        let (status, body) = self.send(req).await?;
        if status != want {
            bail!("{what}: expected {want}, got {status}: {}", String::from_utf8_lossy(&body));
        }
        serde_json::from_slice(&body).with_context(|| format!("{what}: decoding response"))
    }

    fn json_request(method: Method, uri: &str, token: Option<&str>, body: &impl Serialize) -> Result<Request<Body>> {
        let mut req = Request::builder().method(method).uri(uri).header(header::CONTENT_TYPE, "application/json");
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        Ok(req.body(Body::from(serde_json::to_vec(body)?))?)
    }

    pub async fn post_json<T: DeserializeOwned>(
        &self,
        uri: &str,
        token: Option<&str>,
        body: &impl Serialize,
        want: StatusCode,
    ) -> Result<T> {
        self.expect(Self::json_request(Method::POST, uri, token, body)?, want).await
    }

    pub async fn post_raw<T: DeserializeOwned>(&self, uri: &str, token: &str, body: Vec<u8>) -> Result<T> {
        let req = Request::post(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .header(header::AUTHORIZATION, format!("Bearer {token}"))
            .body(Body::from(body))?;
        self.expect(req, StatusCode::OK).await
    }

    pub async fn get<T: DeserializeOwned>(&self, uri: &str, token: Option<&str>) -> Result<T> {
        let mut req = Request::get(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        self.expect(req.body(Body::empty())?, StatusCode::OK).await
    }

    /// POSTs a multipart meal record.
    pub async fn submit_record<T: DeserializeOwned>(&self, token: &str, scores: [u8; 3], photo: &[u8], content_type: &str) -> Result<T> {
        let mut body = Vec::with_capacity(photo.len() + 512);
        for (name, value) in ["rice", "meat", "vegetables"].iter().zip(scores) {
            body.extend_from_slice(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes());
        }
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"photo\"; filename=\"meal\"\r\nContent-Type: {content_type}\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(photo);
        body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
        let req = Request::post("/api/records")
            .header(header::AUTHORIZATION, format!("Bearer {token}"))
            .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
            .body(Body::from(body))?;
        self.expect(req, StatusCode::CREATED).await
    }
}
