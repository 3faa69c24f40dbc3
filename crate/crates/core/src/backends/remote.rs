//! HTTP client for a model server.
//!
//! Wire protocol, JSON bodies throughout:
//!
//! | request                         | response                                   |
//! |---------------------------------|--------------------------------------------|
//! | `POST /v1/values {input}`       | `{raw}`                                    |
//! | `POST /v1/estimate {input}`     | `{p_correct, p_incomplete, p_incorrect}`   |
//! | `POST /v1/slot {input}`         | `{domain_slot}`                            |
//! | `GET /v1/health`                | `{status: "ok", model}`                    |
//!
//! Non-2xx answers are backend errors. Transport failures and 5xx/429 are
//! retried with exponential backoff; in-flight requests are capped per client.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::error::{Error, Result};
use crate::prompting::{EstimatorInput, GeneratorInput};
use crate::statecore::{decode_values, TurnRef, ValueSet};

use super::{Backend, EstimatorVerdict, Health};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n + 1`, for `n >= 1`.
    pub fn backoff(&self, n: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(n.saturating_sub(1))
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("limiter poisoned");
        while *available == 0 {
            available = self.freed.wait(available).expect("limiter poisoned");
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("limiter poisoned") += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize)]
struct InputBody<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct ValuesResponse {
    raw: String,
}

#[derive(Deserialize)]
struct SlotResponse {
    domain_slot: String,
}

#[derive(Deserialize)]
struct HealthResponse {
    status: String,
    #[serde(default)]
    model: String,
}

enum Failure {
    Retryable(String),
    Fatal(String),
    Protocol(String),
}

pub struct RemoteBackend {
    base: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("base", &self.base)
            .field("retry", &self.retry)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(
        endpoint: &str,
        timeout: Duration,
        max_concurrency: usize,
        retry: RetryPolicy,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: endpoint.trim_end_matches('/').to_string(),
            agent,
            retry,
            limiter: Limiter::new(max_concurrency.max(1)),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn classify(err: ureq::Error) -> Failure {
        use ureq::Error as E;
        match err {
            E::Io(_)
            | E::Timeout(_)
            | E::ConnectionFailed
            | E::HostNotFound
            | E::BodyStalled
            | E::Protocol(_) => Failure::Retryable(err.to_string()),
            E::Json(e) => Failure::Protocol(format!("malformed response body: {e}")),
            other => Failure::Fatal(other.to_string()),
        }
    }

    fn attempt<T: DeserializeOwned>(&self, path: &str, input: Option<&str>) -> Result<T, Failure> {
        let url = format!("{}{path}", self.base);
        let _permit = self.limiter.acquire();
        let response = match input {
            Some(input) => self.agent.post(&url).send_json(InputBody { input }),
            None => self.agent.get(&url).call(),
        };
        let mut response = response.map_err(Self::classify)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let msg = format!("{url} answered HTTP {status}");
            return Err(if status >= 500 || status == 429 {
                Failure::Retryable(msg)
            } else {
                Failure::Fatal(msg)
            });
        }
        response.body_mut().read_json::<T>().map_err(|e| match e {
            ureq::Error::Json(e) => {
                Failure::Protocol(format!("malformed response from {url}: {e}"))
            }
            other => Self::classify(other),
        })
    }

    fn call<T: DeserializeOwned>(
        &self,
        path: &str,
        input: Option<&str>,
        turn: &TurnRef,
    ) -> Result<T> {
        let mut last = String::new();
        for n in 1..=self.retry.attempts.max(1) {
            if n > 1 {
                thread::sleep(self.retry.backoff(n - 1));
            }
            match self.attempt(path, input) {
                Ok(v) => return Ok(v),
                Err(Failure::Retryable(msg)) => {
                    debug!(%turn, attempt = n, error = %msg, "retrying backend call");
                    last = msg;
                }
                Err(Failure::Fatal(message)) => {
                    return Err(Error::Backend {
                        turn: turn.clone(),
                        message,
                    })
                }
                Err(Failure::Protocol(message)) => {
                    return Err(Error::Protocol {
                        turn: turn.clone(),
                        message,
                    })
                }
            }
        }
        Err(Error::Backend {
            turn: turn.clone(),
            message: format!(
                "{} gave up after {} attempts: {last}",
                self.base, self.retry.attempts
            ),
        })
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> String {
        format!("remote({})", self.base)
    }

    fn generate_values(&self, input: &GeneratorInput, turn: &TurnRef) -> Result<ValueSet> {
        let resp: ValuesResponse = self.call("/v1/values", Some(&input.text), turn)?;
        Ok(decode_values(&resp.raw))
    }

    fn estimate_values(
        &self,
        input: &EstimatorInput,
        _candidate: &ValueSet,
        turn: &TurnRef,
    ) -> Result<EstimatorVerdict> {
        let verdict: EstimatorVerdict = self.call("/v1/estimate", Some(&input.text), turn)?;
        verdict.check().map_err(|message| Error::Protocol {
            turn: turn.clone(),
            message: format!("verdict violates simplex: {message}"),
        })?;
        Ok(verdict)
    }

    fn generate_slot(&self, forward_prompt: &str, _value: &str, turn: &TurnRef) -> Result<String> {
        let resp: SlotResponse = self.call("/v1/slot", Some(forward_prompt), turn)?;
        Ok(resp.domain_slot.trim().to_string())
    }

    fn health_check(&self) -> Health {
        let probe = TurnRef::new("health", 0);
        match self.call::<HealthResponse>("/v1/health", None, &probe) {
            Ok(h) if h.status == "ok" => Health::Healthy { model: h.model },
            Ok(h) => Health::Degraded {
                cause: format!("status {:?}", h.status),
            },
            Err(e) => Health::Degraded {
                cause: e.to_string(),
            },
        }
    }
}
