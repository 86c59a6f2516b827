//! Minimal blocking JSON-over-HTTP helper shared by the remote clients.

use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone)]
pub(crate) struct JsonClient {
    agent: ureq::Agent,
}

impl JsonClient {
    pub(crate) fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient { agent }
    }

    /// POST a JSON body; returns the status code and raw response text.
    pub(crate) fn post(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &impl Serialize,
    ) -> Result<(u16, String)> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Error::transport(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::transport(format!("reading response from {url}: {e}")))?;
        Ok((status, text))
    }
}
