use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;

use super::delivery::{MailProvider, ProviderError, ProviderResponse, SendRequest};

/// JSON relay client: `POST {base_url}/send` with a bearer key.
pub struct HttpProvider {
    client: Client,
    base_url: String,
    api_key: String,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client configuration is static");
        HttpProvider {
            client,
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key: api_key.into(),
        }
    }

    /// Reads `PROVIDER_BASE_URL` and `PROVIDER_API_KEY`.
    pub fn from_env() -> Option<Self> {
        let base = std::env::var("PROVIDER_BASE_URL").ok()?;
        let key = std::env::var("PROVIDER_API_KEY").ok()?;
        Some(Self::new(base, key, Duration::from_secs(30)))
    }
}

impl MailProvider for HttpProvider {
    fn send(&mut self, request: &SendRequest) -> Result<ProviderResponse, ProviderError> {
        let resp = self
            .client
            .post(format!("{}/send", self.base_url))
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(ProviderError::Auth(format!("provider returned {status}")));
        }
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Err(ProviderError::Transient(format!("provider returned {status}")));
        }
        resp.json::<ProviderResponse>()
            .map_err(|e| ProviderError::Transient(format!("unreadable provider response: {e}")))
    }
}
