use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SuggestionProvider;
use crate::text::normalize;
use crate::{Error, Result};

/// Accepted suggestion response bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    /// `["s1", "s2", ...]`
    #[default]
    JsonStringArray,
    /// `["echoed query", ["s1", "s2", ...], ...]`, as returned by common autocomplete endpoints.
    JsonNestedArray,
}

impl std::str::FromStr for ResponseFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json_string_array" => Ok(ResponseFormat::JsonStringArray),
            "json_nested_array" => Ok(ResponseFormat::JsonNestedArray),
            other => Err(Error::Config(format!("unknown response format {other:?}"))),
        }
    }
}

impl ResponseFormat {
    pub fn parse(self, body: &str) -> std::result::Result<Vec<String>, String> {
        let value: Value = serde_json::from_str(body).map_err(|e| e.to_string())?;
        let list = match self {
            ResponseFormat::JsonStringArray => &value,
            ResponseFormat::JsonNestedArray => value
                .as_array()
                .filter(|a| a.len() >= 2)
                .map(|a| &a[1])
                .ok_or("expected [query, [suggestions...]]")?,
        };
        let items = list.as_array().ok_or("expected an array of suggestions")?;
        items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(normalize)
                    .ok_or_else(|| format!("non-string suggestion {v}"))
            })
            .filter(|r| !matches!(r, Ok(s) if s.is_empty()))
            .collect()
    }
}

/// Suggestion endpoint queried over HTTP GET.
///
/// `endpoint` must contain a `{query}` slot which receives the URL-encoded query.
/// Consecutive calls are spaced by at least `min_interval`.
pub struct HttpProvider {
    agent: ureq::Agent,
    endpoint: String,
    format: ResponseFormat,
    min_interval: Duration,
    last_call: Mutex<Option<Instant>>,
}

impl HttpProvider {
    pub fn new(endpoint: &str, format: ResponseFormat, min_interval: Duration) -> Result<Self> {
        if !endpoint.contains("{query}") {
            return Err(Error::Config(format!(
                "endpoint {endpoint:?} has no {{query}} slot"
            )));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Ok(HttpProvider {
            agent,
            endpoint: endpoint.to_owned(),
            format,
            min_interval,
            last_call: Mutex::new(None),
        })
    }

    pub fn url_for(&self, query: &str) -> String {
        let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
        self.endpoint.replace("{query}", &encoded)
    }

    fn wait_turn(&self) {
        let mut last = self.last_call.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl SuggestionProvider for HttpProvider {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        let transport = |message: String| Error::Transport {
            query: query.to_owned(),
            message,
        };
        self.wait_turn();
        let mut response = self
            .agent
            .get(&self.url_for(query))
            .call()
            .map_err(|e| transport(e.to_string()))?;
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| transport(e.to_string()))?;
        self.format.parse(&body).map_err(transport)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_array() {
        let got = ResponseFormat::JsonStringArray
            .parse(r#"["How to use a Jigsaw properly?", ""]"#)
            .unwrap();
        assert_eq!(got, ["how to use a jigsaw properly"]);
    }

    #[test]
    fn parses_nested_array() {
        let body =
            r#"["how to use jigsaw", ["how to use jigsaw safely", "jigsaw blades"], [], {"x": 1}]"#;
        let got = ResponseFormat::JsonNestedArray.parse(body).unwrap();
        assert_eq!(got, ["how to use jigsaw safely", "jigsaw blades"]);
    }

    #[test]
    fn rejects_bad_bodies() {
        assert!(ResponseFormat::JsonStringArray.parse("<html>").is_err());
        assert!(ResponseFormat::JsonStringArray
            .parse(r#"{"a": 1}"#)
            .is_err());
        assert!(ResponseFormat::JsonStringArray.parse("[1, 2]").is_err());
        assert!(ResponseFormat::JsonNestedArray
            .parse(r#"["only the query"]"#)
            .is_err());
    }

    #[test]
    fn encodes_query_into_template() {
        let p = HttpProvider::new(
            "http://localhost/s?q={query}&hl=en",
            ResponseFormat::default(),
            Duration::ZERO,
        )
        .unwrap();
        assert_eq!(
            p.url_for("how to use #X# & co"),
            "http://localhost/s?q=how+to+use+%23X%23+%26+co&hl=en"
        );
        assert!(HttpProvider::new(
            "http://localhost/s",
            ResponseFormat::default(),
            Duration::ZERO
        )
        .is_err());
    }
}
