//! Text-generation backends.
//!
//! * [`HttpBackend`] speaks the OpenAI-compatible chat-completions protocol,
//!   sending the whole prompt as one user message.
//! * [`MockBackend`] replays completions keyed by the SHA-256 of the prompt,
//!   falling back to the echo summarizer on a miss unless strict.
//! * [`EchoBackend`] is the echo summarizer alone: the first sentence of each
//!   `---`-delimited segment of the prompt payload.
//!
//! Every backend rejects a prompt whose estimate exceeds
//! `context_tokens - max_output_tokens` before doing any work, and caps the
//! returned text at `max_output_tokens` by the chars/4 rule.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::budget::{estimate_tokens, truncate_to_tokens};
use crate::pipeline::{ACTIONABLE_TEMPLATE, SUMMARISE_TEMPLATE};
use crate::text::sha256_hex;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("prompt estimate {estimate} exceeds the {available} tokens left after the output cap")]
    PromptTooLarge { estimate: usize, available: usize },
    #[error("no fixture for prompt digest {digest}")]
    FixtureMiss { digest: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    Protocol(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
}

#[derive(Debug, Error)]
pub enum MockScriptError {
    #[error("cannot read mock script: {0}")]
    Io(#[from] std::io::Error),
    #[error("mock script line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("mock script line {line}: duplicate digest {digest}")]
    DuplicateEntry { line: usize, digest: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_output_tokens: usize,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, max_output_tokens: usize) -> Self {
        Self {
            prompt: prompt.into(),
            max_output_tokens,
            temperature: DEFAULT_TEMPERATURE,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_output_tokens must be > 0".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Local guard run before any backend work.
    pub fn check_fits(&self, context_tokens: usize) -> Result<(), BackendError> {
        self.validate()?;
        let available = context_tokens.saturating_sub(self.max_output_tokens);
        let estimate = estimate_tokens(&self.prompt);
        if estimate > available {
            return Err(BackendError::PromptTooLarge {
                estimate,
                available,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub output_token_estimate: usize,
    pub backend_id: String,
    pub latency_ms: u64,
    /// SHA-256 of the prompt as it was handed to the model.
    pub prompt_digest: String,
}

impl Completion {
    fn capped(
        text: &str,
        request: &GenerationRequest,
        backend_id: &str,
        latency_ms: u64,
        prompt_digest: String,
    ) -> Self {
        let text = truncate_to_tokens(text, request.max_output_tokens).to_string();
        Self {
            output_token_estimate: estimate_tokens(&text),
            text,
            backend_id: backend_id.to_string(),
            latency_ms,
            prompt_digest,
        }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<Completion, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<Completion, BackendError> {
        (**self).generate(request)
    }
}

// ---------------------------------------------------------------------------
// Echo summarizer
// ---------------------------------------------------------------------------

/// Deterministic stand-in model: echoes the first sentence of every segment
/// of the prompt payload.
#[derive(Debug, Clone)]
pub struct EchoBackend {
    context_tokens: usize,
    payload_patterns: Vec<Regex>,
}

impl EchoBackend {
    pub fn new(context_tokens: usize) -> Self {
        Self::with_templates(context_tokens, &[SUMMARISE_TEMPLATE, ACTIONABLE_TEMPLATE])
    }

    /// Recognises prompts rendered from `templates` whose last placeholder
    /// closes the template; that placeholder's value is the payload.
    pub fn with_templates(context_tokens: usize, templates: &[&str]) -> Self {
        let payload_patterns = templates
            .iter()
            .filter_map(|t| payload_pattern(t))
            .collect();
        Self {
            context_tokens,
            payload_patterns,
        }
    }

    pub fn payload<'a>(&self, prompt: &'a str) -> &'a str {
        for re in &self.payload_patterns {
            if let Some(m) = re.captures(prompt).and_then(|c| c.get(1)) {
                return m.as_str();
            }
        }
        prompt
    }

    pub fn summarize(&self, prompt: &str, max_output_tokens: usize) -> String {
        let joined = self
            .payload(prompt)
            .split("---")
            .map(first_sentence)
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        truncate_to_tokens(&joined, max_output_tokens).to_string()
    }
}

fn payload_pattern(template: &str) -> Option<Regex> {
    let placeholder = Regex::new(r"\{[A-Z_]+\}").expect("static regex");
    let last = placeholder.find_iter(template).last()?;
    if last.end() != template.len() {
        return None;
    }
    let mut pattern = String::from("^");
    let mut cursor = 0;
    for m in placeholder.find_iter(template) {
        pattern.push_str(&regex::escape(&template[cursor..m.start()]));
        if m.start() == last.start() {
            pattern.push_str("(?s:(.*))$");
        } else {
            pattern.push_str("(?s:.*?)");
        }
        cursor = m.end();
    }
    Regex::new(&pattern).ok()
}

/// Leading sentence of a trimmed segment: up to and including the first
/// `.`, `!` or `?` that is followed by whitespace or the end.
pub fn first_sentence(segment: &str) -> &str {
    let segment = segment.trim();
    let mut chars = segment.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                None => return segment,
                Some((_, next)) if next.is_whitespace() => return &segment[..i + c.len_utf8()],
                _ => {}
            }
        }
    }
    segment
}

impl Backend for EchoBackend {
    fn id(&self) -> &str {
        "echo"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Completion, BackendError> {
        request.check_fits(self.context_tokens)?;
        let text = self.summarize(&request.prompt, request.max_output_tokens);
        Ok(Completion::capped(
            &text,
            request,
            self.id(),
            0,
            sha256_hex(&request.prompt),
        ))
    }
}

// ---------------------------------------------------------------------------
// Fixture replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockScript {
    /// Prompt SHA-256 (lowercase hex) to completion text.
    pub entries: BTreeMap<String, String>,
    /// Fail on a miss instead of falling back to the echo summarizer.
    pub strict: bool,
}

fn is_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn escape_completion(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_completion(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

impl MockScript {
    pub fn insert_prompt(&mut self, prompt: &str, completion: impl Into<String>) {
        self.entries.insert(sha256_hex(prompt), completion.into());
    }

    pub fn parse(source: &str) -> Result<Self, MockScriptError> {
        let mut script = Self::default();
        for (i, line) in source.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (digest, completion) =
                line.split_once('\t')
                    .ok_or_else(|| MockScriptError::MalformedLine {
                        line: line_no,
                        reason: "expected `<sha256hex>\\t<completion>`".into(),
                    })?;
            if !is_digest(digest) {
                return Err(MockScriptError::MalformedLine {
                    line: line_no,
                    reason: format!("`{digest}` is not 64 lowercase hex characters"),
                });
            }
            if script.entries.contains_key(digest) {
                return Err(MockScriptError::DuplicateEntry {
                    line: line_no,
                    digest: digest.to_string(),
                });
            }
            script
                .entries
                .insert(digest.to_string(), unescape_completion(completion));
        }
        Ok(script)
    }

    pub fn to_file_string(&self) -> String {
        self.entries
            .iter()
            .map(|(d, c)| format!("{d}\t{}\n", escape_completion(c)))
            .collect()
    }
}

pub fn load_mock_script(path: &Path) -> Result<MockScript, MockScriptError> {
    MockScript::parse(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    context_tokens: usize,
    echo: EchoBackend,
}

impl MockBackend {
    pub fn new(script: MockScript, context_tokens: usize) -> Self {
        Self {
            script,
            context_tokens,
            echo: EchoBackend::new(context_tokens),
        }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Completion, BackendError> {
        request.check_fits(self.context_tokens)?;
        let digest = sha256_hex(&request.prompt);
        let text = match self.script.entries.get(&digest) {
            Some(text) => text.clone(),
            None if self.script.strict => return Err(BackendError::FixtureMiss { digest }),
            None => self
                .echo
                .summarize(&request.prompt, request.max_output_tokens),
        };
        Ok(Completion::capped(&text, request, self.id(), 0, digest))
    }
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full chat-completions endpoint, e.g. `http://localhost:8000/v1/chat/completions`.
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub context_tokens: usize,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>, context_tokens: usize) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            context_tokens,
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }

    /// Reads the API key from the environment variable `var`.
    pub fn with_api_key_env(mut self, var: &str) -> Result<Self, BackendError> {
        let key = std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.to_string()))?;
        self.api_key = Some(key);
        Ok(self)
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn request_body(&self, request: &GenerationRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn send_once(&self, body: &Value) -> Result<reqwest::blocking::Response, reqwest::Error> {
        let mut builder = self.client.post(&self.config.url).json(body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        builder.send()
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.config.model
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Completion, BackendError> {
        request.check_fits(self.config.context_tokens)?;
        let body = self.request_body(request);
        let sent_prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
        let digest = sha256_hex(sent_prompt);
        debug_assert_eq!(digest, sha256_hex(&request.prompt));
        log::debug!("chat completion request prompt_sha256={digest}");

        let started = Instant::now();
        let mut backoff = self.config.initial_backoff;
        let attempts = self.config.max_attempts.max(1);
        let mut attempt = 0;
        let response = loop {
            attempt += 1;
            match self.send_once(&body) {
                Ok(resp) => break resp,
                Err(e) if attempt < attempts => {
                    log::warn!("transport error (attempt {attempt}/{attempts}): {e}");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                Err(e) => {
                    return Err(BackendError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
            }
        };

        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport {
            attempts: attempt,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(BackendError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let content = parsed["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Protocol("missing choices[0].message.content".into()))?;
        let latency = started.elapsed().as_millis() as u64;
        Ok(Completion::capped(
            content,
            request,
            self.id(),
            latency,
            digest,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn mock_table_lookup() {
        let mut script = MockScript::default();
        script.insert_prompt("P", "ok");
        let backend = MockBackend::new(script, 4096);
        let c = backend.generate(&GenerationRequest::new("P", 10)).unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(c.output_token_estimate, 1);
        assert_eq!(c.backend_id, "mock");
    }

    #[test]
    fn strict_miss_is_error() {
        let script = MockScript {
            strict: true,
            ..Default::default()
        };
        let backend = MockBackend::new(script, 4096);
        assert!(matches!(
            backend.generate(&GenerationRequest::new("P", 10)),
            Err(BackendError::FixtureMiss { .. })
        ));
    }

    #[test]
    fn echo_rule_on_three_segments() {
        // Worked by hand: segment firsts are "Great course.", "Too much work!" and
        // "Exams were fair" (no terminator, whole segment).
        let prompt = "Summarise, to a maximum of 128 tokens this text that is based on course evaluations: \
                      Great course. Loved it.\n---\nToo much work! Slides ok.\n---\nExams were fair";
        let backend = MockBackend::new(MockScript::default(), 4096);
        let c = backend
            .generate(&GenerationRequest::new(prompt, 128))
            .unwrap();
        assert_eq!(c.text, "Great course. Too much work! Exams were fair");

        // truncated to 3 tokens = 12 chars
        let c = backend
            .generate(&GenerationRequest::new(prompt, 3))
            .unwrap();
        assert_eq!(c.text, "Great course");
        assert!(c.output_token_estimate <= 3);
    }

    #[test]
    fn echo_payload_for_actionable_prompt() {
        let echo = EchoBackend::new(4096);
        let prompt =
            ACTIONABLE_TEMPLATE.replace("{SUMMARISATION}", "Students liked labs. Exams hard.");
        assert_eq!(echo.payload(&prompt), "Students liked labs. Exams hard.");
        assert_eq!(echo.summarize(&prompt, 100), "Students liked labs.");
        // unknown prompt shapes echo the whole prompt
        assert_eq!(echo.payload("free prompt"), "free prompt");
    }

    #[test]
    fn first_sentence_rules() {
        assert_eq!(first_sentence("  v1.2 is out. Next "), "v1.2 is out.");
        assert_eq!(first_sentence("no stop"), "no stop");
        assert_eq!(first_sentence("Ends here."), "Ends here.");
        assert_eq!(first_sentence("   "), "");
    }

    #[test]
    fn oversized_prompt_rejected_locally() {
        let backend = EchoBackend::new(100);
        let prompt = "x".repeat(400); // 100 tokens
        assert!(matches!(
            backend.generate(&GenerationRequest::new(prompt, 1)),
            Err(BackendError::PromptTooLarge {
                estimate: 100,
                available: 99
            })
        ));
        assert!(matches!(
            backend.generate(&GenerationRequest::new("", 1)),
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn script_parse_and_round_trip() {
        let mut script = MockScript::default();
        script.insert_prompt("a", "line one\nline two with \\ backslash\tand tab");
        script.insert_prompt("b", "plain");
        let text = script.to_file_string();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(MockScript::parse(&text).unwrap(), script);
    }

    #[test]
    fn script_errors() {
        let d = sha256_hex("x");
        let dup = format!("{d}\tone\n{d}\ttwo\n");
        assert!(matches!(
            MockScript::parse(&dup),
            Err(MockScriptError::DuplicateEntry { line: 2, .. })
        ));
        assert!(matches!(
            MockScript::parse("nothex\tfoo\n"),
            Err(MockScriptError::MalformedLine { line: 1, .. })
        ));
        let upper = format!("{}\tfoo\n", d.to_uppercase());
        assert!(MockScript::parse(&upper).is_err());
        assert!(matches!(
            MockScript::parse(&format!("\n{d}\n")),
            Err(MockScriptError::MalformedLine { line: 2, .. })
        ));
    }

    /// Serves one canned HTTP response and hands back the raw request.
    fn one_shot_server(
        status: &'static str,
        body: &'static str,
    ) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut content_length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; content_length];
            reader.read_exact(&mut buf).unwrap();
            let reply = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
            format!("{head}{}", String::from_utf8(buf).unwrap())
        });
        (url, handle)
    }

    #[test]
    fn http_backend_speaks_chat_completions() {
        let (url, server) = one_shot_server(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"Feedback text"}}]}"#,
        );
        let mut config = HttpConfig::new(url, "llama-2-7b-chat", 4096);
        config.api_key = Some("secret".into());
        let backend = HttpBackend::new(config).unwrap();
        let mut request = GenerationRequest::new("Prompt with ünïcode", 200);
        request.seed = Some(7);
        let c = backend.generate(&request).unwrap();
        assert_eq!(c.text, "Feedback text");
        assert_eq!(c.prompt_digest, sha256_hex("Prompt with ünïcode"));

        let raw = server.join().unwrap();
        assert!(raw
            .to_ascii_lowercase()
            .contains("authorization: bearer secret"));
        let body: Value = serde_json::from_str(raw.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["model"], "llama-2-7b-chat");
        assert_eq!(body["max_tokens"], 200);
        assert_eq!(body["temperature"], 0.2);
        assert_eq!(body["seed"], 7);
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "Prompt with ünïcode");
    }

    #[test]
    fn http_status_error_not_retried() {
        let (url, server) = one_shot_server("400 Bad Request", r#"{"error":"bad"}"#);
        let backend = HttpBackend::new(HttpConfig::new(url, "m", 4096)).unwrap();
        match backend.generate(&GenerationRequest::new("p", 10)) {
            Err(BackendError::Http { status: 400, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        server.join().unwrap();
    }

    #[test]
    fn transport_failure_retries_then_surfaces() {
        // bind then drop to get a port with nothing listening
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let mut config = HttpConfig::new(
            format!("http://127.0.0.1:{port}/v1/chat/completions"),
            "m",
            4096,
        );
        config.initial_backoff = Duration::from_millis(5);
        let backend = HttpBackend::new(config).unwrap();
        match backend.generate(&GenerationRequest::new("p", 10)) {
            Err(BackendError::Transport { attempts: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_api_key_env() {
        let r = HttpConfig::new("http://x", "m", 10).with_api_key_env("LECTERN_TEST_UNSET_KEY_VAR");
        assert!(matches!(r, Err(BackendError::MissingApiKey(_))));
    }
}
