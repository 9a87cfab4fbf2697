//! Completion backends and the batched prediction driver.

use std::collections::BTreeMap;
use std::time::Duration;

use super::prompt::{batch_contexts, build_prompt, PromptLevel, MAX_BATCH};
use super::response::{parse_response, render_predictions};
use super::{BackendConfig, LlmError, LlmPrediction, API_KEY_ENV};
use crate::features::SemanticContext;
use crate::taxonomy::{TagId, TagSet, Taxonomy};

/// One chat-style completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub top_p: f64,
}

/// A completion backend returns the raw response text for a request.
/// Implementations must be callable from multiple submission threads.
pub trait CompletionBackend: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

const SYSTEM_PROMPT: &str =
    "You classify autonomous systems. Follow the response schema exactly.";

/// Chat-completions HTTP backend. The API key comes from the
/// `LINNAEUS_LLM_KEY` environment variable.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn from_env(config: BackendConfig) -> Result<Self, LlmError> {
        let api_key =
            std::env::var(API_KEY_ENV).map_err(|_| LlmError::MissingApiKey(API_KEY_ENV))?;
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: BackendConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        HttpBackend { config, api_key, agent }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": request.model,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        let mut attempts = 0;
        loop {
            let result = self
                .agent
                .post(&self.config.endpoint)
                .header("authorization", &format!("Bearer {}", self.api_key))
                .send_json(&body);
            match result {
                Ok(mut response) => {
                    let value: serde_json::Value = response
                        .body_mut()
                        .read_json()
                        .map_err(|e| LlmError::Backend(e.to_string()))?;
                    let content = value["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            LlmError::Backend("response carries no message content".into())
                        })?;
                    return Ok(content.to_string());
                }
                Err(e) if attempts < self.config.retries => {
                    let _ = e;
                    attempts += 1;
                }
                Err(e) => return Err(LlmError::Backend(e.to_string())),
            }
        }
    }
}

/// Deterministic keyword-table backend for offline runs and CI. It reads the
/// same rendered prompt text the HTTP backend would send and answers in the
/// same response schema: an item receives every tag whose keyword occurs in
/// the item line and which is listed among the prompt's valid labels.
#[derive(Debug, Clone)]
pub struct MockBackend {
    table: BTreeMap<String, TagId>,
}

impl MockBackend {
    pub fn new(table: BTreeMap<String, TagId>) -> Self {
        MockBackend { table }
    }

    pub fn table(&self) -> &BTreeMap<String, TagId> {
        &self.table
    }
}

fn parse_prompt_labels(user: &str) -> TagSet {
    let mut admissible = TagSet::new();
    let mut in_block = false;
    for line in user.lines() {
        if line.starts_with("Valid labels:") {
            in_block = true;
            continue;
        }
        if in_block {
            let Some(rest) = line.strip_prefix("- ") else {
                break;
            };
            let id = rest.split(':').next().unwrap_or(rest).trim();
            if let Ok(tag) = TagId::new(id) {
                admissible.insert(tag);
            }
        }
    }
    admissible
}

fn parse_prompt_items(user: &str) -> Vec<(u32, String)> {
    let mut items = Vec::new();
    let mut in_block = false;
    for line in user.lines() {
        if line.starts_with("Classify the following:") {
            in_block = true;
            continue;
        }
        if in_block {
            let Some((index, rest)) = line.split_once(". asn=") else {
                break;
            };
            if index.parse::<usize>().is_err() {
                break;
            }
            let Some((asn_text, fields)) = rest.split_once(' ') else {
                continue;
            };
            if let Ok(asn) = asn_text.parse::<u32>() {
                items.push((asn, fields.to_lowercase()));
            }
        }
    }
    items
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let admissible = parse_prompt_labels(&request.user);
        let items = parse_prompt_items(&request.user);
        let rendered: Vec<(u32, TagSet)> = items
            .into_iter()
            .map(|(asn, haystack)| {
                let tags: TagSet = self
                    .table
                    .iter()
                    .filter(|(keyword, tag)| {
                        haystack.contains(keyword.as_str()) && admissible.contains(tag)
                    })
                    .map(|(_, tag)| tag.clone())
                    .collect();
                (asn, tags)
            })
            .collect();
        let borrowed: Vec<(u32, &TagSet)> =
            rendered.iter().map(|(asn, tags)| (*asn, tags)).collect();
        Ok(render_predictions(&borrowed, "keyword match"))
    }
}

/// Observable counters for a prediction run.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LlmStats {
    pub batches: usize,
    /// Batches whose first parse failed and were retried once.
    pub parse_retries: usize,
    /// Items left without labels after the retry also failed.
    pub unlabeled_items: usize,
    /// Inadmissible labels dropped during parsing.
    pub dropped_labels: usize,
    /// ASNs whose batch fell back to unlabeled.
    pub failed_asns: Vec<u32>,
}

/// Runs the batched prediction flow: build prompts, submit them (concurrently
/// up to `config.max_parallel`, results re-assembled in input order), parse
/// with one retry, and fall back to unlabeled items when a batch's response
/// stays unparseable.
pub fn predict_tags(
    backend: &dyn CompletionBackend,
    config: &BackendConfig,
    level: &PromptLevel,
    taxonomy: &Taxonomy,
    few_shot: &[(SemanticContext, TagSet)],
    contexts: &[SemanticContext],
) -> Result<(Vec<LlmPrediction>, LlmStats), LlmError> {
    if contexts.is_empty() {
        return Ok((Vec::new(), LlmStats::default()));
    }
    let batches = batch_contexts(contexts, MAX_BATCH);
    let mut requests = Vec::with_capacity(batches.len());
    let mut admissible_sets = Vec::with_capacity(batches.len());
    for batch in &batches {
        let prompt = build_prompt(level, taxonomy, few_shot, batch)?;
        admissible_sets.push(prompt.admissible.iter().map(|(t, _)| t.clone()).collect::<TagSet>());
        requests.push(ChatRequest {
            model: config.model.clone(),
            system: SYSTEM_PROMPT.to_string(),
            user: prompt.rendered,
            temperature: config.temperature,
            top_p: config.top_p,
        });
    }

    // Submit with bounded parallelism; slot indices keep the output ordered.
    let parallel = config.max_parallel.max(1);
    let mut responses: Vec<Option<Result<String, LlmError>>> = Vec::new();
    responses.resize_with(requests.len(), || None);
    for (chunk_start, request_chunk) in requests.chunks(parallel).enumerate().map(|(i, c)| (i * parallel, c)) {
        let results: Vec<Result<String, LlmError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = request_chunk
                .iter()
                .map(|request| scope.spawn(move || backend.complete(request)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("backend thread")).collect()
        });
        for (offset, result) in results.into_iter().enumerate() {
            responses[chunk_start + offset] = Some(result);
        }
    }

    let mut stats = LlmStats { batches: batches.len(), ..Default::default() };
    let mut predictions = Vec::with_capacity(contexts.len());
    for ((batch, admissible), (request, response)) in batches
        .iter()
        .zip(&admissible_sets)
        .zip(requests.iter().zip(responses))
    {
        let expected: Vec<u32> = batch.iter().map(|c| c.asn).collect();
        let text = response.expect("slot filled")?;
        match parse_response(&text, &expected, admissible) {
            Ok(parsed) => {
                stats.dropped_labels += parsed.dropped_labels;
                predictions.extend(parsed.predictions);
            }
            Err(_) => {
                stats.parse_retries += 1;
                let retry_text = backend.complete(request)?;
                match parse_response(&retry_text, &expected, admissible) {
                    Ok(parsed) => {
                        stats.dropped_labels += parsed.dropped_labels;
                        predictions.extend(parsed.predictions);
                    }
                    Err(_) => {
                        stats.unlabeled_items += expected.len();
                        stats.failed_asns.extend_from_slice(&expected);
                        predictions.extend(expected.iter().map(|&asn| LlmPrediction::unlabeled(asn)));
                    }
                }
            }
        }
    }
    Ok((predictions, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::builtin;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn context(asn: u32, name: &str, website: Option<&str>) -> SemanticContext {
        SemanticContext {
            asn,
            as_name: Some(name.to_string()),
            org_name: None,
            as_country: None,
            org_country: None,
            website: website.map(str::to_string),
        }
    }

    fn mock() -> MockBackend {
        let mut table = BTreeMap::new();
        table.insert("ministry".to_string(), TagId::new("government").unwrap());
        table.insert("exchange".to_string(), TagId::new("ixp").unwrap());
        table.insert("judicial".to_string(), TagId::new("government.judicial").unwrap());
        MockBackend::new(table)
    }

    #[test]
    fn mock_labels_by_keyword_lookup() {
        let tax = builtin::default_taxonomy();
        let contexts = vec![
            context(64500, "Ministry of Finance", None),
            context(64501, "Metro Internet Exchange", None),
            context(64502, "Plain Carrier", None),
        ];
        let (predictions, stats) = predict_tags(
            &mock(),
            &BackendConfig::default(),
            &PromptLevel::Top,
            &tax,
            &[],
            &contexts,
        )
        .unwrap();
        assert_eq!(predictions.len(), 3);
        assert_eq!(
            predictions[0].confidences.get(&TagId::new("government").unwrap()),
            Some(&1.0)
        );
        assert_eq!(predictions[1].confidences.get(&TagId::new("ixp").unwrap()), Some(&1.0));
        assert!(predictions[2].confidences.is_empty());
        assert_eq!(stats.unlabeled_items, 0);
        assert_eq!(stats.parse_retries, 0);
    }

    #[test]
    fn mock_respects_the_prompt_level_gate() {
        let tax = builtin::default_taxonomy();
        // Name matches both a top keyword and a sub keyword; at sub level only
        // the admissible sub tag may come back.
        let contexts = vec![context(64500, "Judicial Ministry Branch", None)];
        let (predictions, _) = predict_tags(
            &mock(),
            &BackendConfig::default(),
            &PromptLevel::Sub(TagId::new("government").unwrap()),
            &tax,
            &[],
            &contexts,
        )
        .unwrap();
        let keys: Vec<String> =
            predictions[0].confidences.keys().map(|t| t.to_string()).collect();
        assert_eq!(keys, vec!["government.judicial"]);
    }

    #[test]
    fn empty_context_list_is_empty_output() {
        let tax = builtin::default_taxonomy();
        let (predictions, stats) = predict_tags(
            &mock(),
            &BackendConfig::default(),
            &PromptLevel::Top,
            &tax,
            &[],
            &[],
        )
        .unwrap();
        assert!(predictions.is_empty());
        assert_eq!(stats.batches, 0);
    }

    /// Backend that returns garbage a fixed number of times, then delegates.
    struct FlakyBackend {
        inner: MockBackend,
        garbage_responses: usize,
        calls: AtomicUsize,
    }

    impl CompletionBackend for FlakyBackend {
        fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.garbage_responses {
                Ok("{ not json".to_string())
            } else {
                self.inner.complete(request)
            }
        }
    }

    #[test]
    fn one_parse_failure_triggers_exactly_one_retry() {
        let tax = builtin::default_taxonomy();
        let backend =
            FlakyBackend { inner: mock(), garbage_responses: 1, calls: AtomicUsize::new(0) };
        let contexts = vec![context(1, "Ministry", None)];
        let (predictions, stats) = predict_tags(
            &backend,
            &BackendConfig::default(),
            &PromptLevel::Top,
            &tax,
            &[],
            &contexts,
        )
        .unwrap();
        assert_eq!(stats.parse_retries, 1);
        assert_eq!(stats.unlabeled_items, 0);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
        assert!(!predictions[0].confidences.is_empty());
    }

    #[test]
    fn persistent_garbage_marks_items_unlabeled() {
        let tax = builtin::default_taxonomy();
        let backend =
            FlakyBackend { inner: mock(), garbage_responses: 99, calls: AtomicUsize::new(0) };
        let contexts: Vec<SemanticContext> =
            (0..12).map(|i| context(i + 1, "Ministry", None)).collect();
        let (predictions, stats) = predict_tags(
            &backend,
            &BackendConfig::default(),
            &PromptLevel::Top,
            &tax,
            &[],
            &contexts,
        )
        .unwrap();
        assert_eq!(predictions.len(), 12);
        assert!(predictions.iter().all(|p| p.confidences.is_empty()));
        assert_eq!(stats.unlabeled_items, 12);
        assert_eq!(stats.parse_retries, 2, "one retry per batch of 10 and of 2");
        assert_eq!(backend.calls.load(Ordering::SeqCst), 4);
    }

    /// One-shot HTTP responder that records request bodies.
    fn spawn_chat_server(
        status_sequence: Vec<u16>,
        body: &'static str,
    ) -> (String, std::sync::Arc<std::sync::Mutex<Vec<String>>>) {
        use std::io::{Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let captured = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let captured_clone = captured.clone();
        std::thread::spawn(move || {
            let mut statuses = status_sequence.into_iter();
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let mut buffer = Vec::new();
                let mut chunk = [0u8; 4096];
                let mut content_length = 0usize;
                let mut header_end = 0usize;
                loop {
                    let n = stream.read(&mut chunk).unwrap_or(0);
                    if n == 0 {
                        break;
                    }
                    buffer.extend_from_slice(&chunk[..n]);
                    if header_end == 0 {
                        if let Some(pos) =
                            buffer.windows(4).position(|w| w == b"\r\n\r\n")
                        {
                            header_end = pos + 4;
                            let headers = String::from_utf8_lossy(&buffer[..pos]);
                            for line in headers.lines() {
                                if let Some(v) = line
                                    .to_ascii_lowercase()
                                    .strip_prefix("content-length:")
                                    .map(str::trim)
                                    .and_then(|v| v.parse::<usize>().ok())
                                {
                                    content_length = v;
                                }
                            }
                        }
                    }
                    if header_end > 0 && buffer.len() >= header_end + content_length {
                        break;
                    }
                }
                if header_end > 0 {
                    let body_bytes = &buffer[header_end..];
                    captured_clone
                        .lock()
                        .unwrap()
                        .push(String::from_utf8_lossy(body_bytes).to_string());
                }
                let status = statuses.next().unwrap_or(200);
                let reason = if status == 200 { "OK" } else { "ERR" };
                let payload = if status == 200 { body } else { "{}" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        (format!("http://{addr}"), captured)
    }

    #[test]
    fn http_backend_sends_chat_body_and_extracts_content() {
        const CHAT_RESPONSE: &str = r#"{"choices":[{"message":{"content":"[{\"asn\":1,\"labels\":[],\"rationale\":\"\"}]"}}]}"#;
        let (endpoint, captured) = spawn_chat_server(vec![200], CHAT_RESPONSE);
        let config = BackendConfig {
            endpoint,
            model: "test-model".into(),
            ..Default::default()
        };
        let backend = HttpBackend::with_key(config, "secret-key".into());
        let request = ChatRequest {
            model: "test-model".into(),
            system: "sys".into(),
            user: "user text".into(),
            temperature: 0.0,
            top_p: 1.0,
        };
        let content = backend.complete(&request).unwrap();
        assert!(content.starts_with("[{"));

        let bodies = captured.lock().unwrap();
        let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["top_p"], 1.0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "user text");
    }

    #[test]
    fn http_backend_retries_transient_failures() {
        const CHAT_RESPONSE: &str = r#"{"choices":[{"message":{"content":"ok"}}]}"#;
        let (endpoint, captured) = spawn_chat_server(vec![500, 500, 200], CHAT_RESPONSE);
        let config = BackendConfig { endpoint, retries: 2, ..Default::default() };
        let backend = HttpBackend::with_key(config, "k".into());
        let request = ChatRequest {
            model: String::new(),
            system: String::new(),
            user: String::new(),
            temperature: 0.0,
            top_p: 1.0,
        };
        assert_eq!(backend.complete(&request).unwrap(), "ok");
        assert_eq!(captured.lock().unwrap().len(), 3, "two retries after two 500s");
    }

    #[test]
    fn http_backend_gives_up_after_retry_budget() {
        let (endpoint, _captured) = spawn_chat_server(vec![500; 10], "{}");
        let config = BackendConfig { endpoint, retries: 1, ..Default::default() };
        let backend = HttpBackend::with_key(config, "k".into());
        let request = ChatRequest {
            model: String::new(),
            system: String::new(),
            user: String::new(),
            temperature: 0.0,
            top_p: 1.0,
        };
        assert!(matches!(backend.complete(&request), Err(LlmError::Backend(_))));
    }

    #[test]
    fn mock_prediction_is_pure_across_runs_and_parallelism() {
        let tax = builtin::default_taxonomy();
        let contexts: Vec<SemanticContext> = (0..37)
            .map(|i| {
                context(
                    i + 1,
                    if i % 3 == 0 { "Ministry" } else { "Exchange point" },
                    Some("https://example.net"),
                )
            })
            .collect();
        let serial = BackendConfig { max_parallel: 1, ..Default::default() };
        let wide = BackendConfig { max_parallel: 8, ..Default::default() };
        let (a, _) =
            predict_tags(&mock(), &serial, &PromptLevel::Top, &tax, &[], &contexts).unwrap();
        let (b, _) =
            predict_tags(&mock(), &wide, &PromptLevel::Top, &tax, &[], &contexts).unwrap();
        assert_eq!(a, b);
    }
}
