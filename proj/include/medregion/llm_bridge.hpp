#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "medregion/prompt.hpp"

namespace medregion {

// Request/response shapes understood by the client.
enum class EndpointShape {
  kMinimal,            // {"prompt","max_new_tokens"} -> {"text"}
  kOpenAICompletions,  // {"prompt","max_tokens"} -> {"choices":[{"text"}]}
  kTgi,                // {"inputs","parameters":{"max_new_tokens"}} -> {"generated_text"}
};

EndpointShape parse_endpoint_shape(std::string_view name);

struct EndpointConfig {
  std::string base_url;  // full URL of the generation endpoint
  std::string api_key;   // taken from the environment, never from flags or files
  double timeout_seconds = 60.0;
  int max_new_tokens = 512;
  int retries = 2;
  double backoff_base_seconds = 1.0;  // retry k waits base * 2^(k-1)
  int max_concurrency = 2;
  EndpointShape shape = EndpointShape::kMinimal;
  // Receives one line per request and response, secrets already redacted.
  std::function<void(std::string_view)> log;

  // Throws InvalidArgument unless timeout > 0, retries >= 0 and the URL parses.
  void validate() const;
};

// Reads the key from the environment variable `env_var` (empty if unset).
std::string api_key_from_env(const std::string& env_var);

// Replaces every occurrence of `secret` in `text` with "***".
std::string redact(std::string text, std::string_view secret);

// Sends the text rendering of the bundle and returns the completion.
// Transient failures (connection errors, 429, 5xx) are retried with
// exponential backoff. Throws Timeout, HttpError (with the attempt count) or
// EmptyCompletion.
std::string generate_region_report(const PromptBundle& bundle, const EndpointConfig& cfg);

// Runs the bundles with at most cfg.max_concurrency requests in flight;
// results keep the input order. The first failure is rethrown.
std::vector<std::string> generate_reports(const std::vector<PromptBundle>& bundles,
                                          const EndpointConfig& cfg);

}  // namespace medregion
