#include "medregion/llm_bridge.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <regex>
#include <thread>

#include <httplib.h>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"

namespace medregion {

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?)://([^/\s:]+)(:\d+)?(/\S*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::kInvalidArgument, "endpoint URL '" + url + "' is not http(s)://host[:port]/path");
  }
  return {m[1].str() + "://" + m[2].str() + m[3].str(), m[4].matched ? m[4].str() : "/"};
}

Json request_body(const std::string& prompt, const EndpointConfig& cfg) {
  switch (cfg.shape) {
    case EndpointShape::kOpenAICompletions:
      return {{"prompt", prompt}, {"max_tokens", cfg.max_new_tokens}};
    case EndpointShape::kTgi:
      return {{"inputs", prompt}, {"parameters", {{"max_new_tokens", cfg.max_new_tokens}}}};
    case EndpointShape::kMinimal:
      break;
  }
  return {{"prompt", prompt}, {"max_new_tokens", cfg.max_new_tokens}};
}

// Accepts any of the known response shapes regardless of the request shape.
std::string completion_text(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kEmptyCompletion, "response is not JSON");
  }
  if (j.is_array() && !j.empty()) j = j.front();
  if (j.is_object()) {
    if (j.contains("text") && j["text"].is_string()) return j["text"].get<std::string>();
    if (j.contains("generated_text") && j["generated_text"].is_string()) {
      return j["generated_text"].get<std::string>();
    }
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
      const Json& c = j["choices"].front();
      if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
      if (c.contains("message") && c["message"].contains("content") &&
          c["message"]["content"].is_string()) {
        return c["message"]["content"].get<std::string>();
      }
    }
  }
  throw Error(ErrorCode::kEmptyCompletion, "response carries no completion text");
}

bool is_transient_status(int status) { return status == 429 || status >= 500; }

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::Read || e == httplib::Error::Write ||
         e == httplib::Error::ConnectionTimeout;
}

}  // namespace

EndpointShape parse_endpoint_shape(std::string_view name) {
  if (name == "minimal") return EndpointShape::kMinimal;
  if (name == "openai") return EndpointShape::kOpenAICompletions;
  if (name == "tgi") return EndpointShape::kTgi;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown endpoint shape '" + std::string(name) + "' (minimal|openai|tgi)");
}

void EndpointConfig::validate() const {
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0");
  if (retries < 0) throw Error(ErrorCode::kInvalidArgument, "retries must be >= 0");
  if (max_concurrency < 1) throw Error(ErrorCode::kInvalidArgument, "concurrency must be >= 1");
  if (backoff_base_seconds < 0) throw Error(ErrorCode::kInvalidArgument, "backoff must be >= 0");
  parse_url(base_url);
}

std::string api_key_from_env(const std::string& env_var) {
  if (env_var.empty()) return {};
  const char* v = std::getenv(env_var.c_str());
  return v ? std::string(v) : std::string();
}

std::string redact(std::string text, std::string_view secret) {
  if (secret.empty()) return text;
  for (std::size_t pos = text.find(secret); pos != std::string::npos;
       pos = text.find(secret, pos + 3)) {
    text.replace(pos, secret.size(), "***");
  }
  return text;
}

std::string generate_region_report(const PromptBundle& bundle, const EndpointConfig& cfg) {
  cfg.validate();
  const ParsedUrl url = parse_url(cfg.base_url);
  const std::string body = request_body(render_prompt_text(bundle), cfg).dump();
  auto log = [&](const std::string& line) {
    if (cfg.log) cfg.log(redact(line, cfg.api_key));
  };

  httplib::Client client(url.scheme_host_port);
  const auto timeout = std::chrono::duration<double>(cfg.timeout_seconds);
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
  client.set_connection_timeout(sec.count(), usec.count());
  client.set_read_timeout(sec.count(), usec.count());
  client.set_write_timeout(sec.count(), usec.count());
  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

  const int attempts = cfg.retries + 1;
  std::string last_failure;
  bool last_was_timeout = false;
  int last_status = 0;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      const double delay = cfg.backoff_base_seconds * std::pow(2.0, attempt - 2);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    log("POST " + cfg.base_url + " attempt " + std::to_string(attempt) + "/" +
        std::to_string(attempts) + " region " + std::to_string(bundle.region_id) +
        (cfg.api_key.empty() ? "" : " Authorization: Bearer " + cfg.api_key) + " body " +
        std::to_string(body.size()) + " bytes");
    const auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_was_timeout = is_timeout(res.error());
      last_status = 0;
      last_failure = httplib::to_string(res.error());
      log("request failed: " + last_failure);
      continue;
    }
    log("response " + std::to_string(res->status) + " " + std::to_string(res->body.size()) +
        " bytes");
    if (res->status >= 200 && res->status < 300) {
      std::string text = completion_text(res->body);
      if (text.empty()) throw Error(ErrorCode::kEmptyCompletion, "endpoint returned empty text");
      return text;
    }
    last_was_timeout = false;
    last_status = res->status;
    last_failure = "HTTP " + std::to_string(res->status);
    if (!is_transient_status(res->status)) {
      throw Error(ErrorCode::kHttpError,
                  "status " + std::to_string(res->status) + " after " + std::to_string(attempt) +
                      " attempt(s)");
    }
  }
  if (last_was_timeout) {
    throw Error(ErrorCode::kTimeout,
                last_failure + " after " + std::to_string(attempts) + " attempt(s)");
  }
  throw Error(ErrorCode::kHttpError,
              (last_status ? "status " + std::to_string(last_status) : last_failure) + " after " +
                  std::to_string(attempts) + " attempt(s)");
}

std::vector<std::string> generate_reports(const std::vector<PromptBundle>& bundles,
                                          const EndpointConfig& cfg) {
  cfg.validate();
  std::vector<std::string> results(bundles.size());
  std::vector<std::exception_ptr> errors(bundles.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < bundles.size(); i = next++) {
      try {
        results[i] = generate_region_report(bundles[i], cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min(bundles.size(), static_cast<std::size_t>(cfg.max_concurrency));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace medregion
