#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "medregion/error.hpp"
#include "medregion/llm_bridge.hpp"

using namespace medregion;

namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class MockServer {
 public:
  explicit MockServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/generate", [this, handler](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        requests_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      const int now = ++in_flight_;
      int seen = max_in_flight_.load();
      while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
      }
      handler(req, res);
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/generate"; }
  std::size_t count() {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_.size();
  }
  Json request(std::size_t i) {
    std::lock_guard<std::mutex> lock(mu_);
    return Json::parse(requests_.at(i));
  }
  std::string auth(std::size_t i) {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_.at(i);
  }
  int max_in_flight() const { return max_in_flight_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> requests_;
  std::vector<std::string> auth_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

PromptBundle bundle(int region) {
  auto seq = std::make_shared<TokenSequence>();
  seq->study_id = "s";
  seq->global = Matrix(2, 3);
  seq->region = Matrix(2, 3);
  SegmentationTokenSet seg;
  seg.study_id = "s";
  for (int r = 1; r <= 6; ++r) seg.entries.push_back({r, {0.f, 0.f, 0.f}, {0.f, 0.f, 0.f}, false});
  return build_prompt(seq, seg, "Organ volumes: none reported.\nLesions: none reported.", region);
}

EndpointConfig config(const std::string& url) {
  EndpointConfig cfg;
  cfg.base_url = url;
  cfg.timeout_seconds = 5.0;
  cfg.backoff_base_seconds = 0.01;
  return cfg;
}

void json_reply(httplib::Response& res, const Json& j) { res.set_content(j.dump(), "application/json"); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("echo endpoint returns the serialized prompt text") {
  MockServer srv([](const httplib::Request& req, httplib::Response& res) {
    json_reply(res, {{"text", Json::parse(req.body)["prompt"]}});
  });
  auto cfg = config(srv.url());
  cfg.max_new_tokens = 77;
  const auto b = bundle(3);
  CHECK(generate_region_report(b, cfg) == render_prompt_text(b));
  const Json sent = srv.request(0);
  CHECK(sent["max_new_tokens"] == 77);
  CHECK(sent.size() == 2);
  CHECK(srv.auth(0).empty());
}

TEST_CASE("endpoint shapes: openai completions, chat and tgi") {
  MockServer srv([](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    if (body.contains("max_tokens")) {
      if (body["prompt"].get<std::string>().find("lung") != std::string::npos)
        json_reply(res, {{"choices", {{{"text", "openai"}}}}});
      else
        json_reply(res, {{"choices", {{{"message", {{"role", "assistant"}, {"content", "chat"}}}}}}});
    } else {
      CHECK(body["parameters"]["max_new_tokens"] == 512);
      json_reply(res, Json::array({{{"generated_text", "tgi"}}}));
    }
  });
  auto cfg = config(srv.url());
  cfg.shape = parse_endpoint_shape("openai");
  CHECK(generate_region_report(bundle(1), cfg) == "openai");
  CHECK(generate_region_report(bundle(2), cfg) == "chat");
  CHECK(srv.request(0)["max_tokens"] == 512);
  cfg.shape = parse_endpoint_shape("tgi");
  CHECK(generate_region_report(bundle(1), cfg) == "tgi");
  CHECK(srv.request(2).contains("inputs"));
  CHECK(parse_endpoint_shape("minimal") == EndpointShape::kMinimal);
  CHECK_THROWS_AS(parse_endpoint_shape("grpc"), Error);
}

TEST_CASE("retries: 500, 500, 200 succeeds with retries=2; exhausted retries report attempts") {
  std::atomic<int> calls{0};
  MockServer srv([&](const httplib::Request&, httplib::Response& res) {
    const int n = ++calls;
    if (n <= 2) {
      res.status = 500;
      return;
    }
    json_reply(res, {{"text", "ok"}});
  });
  auto cfg = config(srv.url());
  cfg.retries = 2;
  CHECK(generate_region_report(bundle(1), cfg) == "ok");
  CHECK(calls == 3);

  calls = 0;
  cfg.retries = 1;
  try {
    generate_region_report(bundle(1), cfg);
    FAIL("expected HttpError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kHttpError);
    CHECK(std::string(e.what()).find("500") != std::string::npos);
    CHECK(std::string(e.what()).find("2 attempt") != std::string::npos);
  }
  CHECK(calls == 2);
}

TEST_CASE("429 is retried, 404 is not") {
  std::atomic<int> calls{0};
  MockServer srv([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    if (Json::parse(req.body)["prompt"].get<std::string>().find("upper abdomen") != std::string::npos) {
      res.status = 404;
      return;
    }
    res.status = calls == 1 ? 429 : 200;
    if (res.status == 200) json_reply(res, {{"text", "later"}});
  });
  auto cfg = config(srv.url());
  CHECK(generate_region_report(bundle(1), cfg) == "later");
  calls = 0;
  CHECK(code_of([&] { generate_region_report(bundle(6), cfg); }) == ErrorCode::kHttpError);
  CHECK(calls == 1);
}

TEST_CASE("slow endpoint raises Timeout") {
  MockServer srv([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1200));
    json_reply(res, {{"text", "late"}});
  });
  auto cfg = config(srv.url());
  cfg.timeout_seconds = 0.2;
  cfg.retries = 1;
  CHECK(code_of([&] { generate_region_report(bundle(1), cfg); }) == ErrorCode::kTimeout);
}

TEST_CASE("empty or missing completion text raises EmptyCompletion") {
  MockServer srv([](const httplib::Request& req, httplib::Response& res) {
    if (Json::parse(req.body)["prompt"].get<std::string>().find("lung") != std::string::npos)
      json_reply(res, {{"text", ""}});
    else
      json_reply(res, {{"output", "x"}});
  });
  auto cfg = config(srv.url());
  CHECK(code_of([&] { generate_region_report(bundle(1), cfg); }) == ErrorCode::kEmptyCompletion);
  CHECK(code_of([&] { generate_region_report(bundle(2), cfg); }) == ErrorCode::kEmptyCompletion);
}

TEST_CASE("unreachable endpoint fails after the configured attempts") {
  // Nothing listens on port 1 of the loopback interface.
  auto cfg = config("http://127.0.0.1:1/generate");
  cfg.retries = 1;
  std::vector<std::string> lines;
  cfg.log = [&](std::string_view l) { lines.emplace_back(l); };
  const ErrorCode code = code_of([&] { generate_region_report(bundle(1), cfg); });
  CHECK((code == ErrorCode::kHttpError || code == ErrorCode::kTimeout));
  CHECK(std::count_if(lines.begin(), lines.end(),
                      [](const std::string& l) { return l.rfind("POST", 0) == 0; }) == 2);
}

TEST_CASE("api key: bearer header, redacted logs, environment only") {
  MockServer srv([](const httplib::Request&, httplib::Response& res) { json_reply(res, {{"text", "fine"}}); });
  ::setenv("MEDREGION_TEST_KEY", "sk-secret-123", 1);
  auto cfg = config(srv.url());
  cfg.api_key = api_key_from_env("MEDREGION_TEST_KEY");
  std::vector<std::string> lines;
  cfg.log = [&](std::string_view l) { lines.emplace_back(l); };
  CHECK(generate_region_report(bundle(1), cfg) == "fine");
  CHECK(srv.auth(0) == "Bearer sk-secret-123");
  REQUIRE(!lines.empty());
  bool masked = false;
  for (const auto& l : lines) {
    CHECK(l.find("sk-secret-123") == std::string::npos);
    masked |= l.find("***") != std::string::npos;
  }
  CHECK(masked);
  ::unsetenv("MEDREGION_TEST_KEY");
  CHECK(api_key_from_env("MEDREGION_TEST_KEY").empty());
  CHECK(redact("a key key b", "key") == "a *** *** b");
  CHECK(redact("abc", "") == "abc");
}

TEST_CASE("generate_reports: bounded concurrency, input order, first error") {
  MockServer srv([](const httplib::Request& req, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(40));
    const std::string prompt = Json::parse(req.body)["prompt"];
    json_reply(res, {{"text", prompt.substr(prompt.rfind("Describe"))}});
  });
  auto cfg = config(srv.url());
  cfg.max_concurrency = 3;
  std::vector<PromptBundle> bundles;
  for (int r = 1; r <= 6; ++r) bundles.push_back(bundle(r));
  const auto out = generate_reports(bundles, cfg);
  REQUIRE(out.size() == 6);
  for (int r = 1; r <= 6; ++r) CHECK(out[r - 1] == region_instruction(r));
  CHECK(srv.max_in_flight() <= 3);
  CHECK(srv.max_in_flight() >= 2);

  auto broken = cfg;
  broken.base_url = srv.url() + "x";
  CHECK(code_of([&] { generate_reports(bundles, broken); }) == ErrorCode::kHttpError);
}

TEST_CASE("EndpointConfig::validate") {
  auto cfg = config("http://localhost:8080/v1/completions");
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.timeout_seconds = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.retries = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.max_concurrency = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.base_url = "localhost:8080";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.base_url = "ftp://host/x";
  CHECK_THROWS_AS(bad.validate(), Error);
}
