#include "tsf/llm_gateway.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace tsf {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::string_view kSequenceMarker = "Sequence: <";
constexpr std::string_view kPredictMarker = "Predict the next ";

std::string render_list(std::span<const double> values) { return "[" + join_values(values) + "]"; }

LlmResponse mock_response(const PromptBundle& bundle, std::string text, std::string backend_id) {
  LlmResponse r;
  r.input_tokens = estimate_tokens(bundle.system) + estimate_tokens(bundle.user);
  r.output_tokens = estimate_tokens(text);
  r.text = std::move(text);
  r.latency_seconds = 0.0;
  r.backend_id = std::move(backend_id);
  r.token_source = TokenSource::Estimated;
  return r;
}

// Splits "http://host:port/v1" into "http://host:port" and "/v1".
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) return {url, ""};
  std::string path = url.substr(path_begin);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_begin), path};
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::MockPersistence: return "mock-persistence";
    case BackendKind::MockLinear: return "mock-linear";
    case BackendKind::Replay: return "replay";
  }
  return "unknown";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
  for (auto k : {BackendKind::Http, BackendKind::MockPersistence, BackendKind::MockLinear, BackendKind::Replay}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(TokenSource source) {
  return source == TokenSource::Reported ? "reported" : "estimated";
}

void BackendConfig::validate() const {
  if (kind == BackendKind::Http) {
    if (endpoint_url.empty()) throw Error(ErrorCode::ConfigError, "http backend needs an endpoint url");
    if (model_name.empty()) throw Error(ErrorCode::ConfigError, "http backend needs a model name");
  }
  if (kind == BackendKind::Replay && fixture_path.empty()) {
    throw Error(ErrorCode::ConfigError, "replay backend needs a fixture path");
  }
  if (parallelism == 0) throw Error(ErrorCode::ConfigError, "parallelism must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
  if (timeout_seconds <= 0) throw Error(ErrorCode::ConfigError, "timeout must be positive");
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

PromptReadback read_user_prompt(std::string_view user) {
  PromptReadback out;
  const auto seq = user.rfind(kSequenceMarker);
  if (seq == std::string_view::npos) throw Error(ErrorCode::NoListFound, "prompt has no sequence");
  const auto begin = seq + kSequenceMarker.size();
  const auto end = user.find('>', begin);
  if (end == std::string_view::npos) throw Error(ErrorCode::NoListFound, "unterminated sequence");
  std::string_view body = user.substr(begin, end - begin);
  while (!body.empty()) {
    const auto comma = body.find(',');
    std::string_view item = body.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{}) throw Error(ErrorCode::NonNumericElement, std::string(item));
    out.context.push_back(v);
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  const auto pred = user.find(kPredictMarker, end);
  if (pred == std::string_view::npos) throw Error(ErrorCode::NoListFound, "prompt has no horizon");
  const auto digits = user.substr(pred + kPredictMarker.size());
  std::from_chars(digits.data(), digits.data() + digits.size(), out.horizon);
  return out;
}

LlmResponse MockPersistenceBackend::complete(const PromptBundle& bundle) {
  const auto prompt = read_user_prompt(bundle.user);
  const double last = prompt.context.empty() ? 0.0 : prompt.context.back();
  const std::vector<double> forecast(prompt.horizon, last);
  return mock_response(bundle, render_list(forecast), id());
}

LlmResponse MockLinearBackend::complete(const PromptBundle& bundle) {
  const auto prompt = read_user_prompt(bundle.user);
  const auto& ctx = prompt.context;
  const double last = ctx.empty() ? 0.0 : ctx.back();
  const double slope = ctx.size() >= 2 ? last - ctx[ctx.size() - 2] : 0.0;
  std::vector<double> forecast(prompt.horizon);
  for (std::size_t i = 0; i < forecast.size(); ++i) forecast[i] = last + static_cast<double>(i + 1) * slope;
  return mock_response(bundle, render_list(forecast), id());
}

FixtureStore::FixtureStore(FixtureStore&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  records_ = std::move(other.records_);
}

FixtureStore& FixtureStore::operator=(FixtureStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    records_ = std::move(other.records_);
  }
  return *this;
}

FixtureStore FixtureStore::parse(std::string_view jsonl) {
  FixtureStore store;
  std::size_t line_no = 0;
  while (!jsonl.empty()) {
    const auto eol = jsonl.find('\n');
    std::string_view line = jsonl.substr(0, eol);
    jsonl = eol == std::string_view::npos ? std::string_view{} : jsonl.substr(eol + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FixtureRecord r;
      r.hash = j.at("hash").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.input_tokens = j.at("input_tokens").get<std::size_t>();
      r.output_tokens = j.at("output_tokens").get<std::size_t>();
      r.latency_seconds = j.at("latency_seconds").get<double>();
      store.put(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, "fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

FixtureStore FixtureStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open fixture file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string FixtureStore::serialize() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& [hash, r] : records_) {
    nlohmann::ordered_json j;
    j["hash"] = r.hash;
    j["text"] = r.text;
    j["input_tokens"] = r.input_tokens;
    j["output_tokens"] = r.output_tokens;
    j["latency_seconds"] = r.latency_seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void FixtureStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write fixture file " + path.string());
  out << serialize();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void FixtureStore::put(FixtureRecord record) {
  std::lock_guard lock(mutex_);
  auto hash = record.hash;
  records_.insert_or_assign(std::move(hash), std::move(record));
}

const FixtureRecord* FixtureStore::find(std::string_view hash) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(hash);
  return it == records_.end() ? nullptr : &it->second;
}

std::size_t FixtureStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

LlmResponse ReplayBackend::complete(const PromptBundle& bundle) {
  const auto hash = bundle.content_hash();
  const FixtureRecord* r = store_.find(hash);
  if (!r) {
    throw Error(ErrorCode::ReplayMiss, "no fixture for " + std::string(strategy_name(bundle.strategy)) + " h=" +
                                           std::to_string(bundle.horizon) + " window " + bundle.window_id +
                                           " (template " + bundle.template_version + ", hash " + hash + ")");
  }
  LlmResponse out;
  out.text = r->text;
  out.input_tokens = r->input_tokens;
  out.output_tokens = r->output_tokens;
  out.latency_seconds = r->latency_seconds;
  out.backend_id = id();
  out.token_source = TokenSource::Reported;
  return out;
}

HttpBackend::HttpBackend(BackendConfig cfg, Sleeper sleeper) : cfg_(std::move(cfg)), sleeper_(std::move(sleeper)) {
  cfg_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  std::tie(scheme_host_port_, path_prefix_) = split_url(cfg_.endpoint_url);
}

std::string HttpBackend::request_body(const PromptBundle& bundle) const {
  nlohmann::ordered_json body;
  body["model"] = cfg_.model_name;
  body["temperature"] = cfg_.temperature;
  body["messages"] = nlohmann::ordered_json::array();
  if (!bundle.system.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", bundle.system}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", bundle.user}});
  return body.dump();
}

LlmResponse HttpBackend::complete(const PromptBundle& bundle) {
  const std::string body = request_body(bundle);
  const std::string path = path_prefix_ + "/chat/completions";
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  const int attempts_allowed = 1 + cfg_.max_retries;
  std::chrono::milliseconds backoff{1000};
  std::string last_error;
  ErrorCode last_code = ErrorCode::TransportError;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    if (attempt > 1) {
      sleeper_(backoff);
      backoff *= 2;
    }
    ++attempts_;
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::seconds(cfg_.timeout_seconds));
    client.set_read_timeout(std::chrono::seconds(cfg_.timeout_seconds));
    client.set_write_timeout(std::chrono::seconds(cfg_.timeout_seconds));

    const auto start = Clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= 0.9 * cfg_.timeout_seconds);
      last_code = timed_out ? ErrorCode::TimeoutError : ErrorCode::TransportError;
      last_error = httplib::to_string(err);
      continue;
    }
    if (res->status == 429) {
      last_code = ErrorCode::HttpStatusError;
      last_error = "status 429: " + res->body;
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::HttpStatusError, "status " + std::to_string(res->status) + ": " + res->body);
    }

    LlmResponse out;
    out.latency_seconds = elapsed;
    out.backend_id = id();
    try {
      const auto j = nlohmann::json::parse(res->body);
      out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      const auto usage = j.find("usage");
      if (usage != j.end() && usage->contains("prompt_tokens") && usage->contains("completion_tokens")) {
        out.input_tokens = usage->at("prompt_tokens").get<std::size_t>();
        out.output_tokens = usage->at("completion_tokens").get<std::size_t>();
        out.token_source = TokenSource::Reported;
      } else {
        out.input_tokens = estimate_tokens(bundle.system) + estimate_tokens(bundle.user);
        out.output_tokens = estimate_tokens(out.text);
        out.token_source = TokenSource::Estimated;
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::HttpStatusError, "status " + std::to_string(res->status) +
                                                  ": unreadable completion body (" + e.what() + "): " + res->body);
    }
    return out;
  }
  throw Error(last_code, "giving up after " + std::to_string(attempts_allowed) + " attempts: " + last_error);
}

LlmResponse RecordingBackend::complete(const PromptBundle& bundle) {
  LlmResponse r = inner_->complete(bundle);
  store_.put(FixtureRecord{bundle.content_hash(), r.text, r.input_tokens, r.output_tokens, r.latency_seconds});
  return r;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case BackendKind::Http: return std::make_unique<HttpBackend>(cfg);
    case BackendKind::MockPersistence: return std::make_unique<MockPersistenceBackend>();
    case BackendKind::MockLinear: return std::make_unique<MockLinearBackend>();
    case BackendKind::Replay: return std::make_unique<ReplayBackend>(FixtureStore::load(cfg.fixture_path));
  }
  throw Error(ErrorCode::ConfigError, "unknown backend kind");
}

LlmResponse complete(const PromptBundle& bundle, const BackendConfig& cfg) { return make_backend(cfg)->complete(bundle); }

Gateway::Gateway(std::shared_ptr<Backend> backend, std::size_t parallelism)
    : backend_(std::move(backend)), parallelism_(std::max<std::size_t>(1, parallelism)) {}

std::vector<DispatchResult> Gateway::dispatch(std::span<const PromptBundle> bundles) {
  std::vector<DispatchResult> results(bundles.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < bundles.size(); i = next++) {
      const auto now = ++in_flight_;
      for (auto peak = peak_in_flight_.load(); now > peak && !peak_in_flight_.compare_exchange_weak(peak, now);) {
      }
      try {
        LlmResponse r = backend_->complete(bundles[i]);
        input_tokens_ += r.input_tokens;
        output_tokens_ += r.output_tokens;
        results[i].response = std::move(r);
      } catch (const Error& e) {
        ++failures_;
        results[i].error_code = e.code();
        results[i].error = e.what();
      } catch (const std::exception& e) {
        ++failures_;
        results[i].error_code = ErrorCode::TransportError;
        results[i].error = e.what();
      }
      ++requests_;
      --in_flight_;
    }
  };
  const std::size_t workers = std::min(parallelism_, bundles.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

GatewayStats Gateway::stats() const {
  return GatewayStats{requests_.load(), failures_.load(), input_tokens_.load(), output_tokens_.load()};
}

std::size_t record_fixtures(std::span<const PromptBundle> bundles, const BackendConfig& cfg,
                            const std::filesystem::path& out) {
  if (cfg.kind != BackendKind::Http) {
    throw Error(ErrorCode::ConfigError, "only the http backend can be recorded, not " + std::string(to_string(cfg.kind)));
  }
  auto recorder = std::make_shared<RecordingBackend>(make_backend(cfg));
  Gateway gateway(recorder, cfg.parallelism);
  for (const auto& r : gateway.dispatch(bundles)) {
    if (!r.response) throw Error(*r.error_code, r.error);
  }
  recorder->fixtures().save(out);
  return recorder->fixtures().size();
}

}  // namespace tsf
