#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsf/error.hpp"
#include "tsf/prompting.hpp"

namespace tsf {

enum class BackendKind { Http, MockPersistence, MockLinear, Replay };
enum class TokenSource { Reported, Estimated };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view name);
std::string_view to_string(TokenSource source);

struct BackendConfig {
  BackendKind kind = BackendKind::MockPersistence;
  std::string endpoint_url;
  std::string model_name;
  double temperature = 0.0;
  int timeout_seconds = 60;
  int max_retries = 3;  // retries after the first attempt
  std::size_t parallelism = 1;
  std::filesystem::path fixture_path;  // Replay input
  std::string api_key;                 // Http only; sent as a bearer token

  /// Throws ConfigError when a required field for `kind` is missing.
  void validate() const;
};

struct LlmResponse {
  std::string text;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  double latency_seconds = 0.0;
  std::string backend_id;
  TokenSource token_source = TokenSource::Estimated;
};

/// ceil(bytes / 4).
std::size_t estimate_tokens(std::string_view text);

class Backend {
 public:
  virtual ~Backend() = default;
  /// Must be safe to call from several threads at once.
  virtual LlmResponse complete(const PromptBundle& bundle) = 0;
  virtual std::string id() const = 0;
};

/// Repeats the last context value h times.
class MockPersistenceBackend final : public Backend {
 public:
  LlmResponse complete(const PromptBundle& bundle) override;
  std::string id() const override { return "mock-persistence"; }
};

/// Continues the slope of the last two context values.
class MockLinearBackend final : public Backend {
 public:
  LlmResponse complete(const PromptBundle& bundle) override;
  std::string id() const override { return "mock-linear"; }
};

/// Reads the context and horizon back out of a horizon prompt, the way the
/// mock backends see it.
struct PromptReadback {
  std::vector<double> context;
  std::size_t horizon = 0;
};
PromptReadback read_user_prompt(std::string_view user);

struct FixtureRecord {
  std::string hash;
  std::string text;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  double latency_seconds = 0.0;

  friend bool operator==(const FixtureRecord&, const FixtureRecord&) = default;
};

/// Content-hash keyed responses, stored as JSON lines sorted by hash.
class FixtureStore {
 public:
  static FixtureStore load(const std::filesystem::path& path);
  static FixtureStore parse(std::string_view jsonl);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  void put(FixtureRecord record);
  const FixtureRecord* find(std::string_view hash) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, FixtureRecord, std::less<>> records_;

 public:
  FixtureStore() = default;
  FixtureStore(FixtureStore&& other) noexcept;
  FixtureStore& operator=(FixtureStore&& other) noexcept;
};

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(FixtureStore store) : store_(std::move(store)) {}
  LlmResponse complete(const PromptBundle& bundle) override;
  std::string id() const override { return "replay"; }

 private:
  FixtureStore store_;
};

/// OpenAI-compatible chat completions over HTTP(S).
class HttpBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpBackend(BackendConfig cfg, Sleeper sleeper = {});
  LlmResponse complete(const PromptBundle& bundle) override;
  std::string id() const override { return "http:" + cfg_.model_name; }

  /// The JSON request body sent for a bundle.
  std::string request_body(const PromptBundle& bundle) const;
  /// Total attempts made so far, across all calls.
  std::size_t attempts() const { return attempts_.load(); }

 private:
  BackendConfig cfg_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::atomic<std::size_t> attempts_{0};
};

/// Forwards to an inner backend and keeps every response as a fixture.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(std::unique_ptr<Backend> inner) : inner_(std::move(inner)) {}
  LlmResponse complete(const PromptBundle& bundle) override;
  std::string id() const override { return inner_->id(); }
  const FixtureStore& fixtures() const { return store_; }

 private:
  std::unique_ptr<Backend> inner_;
  FixtureStore store_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

/// One-shot dispatch through a freshly built backend.
LlmResponse complete(const PromptBundle& bundle, const BackendConfig& cfg);

struct DispatchResult {
  std::optional<LlmResponse> response;
  std::optional<ErrorCode> error_code;
  std::string error;
};

struct GatewayStats {
  std::size_t requests = 0;
  std::size_t failures = 0;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
};

/// Runs bundles through a backend with at most `parallelism` requests in
/// flight. Results come back in input order.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::size_t parallelism);

  std::vector<DispatchResult> dispatch(std::span<const PromptBundle> bundles);
  GatewayStats stats() const;
  std::size_t peak_in_flight() const { return peak_in_flight_.load(); }
  Backend& backend() { return *backend_; }

 private:
  std::shared_ptr<Backend> backend_;
  std::size_t parallelism_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> failures_{0};
  std::atomic<std::size_t> input_tokens_{0};
  std::atomic<std::size_t> output_tokens_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_in_flight_{0};
};

/// Sends every bundle to a live Http backend and writes the responses as a
/// fixture file for later replay. Returns the number of records written.
std::size_t record_fixtures(std::span<const PromptBundle> bundles, const BackendConfig& cfg,
                            const std::filesystem::path& out);

}  // namespace tsf
