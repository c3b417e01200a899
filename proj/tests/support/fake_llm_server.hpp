#pragma once

// An in-process OpenAI-style chat completions server for tests.

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "tsf/dataset.hpp"
#include "tsf/llm_gateway.hpp"

namespace tsf::testing {

struct SeenRequest {
  std::string authorization;
  std::string path;
  std::string body;
};

class FakeLlmServer {
 public:
  /// Status codes to return before answering normally, consumed in order.
  std::vector<int> scripted_statuses;
  std::chrono::milliseconds delay{0};
  bool report_usage = true;

  FakeLlmServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeLlmServer() {
    server_.stop();
    thread_.join();
  }
  FakeLlmServer(const FakeLlmServer&) = delete;
  FakeLlmServer& operator=(const FakeLlmServer&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::vector<SeenRequest> requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
  }

  /// The reply text for a user prompt: patch echo plus a persistence forecast.
  static std::string reply_for(const std::string& user) {
    const auto prompt = read_user_prompt(user);
    const std::vector<double> forecast(prompt.horizon, prompt.context.back());
    const std::size_t n = prompt.context.size();
    std::string patches = "[";
    for (std::size_t i = n; i >= 3; --i) {
      if (i != n) patches += ", ";
      patches += "[" + join_values(std::span(prompt.context).subspan(i - 3, 3)) + "]";
    }
    patches += "]";
    return "Patches:\n" + patches + "\nPrediction:\n[" + join_values(forecast) + "]";
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    std::size_t index;
    {
      std::lock_guard lock(mutex_);
      seen_.push_back({req.get_header_value("Authorization"), req.path, req.body});
      index = seen_.size() - 1;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    if (index < scripted_statuses.size()) {
      res.status = scripted_statuses[index];
      res.set_content("{\"error\":\"scripted\"}", "application/json");
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    const std::string user = body["messages"].back()["content"].get<std::string>();
    std::string system;
    if (body["messages"].size() > 1) system = body["messages"][0]["content"].get<std::string>();
    const std::string text = reply_for(user);
    nlohmann::json out;
    out["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}});
    if (report_usage) {
      // Word counts stand in for a provider tokenizer.
      auto words = [](const std::string& s) {
        std::size_t n = 0;
        bool in_word = false;
        for (char c : s) {
          const bool space = c == ' ' || c == '\n';
          if (!space && !in_word) ++n;
          in_word = !space;
        }
        return n;
      };
      out["usage"] = {{"prompt_tokens", words(system) + words(user)}, {"completion_tokens", words(text)}};
    }
    res.set_content(out.dump(), "application/json");
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<SeenRequest> seen_;
};

}  // namespace tsf::testing
