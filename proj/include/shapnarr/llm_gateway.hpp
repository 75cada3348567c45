#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/prompt_forge.hpp"

namespace shapnarr {

struct ChatRequest {
  PromptRole role_tag = PromptRole::narrator;
  std::string body;
  double temperature = 0.0;
  std::string model_id;
  int max_output_tokens = 2048;
  std::string run_id;       // ledger bucket
  std::string context_key;  // instance id; lets scripted providers key fixtures
};

struct ChatResponse {
  std::string body;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t latency_ms = 0;
  std::string provider_id;
};

class Provider {
 public:
  virtual ~Provider() = default;
  // Throws Error with TransientError / Timeout / RateLimited for retryable
  // failures, AuthError / ProviderError otherwise.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

inline std::int64_t estimate_tokens(std::string_view text) { return static_cast<std::int64_t>((text.size() + 3) / 4); }

// ---------------- mock providers ----------------

class EchoProvider : public Provider {
 public:
  ChatResponse complete(const ChatRequest& r) override {
    return {r.body, estimate_tokens(r.body), estimate_tokens(r.body), 0, id()};
  }
  std::string id() const override { return "echo"; }
};

class FunctionProvider : public Provider {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  FunctionProvider(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  ChatResponse complete(const ChatRequest& r) override {
    auto body = fn_(r);
    const auto out = estimate_tokens(body);
    return {std::move(body), estimate_tokens(r.body), out, 0, name_};
  }
  std::string id() const override { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

// Replays registered responses per (role, key). Each call advances that key's
// cursor; once exhausted the last response repeats.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::string name = "scripted") : name_(std::move(name)) {}

  void add(PromptRole role, const std::string& key, std::vector<std::string> responses) {
    std::lock_guard lock(mu_);
    if (responses.empty()) throw Error(ErrorCode::FixtureMissing, "fixture has no responses");
    auto [it, inserted] = fixtures_.try_emplace({role, key}, Entry{std::move(responses), 0});
    if (!inserted)
      throw Error(ErrorCode::DuplicateFixture,
                  "fixture (" + std::string(to_string(role)) + ", " + key + ") already registered");
  }

  ChatResponse complete(const ChatRequest& r) override {
    std::string body;
    {
      std::lock_guard lock(mu_);
      auto it = fixtures_.find({r.role_tag, r.context_key});
      if (it == fixtures_.end())
        throw Error(ErrorCode::FixtureMissing,
                    "no fixture for (" + std::string(to_string(r.role_tag)) + ", " + r.context_key + ")");
      auto& e = it->second;
      body = e.responses[std::min(e.cursor, e.responses.size() - 1)];
      ++e.cursor;
    }
    const auto out = estimate_tokens(body);
    return {std::move(body), estimate_tokens(r.body), out, 0, name_};
  }

  std::string id() const override { return name_; }

 private:
  struct Entry {
    std::vector<std::string> responses;
    std::size_t cursor = 0;
  };
  std::string name_;
  std::mutex mu_;
  std::map<std::pair<PromptRole, std::string>, Entry> fixtures_;
};

inline std::shared_ptr<ScriptedProvider> make_scripted_provider(
    const std::vector<std::tuple<PromptRole, std::string, std::vector<std::string>>>& fixtures,
    std::string name = "scripted") {
  auto p = std::make_shared<ScriptedProvider>(std::move(name));
  for (const auto& [role, key, responses] : fixtures) p->add(role, key, responses);
  return p;
}

// Fixture file: [{"role": "evaluator", "key": "7", "responses": ["...", ...]}, ...]
inline std::shared_ptr<ScriptedProvider> scripted_provider_from_json(const nlohmann::json& j,
                                                                     std::string name = "scripted") {
  if (!j.is_array()) throw Error(ErrorCode::ConfigError, "fixture file must be a JSON array");
  auto p = std::make_shared<ScriptedProvider>(std::move(name));
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("role") || !e.contains("key") || !e.contains("responses"))
      throw Error(ErrorCode::ConfigError, "fixture entries need role, key and responses");
    p->add(prompt_role_from(e.at("role").get<std::string>()), e.at("key").get<std::string>(),
           e.at("responses").get<std::vector<std::string>>());
  }
  return p;
}

// ---------------- ledger ----------------

struct Price {
  double input_per_million = 0.0;
  double output_per_million = 0.0;
};

using PriceTable = std::map<std::string, Price>;  // model_id -> price

// {"model": {"input_per_million": 3.0, "output_per_million": 15.0}, ...}
inline PriceTable price_table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "price table must be a JSON object");
  PriceTable t;
  for (const auto& [model, p] : j.items()) {
    t[model] = Price{p.value("input_per_million", 0.0), p.value("output_per_million", 0.0)};
    if (t[model].input_per_million < 0 || t[model].output_per_million < 0)
      throw Error(ErrorCode::ConfigError, "negative price for '" + model + "'");
  }
  return t;
}

struct Usage {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  Usage& operator+=(const Usage& o) {
    calls += o.calls;
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
  bool operator==(const Usage&) const = default;
};

struct LedgerKey {
  std::string run_id;
  std::string model_id;
  PromptRole role = PromptRole::narrator;

  auto operator<=>(const LedgerKey&) const = default;
};

// Token accumulators are integers; cost is derived from them on demand, so the
// total is one multiplication per bucket rather than a running float sum.
class UsageLedger {
 public:
  void set_prices(PriceTable prices) {
    std::lock_guard lock(mu_);
    prices_ = std::move(prices);
  }

  void record(const LedgerKey& key, const ChatResponse& r) {
    std::lock_guard lock(mu_);
    buckets_[key] += Usage{1, r.input_tokens, r.output_tokens};
  }

  std::map<LedgerKey, Usage> snapshot() const {
    std::lock_guard lock(mu_);
    return buckets_;
  }

  double cost(const LedgerKey& key, const Usage& u) const {
    auto it = prices_.find(key.model_id);
    if (it == prices_.end()) return 0.0;
    return (static_cast<double>(u.input_tokens) * it->second.input_per_million +
            static_cast<double>(u.output_tokens) * it->second.output_per_million) /
           1e6;
  }

  double total_cost(const std::string& run_id = {}) const {
    std::lock_guard lock(mu_);
    double total = 0.0;
    for (const auto& [k, u] : buckets_)
      if (run_id.empty() || k.run_id == run_id) total += cost(k, u);
    return total;
  }

  Usage total_usage(const std::string& run_id = {}) const {
    std::lock_guard lock(mu_);
    Usage total;
    for (const auto& [k, u] : buckets_)
      if (run_id.empty() || k.run_id == run_id) total += u;
    return total;
  }

  nlohmann::json to_json() const {
    std::lock_guard lock(mu_);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [k, u] : buckets_)
      arr.push_back({{"run_id", k.run_id},
                     {"model_id", k.model_id},
                     {"role", to_string(k.role)},
                     {"calls", u.calls},
                     {"input_tokens", u.input_tokens},
                     {"output_tokens", u.output_tokens},
                     {"cost", cost(k, u)}});
    return arr;
  }

 private:
  mutable std::mutex mu_;
  PriceTable prices_;
  std::map<LedgerKey, Usage> buckets_;
};

// ---------------- limits ----------------

struct RetryPolicy {
  int max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000), std::chrono::milliseconds(4000),
                                                 std::chrono::milliseconds(16000)};
  double jitter = 0.2;  // delay scaled by a factor in [1 - jitter, 1 + jitter]
  std::uint64_t seed = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

struct ProviderLimits {
  int max_concurrent = 4;
  double requests_per_second = 0.0;  // 0 disables the token bucket
  double burst = 1.0;
};

class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(int limit) : free_(limit > 0 ? limit : 1) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

  class Slot {
   public:
    explicit Slot(ConcurrencyGate& g) : g_(g) { g_.acquire(); }
    ~Slot() { g_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyGate& g_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int free_;
};

class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  TokenBucket(double rate_per_second, double burst)
      : rate_(rate_per_second), burst_(burst < 1.0 ? 1.0 : burst), tokens_(burst_), last_(Clock::now()) {}

  // Time the caller must wait before its request may go out; reserves the token.
  std::chrono::milliseconds reserve(Clock::time_point now = Clock::now()) {
    if (rate_ <= 0.0) return std::chrono::milliseconds(0);
    std::lock_guard lock(mu_);
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    if (elapsed > 0) {
      tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
      last_ = now;
    }
    tokens_ -= 1.0;
    if (tokens_ >= 0.0) return std::chrono::milliseconds(0);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(-tokens_ / rate_ * 1000.0)));
  }

 private:
  double rate_;
  double burst_;
  std::mutex mu_;
  double tokens_;
  Clock::time_point last_;
};

inline bool is_retryable(ErrorCode c) {
  return c == ErrorCode::TransientError || c == ErrorCode::Timeout || c == ErrorCode::RateLimited;
}

// ---------------- gateway ----------------

class Gateway {
 public:
  explicit Gateway(RetryPolicy retry = {}, Sleeper sleeper = real_sleeper())
      : retry_(std::move(retry)), sleeper_(std::move(sleeper)), jitter_rng_(retry_.seed) {}

  void register_model(const std::string& model_id, std::shared_ptr<Provider> provider, ProviderLimits limits = {}) {
    std::lock_guard lock(mu_);
    models_[model_id] = std::make_shared<Binding>(std::move(provider), limits);
  }

  bool has_model(const std::string& model_id) const {
    std::lock_guard lock(mu_);
    return models_.count(model_id) > 0;
  }

  UsageLedger& ledger() { return ledger_; }

  // Usage accumulated by requests carrying this context key (one instance).
  Usage context_usage(const std::string& context_key) const {
    std::lock_guard lock(mu_);
    auto it = by_context_.find(context_key);
    return it == by_context_.end() ? Usage{} : it->second;
  }
  const UsageLedger& ledger() const { return ledger_; }

  ChatResponse complete(const ChatRequest& request) {
    std::shared_ptr<Binding> b;
    {
      std::lock_guard lock(mu_);
      auto it = models_.find(request.model_id);
      if (it == models_.end()) throw Error(ErrorCode::UnknownModel, "no provider configured for '" + request.model_id + "'");
      b = it->second;
    }
    for (int attempt = 0;; ++attempt) {
      if (auto wait = b->bucket.reserve(); wait.count() > 0) sleeper_(wait);
      try {
        ChatResponse r;
        {
          ConcurrencyGate::Slot slot(b->gate);
          r = b->provider->complete(request);
        }
        if (r.body.find_first_not_of(" \t\r\n") == std::string::npos)
          throw Error(ErrorCode::EmptyResponse, "provider '" + b->provider->id() + "' returned no text");
        ledger_.record({request.run_id, request.model_id, request.role_tag}, r);
        {
          std::lock_guard lock(mu_);
          by_context_[request.context_key] += Usage{1, r.input_tokens, r.output_tokens};
        }
        return r;
      } catch (const Error& e) {
        if (!is_retryable(e.code())) throw;
        if (attempt >= retry_.max_retries) {
          const auto code = e.code() == ErrorCode::TransientError ? ErrorCode::ProviderError : e.code();
          throw Error(code, "giving up after " + std::to_string(attempt + 1) + " attempts: " + e.what());
        }
        sleeper_(backoff_delay(attempt));
      }
    }
  }

  std::chrono::milliseconds backoff_delay(int attempt) {
    if (retry_.backoff.empty()) return std::chrono::milliseconds(0);
    const auto base = retry_.backoff[std::min<std::size_t>(static_cast<std::size_t>(attempt), retry_.backoff.size() - 1)];
    double factor = 1.0;
    if (retry_.jitter > 0) {
      std::lock_guard lock(jitter_mu_);
      const double u = static_cast<double>(jitter_rng_() >> 11) * 0x1.0p-53;
      factor = 1.0 - retry_.jitter + 2.0 * retry_.jitter * u;
    }
    return std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(base.count()) * factor));
  }

 private:
  struct Binding {
    Binding(std::shared_ptr<Provider> p, ProviderLimits l)
        : provider(std::move(p)), limits(l), gate(l.max_concurrent), bucket(l.requests_per_second, l.burst) {}
    std::shared_ptr<Provider> provider;
    ProviderLimits limits;
    ConcurrencyGate gate;
    TokenBucket bucket;
  };

  RetryPolicy retry_;
  Sleeper sleeper_;
  std::mutex jitter_mu_;
  std::mt19937_64 jitter_rng_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Binding>> models_;
  std::map<std::string, Usage> by_context_;
  UsageLedger ledger_;
};

}  // namespace shapnarr
