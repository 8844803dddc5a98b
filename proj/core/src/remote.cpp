#include "normprobe/remote.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>
#include <algorithm>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "normprobe/error.hpp"

namespace normprobe {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix + "/embed"
};

Endpoint split_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::invalid_argument, "endpoint must be an http(s) URL: " + std::string(url));
  }
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = std::string(url.substr(0, path_start));
  std::string prefix = path_start == std::string_view::npos ? "" : std::string(url.substr(path_start));
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  ep.path = prefix + "/embed";
  return ep;
}

struct BatchFailure {
  bool transient = false;
  ErrorCode code = ErrorCode::io;
  std::string message;
};

using BatchResult = std::variant<std::vector<std::vector<double>>, BatchFailure>;

BatchResult request_batch(httplib::Client& client, const Endpoint& ep,
                          std::span<const std::string> texts, std::string_view lang) {
  nlohmann::json body;
  body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  body["lang"] = lang;
  auto res = client.Post(ep.path, body.dump(), "application/json");
  if (!res) {
    return BatchFailure{true, ErrorCode::io, "request failed: " + httplib::to_string(res.error())};
  }
  if (res->status < 200 || res->status >= 300) {
    bool transient = res->status == 429 || res->status >= 500;
    return BatchFailure{transient, ErrorCode::http_status,
                        "embedding service returned status " + std::to_string(res->status)};
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("vectors") ||
      !parsed["vectors"].is_array()) {
    return BatchFailure{false, ErrorCode::parse, "malformed embedding response"};
  }
  const auto& vectors = parsed["vectors"];
  if (vectors.size() != texts.size()) {
    return BatchFailure{false, ErrorCode::count_mismatch,
                        "count mismatch: sent " + std::to_string(texts.size()) + " texts, received " +
                            std::to_string(vectors.size()) + " vectors"};
  }
  std::vector<std::vector<double>> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (!v.is_array() || v.empty()) {
      return BatchFailure{false, ErrorCode::parse, "malformed vector in embedding response"};
    }
    std::vector<double> vec;
    vec.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) return BatchFailure{false, ErrorCode::parse, "non-numeric vector component"};
      double d = x.get<double>();
      if (!std::isfinite(d)) return BatchFailure{false, ErrorCode::non_finite, "non-finite component"};
      vec.push_back(d);
    }
    if (!out.empty() && vec.size() != out.front().size()) {
      return BatchFailure{false, ErrorCode::inconsistent_dimension,
                          "inconsistent dimension within batch: " + std::to_string(out.front().size()) +
                              " vs " + std::to_string(vec.size())};
    }
    out.push_back(std::move(vec));
  }
  return out;
}

std::vector<std::vector<double>> fetch_batch(const Endpoint& ep, std::span<const std::string> texts,
                                             std::string_view lang, const FetchOptions& options) {
  httplib::Client client(ep.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  auto backoff = options.backoff_base;
  for (unsigned attempt = 0;; ++attempt) {
    auto result = request_batch(client, ep, texts, lang);
    if (auto* vectors = std::get_if<0>(&result)) return std::move(*vectors);
    auto& failure = std::get<BatchFailure>(result);
    if (!failure.transient) throw Error(failure.code, failure.message);
    if (attempt >= options.retries) {
      throw Error(ErrorCode::retries_exhausted,
                  "exhausted " + std::to_string(options.retries) + " retries: " + failure.message);
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace

std::vector<std::vector<double>> fetch_remote_embeddings(std::string_view endpoint,
                                                         std::span<const std::string> texts,
                                                         std::string_view lang,
                                                         const FetchOptions& options) {
  if (options.batch_size == 0) throw Error(ErrorCode::invalid_argument, "batch_size must be positive");
  if (options.timeout.count() <= 0) throw Error(ErrorCode::invalid_argument, "timeout must be positive");
  if (texts.empty()) return {};
  const auto ep = split_endpoint(endpoint);

  const std::size_t n_batches = (texts.size() + options.batch_size - 1) / options.batch_size;
  std::vector<std::vector<std::vector<double>>> batches(n_batches);
  std::vector<std::exception_ptr> errors(n_batches);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t b; !failed && (b = next++) < n_batches;) {
      auto first = b * options.batch_size;
      auto count = std::min(options.batch_size, texts.size() - first);
      try {
        batches[b] = fetch_batch(ep, texts.subspan(first, count), lang, options);
      } catch (...) {
        errors[b] = std::current_exception();
        failed = true;
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(options.max_in_flight, 1, n_batches);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  const std::size_t dim = batches.front().front().size();
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (batches[b].front().size() != dim) {
      throw Error(ErrorCode::inconsistent_dimension,
                  "inconsistent dimension across batches: batch 0 has " + std::to_string(dim) +
                      ", batch " + std::to_string(b) + " has " + std::to_string(batches[b].front().size()));
    }
    for (auto& v : batches[b]) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace normprobe
