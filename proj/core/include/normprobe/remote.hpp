#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace normprobe {

struct FetchOptions {
  std::size_t batch_size = 32;
  std::chrono::milliseconds timeout{30000};
  unsigned retries = 3;
  std::chrono::milliseconds backoff_base{100};  // doubled after every failed attempt
  std::size_t max_in_flight = 1;
};

/// Embeds `texts` through `POST <endpoint>/embed` with body
/// `{"texts":[...],"lang":...}`. Returns one vector per text in input order.
///
/// Connection failures, timeouts, 429 and 5xx responses are retried with
/// exponential backoff; any other non-2xx status fails immediately.
/// Up to `max_in_flight` batches are requested concurrently.
std::vector<std::vector<double>> fetch_remote_embeddings(std::string_view endpoint,
                                                         std::span<const std::string> texts,
                                                         std::string_view lang,
                                                         const FetchOptions& options = {});

}  // namespace normprobe
