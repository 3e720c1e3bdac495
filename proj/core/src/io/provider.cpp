#include "nmtune/io/provider.hpp"

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "nmtune/error.hpp"
#include "nmtune/hash.hpp"
#include "nmtune/io/fmat.hpp"

namespace nmtune::io {

using nlohmann::json;

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    fail(ErrorKind::kConfigError, "provider endpoint must be an http:// URL: " + endpoint);
  }
  const auto slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

Matrix parse_embeddings(const std::string& body, std::size_t expected_rows, std::size_t batch) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kProviderError, "batch " + std::to_string(batch) + ": malformed response");
  }
  const auto it = j.find("embeddings");
  if (it == j.end() || !it->is_array()) {
    fail(ErrorKind::kProviderError, "batch " + std::to_string(batch) + ": no 'embeddings' array");
  }
  if (it->size() != expected_rows) {
    fail(ErrorKind::kShapeError, "batch " + std::to_string(batch) + ": expected " +
                                     std::to_string(expected_rows) + " embeddings, got " +
                                     std::to_string(it->size()));
  }
  std::size_t cols = 0;
  std::vector<double> values;
  for (std::size_t r = 0; r < it->size(); ++r) {
    const json& row = (*it)[r];
    if (!row.is_array()) fail(ErrorKind::kProviderError, "batch " + std::to_string(batch) + ": bad row");
    if (r == 0) cols = row.size();
    if (row.size() != cols || cols == 0) {
      fail(ErrorKind::kShapeError, "batch " + std::to_string(batch) + ": ragged embedding rows");
    }
    for (const json& v : row) {
      if (!v.is_number()) fail(ErrorKind::kProviderError, "batch " + std::to_string(batch) + ": non-numeric value");
      values.push_back(v.get<double>());
    }
  }
  return Matrix(expected_rows, cols, std::move(values));
}

}  // namespace

std::string resolve_endpoint(const ProviderConfig& cfg) {
  if (!cfg.endpoint_env.empty()) {
    if (const char* v = std::getenv(cfg.endpoint_env.c_str()); v != nullptr && *v != '\0') return v;
  }
  if (cfg.endpoint.empty()) fail(ErrorKind::kConfigError, "provider endpoint is not set");
  return cfg.endpoint;
}

std::string batch_key(const std::string& endpoint, const std::vector<std::string>& batch) {
  return sha256_hex(json({{"endpoint", endpoint}, {"inputs", batch}}).dump());
}

Matrix fetch_embeddings(const ProviderConfig& cfg, const std::vector<std::string>& inputs,
                        const std::filesystem::path& cache_dir, FetchStats* stats) {
  if (inputs.empty()) fail(ErrorKind::kInvalidInput, "no inputs to embed");
  if (cfg.batch_size == 0) fail(ErrorKind::kConfigError, "provider batch_size must be >= 1");
  const std::string endpoint = resolve_endpoint(cfg);
  const Url url = split_url(endpoint);
  std::optional<std::string> token;
  if (!cfg.token_env.empty()) {
    if (const char* t = std::getenv(cfg.token_env.c_str()); t != nullptr && *t != '\0') token = t;
  }

  const std::size_t n_batches = (inputs.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<Matrix> parts(n_batches);
  std::mutex stats_mu;
  FetchStats local;

  auto fetch_one = [&](std::size_t b) {
    const std::size_t lo = b * cfg.batch_size;
    const std::size_t hi = std::min(inputs.size(), lo + cfg.batch_size);
    const std::vector<std::string> batch(inputs.begin() + static_cast<std::ptrdiff_t>(lo),
                                         inputs.begin() + static_cast<std::ptrdiff_t>(hi));
    const auto cached = cache_dir / (batch_key(endpoint, batch) + ".fmat");
    if (std::filesystem::exists(cached)) {
      parts[b] = read_fmat(cached);
      std::lock_guard lock(stats_mu);
      ++local.cache_hits;
      return;
    }
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (token) headers.emplace("Authorization", "Bearer " + *token);
    const std::string body = json({{"inputs", batch}}).dump();

    double delay_ms = cfg.retry.backoff_ms;
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= cfg.retry.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
        delay_ms *= 2.0;
      }
      {
        std::lock_guard lock(stats_mu);
        ++local.requests;
      }
      const auto res = client.Post(url.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) {
        parts[b] = parse_embeddings(res->body, batch.size(), b);
        write_fmat(parts[b], cached);
        return;
      }
      last_error = "HTTP " + std::to_string(res->status);
      if (!retryable(res->status)) break;
    }
    fail(ErrorKind::kProviderError, "batch " + std::to_string(b) + ": " + last_error);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.parallelism, n_batches));
  if (workers == 1) {
    for (std::size_t b = 0; b < n_batches; ++b) fetch_one(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::size_t first_batch = n_batches;
    auto run = [&] {
      for (std::size_t b = next++; b < n_batches; b = next++) {
        try {
          fetch_one(b);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (b < first_batch) {
            first_batch = b;
            first_error = std::current_exception();
          }
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  const std::size_t cols = parts[0].cols();
  Matrix out(inputs.size(), cols);
  std::size_t r = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (parts[b].cols() != cols) {
      fail(ErrorKind::kShapeError, "batch " + std::to_string(b) + " has " +
                                       std::to_string(parts[b].cols()) + " columns, expected " +
                                       std::to_string(cols));
    }
    for (std::size_t i = 0; i < parts[b].rows(); ++i, ++r) {
      std::copy(parts[b].row(i).begin(), parts[b].row(i).end(), out.row(r).begin());
    }
  }
  if (stats) {
    stats->requests += local.requests;
    stats->cache_hits += local.cache_hits;
  }
  return out;
}

}  // namespace nmtune::io
