#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "nmtune/io/config.hpp"
#include "nmtune/matrix.hpp"

namespace nmtune::io {

struct FetchStats {
  std::size_t requests = 0;    ///< HTTP attempts, retries included
  std::size_t cache_hits = 0;  ///< batches served from disk
};

/// POSTs {"inputs": [...]} batches to the endpoint and stacks the returned
/// {"embeddings": [[...], ...]} rows in input order. Each batch is cached as
/// an FMAT file named by SHA-256 of (endpoint, batch) under `cache_dir`, so
/// repeated calls make no requests. Transport errors and 5xx/429 responses
/// are retried with exponential backoff; anything else fails at once.
Matrix fetch_embeddings(const ProviderConfig& cfg, const std::vector<std::string>& inputs,
                        const std::filesystem::path& cache_dir, FetchStats* stats = nullptr);

/// The endpoint in effect: the env override when set, else cfg.endpoint.
std::string resolve_endpoint(const ProviderConfig& cfg);

/// Cache key of one batch.
std::string batch_key(const std::string& endpoint, const std::vector<std::string>& batch);

}  // namespace nmtune::io
