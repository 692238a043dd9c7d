#include "drift/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>

#include "drift/errors.hpp"
#include "drift/io.hpp"
#include "drift/rng.hpp"

namespace drift {

namespace {

std::uint64_t token_hash(std::string_view token, std::uint64_t hash_seed) {
  std::uint64_t h = 1469598103934665603ULL ^ (hash_seed * 0x9E3779B97F4A7C15ULL);
  for (const char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// grad_raw = (grad_e - (grad_e . e) e) / ||raw||
std::vector<double> normalization_backward(const EncoderParams& params,
                                           const SparseFeatures& features,
                                           const std::vector<double>& grad_e) {
  const std::uint32_t d = params.embed_dim;
  std::vector<double> raw(d, 0.0);
  for (const auto& [bucket, count] : features.entries) {
    const double* row = &params.projection[std::size_t(bucket) * d];
    for (std::uint32_t j = 0; j < d; ++j) raw[j] += count * row[j];
  }
  double norm_sq = 0.0;
  for (const double x : raw) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) throw DegenerateEmbeddingError("raw embedding norm below 1e-12");
  double dot = 0.0;
  for (std::uint32_t j = 0; j < d; ++j) dot += grad_e[j] * raw[j] / norm;
  std::vector<double> grad_raw(d);
  for (std::uint32_t j = 0; j < d; ++j) {
    grad_raw[j] = (grad_e[j] - dot * raw[j] / norm) / norm;
  }
  return grad_raw;
}

}  // namespace

SparseFeatures featurize(std::string_view text, const EncoderConfig& config) {
  std::map<std::uint32_t, double> counts;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      const std::uint64_t h = token_hash(text.substr(start, i - start), config.hash_seed);
      counts[static_cast<std::uint32_t>(h % config.hash_dim)] += 1.0;
    }
  }
  if (counts.empty()) throw EmptyTextError("no tokens to featurize");
  SparseFeatures features;
  features.entries.assign(counts.begin(), counts.end());
  return features;
}

Embedding encode(const EncoderParams& params, const SparseFeatures& features) {
  const std::uint32_t d = params.embed_dim;
  Embedding e;
  e.v.assign(d, 0.0);
  for (const auto& [bucket, count] : features.entries) {
    const double* row = &params.projection[std::size_t(bucket) * d];
    for (std::uint32_t j = 0; j < d; ++j) e.v[j] += count * row[j];
  }
  double norm_sq = 0.0;
  for (const double x : e.v) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) throw DegenerateEmbeddingError("raw embedding norm below 1e-12");
  for (double& x : e.v) x /= norm;
  return e;
}

double cosine(const Embedding& q, const Embedding& p) {
  double dot = 0.0;
  for (std::size_t j = 0; j < q.v.size(); ++j) dot += q.v[j] * p.v[j];
  return dot;
}

SparseRowGrad encode_backward(const EncoderParams& params, const SparseFeatures& features,
                              const std::vector<double>& grad_wrt_embedding) {
  const std::vector<double> grad_raw = normalization_backward(params, features, grad_wrt_embedding);
  const std::uint32_t d = params.embed_dim;
  SparseRowGrad grad;
  grad.rows.reserve(features.entries.size());
  for (const auto& [bucket, count] : features.entries) {
    std::vector<double> row(d);
    for (std::uint32_t j = 0; j < d; ++j) row[j] = count * grad_raw[j];
    grad.rows.emplace_back(bucket, std::move(row));
  }
  return grad;
}

void encode_backward_accumulate(const EncoderParams& params, const SparseFeatures& features,
                                const std::vector<double>& grad_wrt_embedding,
                                std::vector<double>& grad_buffer) {
  const std::vector<double> grad_raw = normalization_backward(params, features, grad_wrt_embedding);
  const std::uint32_t d = params.embed_dim;
  for (const auto& [bucket, count] : features.entries) {
    double* row = &grad_buffer[std::size_t(bucket) * d];
    for (std::uint32_t j = 0; j < d; ++j) row[j] += count * grad_raw[j];
  }
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  EncoderParams params;
  params.hash_dim = config.hash_dim;
  params.embed_dim = config.embed_dim;
  params.projection.resize(std::size_t(config.hash_dim) * config.embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hash_dim));
  Rng rng(seed);
  for (double& x : params.projection) x = rng.uniform(-bound, bound);
  return params;
}

namespace {

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint64_t get_u64_le(const std::string& data, std::size_t off) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[off + std::size_t(k)])) << (8 * k);
  }
  return v;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, std::uint64_t hash_seed,
                     const std::filesystem::path& path) {
  std::string out;
  out.reserve(24 + params.projection.size() * 8);
  put_u64_le(out, params.hash_dim);
  put_u64_le(out, params.embed_dim);
  put_u64_le(out, hash_seed);
  for (const double x : params.projection) put_u64_le(out, std::bit_cast<std::uint64_t>(x));
  atomic_write_file(path, out);
}

std::pair<EncoderParams, std::uint64_t> load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < 24) throw IoError("checkpoint " + path.string() + " truncated header");
  EncoderParams params;
  params.hash_dim = static_cast<std::uint32_t>(get_u64_le(data, 0));
  params.embed_dim = static_cast<std::uint32_t>(get_u64_le(data, 8));
  const std::uint64_t hash_seed = get_u64_le(data, 16);
  const std::size_t count = std::size_t(params.hash_dim) * params.embed_dim;
  if (data.size() != 24 + count * 8) {
    throw IoError("checkpoint " + path.string() + " has wrong size for its header");
  }
  params.projection.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    params.projection[i] = std::bit_cast<double>(get_u64_le(data, 24 + i * 8));
  }
  return {std::move(params), hash_seed};
}

}  // namespace drift
