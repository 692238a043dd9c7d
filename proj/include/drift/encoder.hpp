#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drift {

struct EncoderConfig {
  std::uint32_t hash_dim = 2048;
  std::uint32_t embed_dim = 24;
  std::uint64_t hash_seed = 0;
};

// Row-major hash_dim x embed_dim projection.
struct EncoderParams {
  std::uint32_t hash_dim = 0;
  std::uint32_t embed_dim = 0;
  std::vector<double> projection;

  double& at(std::uint32_t row, std::uint32_t col) { return projection[std::size_t(row) * embed_dim + col]; }
  double at(std::uint32_t row, std::uint32_t col) const { return projection[std::size_t(row) * embed_dim + col]; }
};

// Unit-norm embedding vector.
struct Embedding {
  std::vector<double> v;
};

// Sparse feature vector: (bucket, count) pairs sorted by bucket.
struct SparseFeatures {
  std::vector<std::pair<std::uint32_t, double>> entries;
};

// Gradient with respect to the projection, nonzero rows only.
struct SparseRowGrad {
  std::vector<std::pair<std::uint32_t, std::vector<double>>> rows;
};

// Hashes whitespace tokens with a seeded 64-bit FNV-1a, reduced modulo
// hash_dim, and accumulates counts. Throws EmptyTextError when the text has
// no tokens.
SparseFeatures featurize(std::string_view text, const EncoderConfig& config);

// raw = features^T * projection; returns raw / ||raw||. Throws
// DegenerateEmbeddingError when ||raw|| < 1e-12.
Embedding encode(const EncoderParams& params, const SparseFeatures& features);

double cosine(const Embedding& q, const Embedding& p);

// Exact gradient of the normalized-embedding map composed with the upstream
// gradient; includes the normalization Jacobian (I - e e^T)/||raw||.
SparseRowGrad encode_backward(const EncoderParams& params, const SparseFeatures& features,
                              const std::vector<double>& grad_wrt_embedding);

// Same backward pass accumulating into a dense hash_dim x embed_dim buffer.
void encode_backward_accumulate(const EncoderParams& params, const SparseFeatures& features,
                                const std::vector<double>& grad_wrt_embedding,
                                std::vector<double>& grad_buffer);

// i.i.d. uniform in [-1/sqrt(hash_dim), +1/sqrt(hash_dim)], seeded.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Checkpoint file: header (hash_dim, embed_dim, hash_seed as little-endian
// u64) followed by the projection as row-major little-endian doubles.
void save_checkpoint(const EncoderParams& params, std::uint64_t hash_seed,
                     const std::filesystem::path& path);
std::pair<EncoderParams, std::uint64_t> load_checkpoint(const std::filesystem::path& path);

}  // namespace drift
