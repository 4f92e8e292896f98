#pragma once

// DCGAN-style nets over square RGB images in [-1,1], plus the four model
// bundles built from them (paired, conditioned, encoder-paired, tuple).
// All latent/content/view priors are standard normal.

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgen/nn.hpp"
#include "mvgen/ops.hpp"
#include "mvgen/rng.hpp"

namespace mvgen {

struct ArchConfig {
  int image_size = 32;  // 16, 32 or 64
  int content_dim = 32;
  int view_dim = 8;
  int width = 64;  // feature maps at the largest spatial resolution
  float leaky_slope = 0.2f;
  float bn_momentum = 0.1f;
};

void to_json(nlohmann::json& j, const ArchConfig& c);
void from_json(const nlohmann::json& j, ArchConfig& c);

// latent (N, latent_dim) -> image (N, 3, S, S).
// dense to (width*S/8) x 4 x 4, batchnorm+relu, then fractionally strided
// 4x4 convs doubling resolution (batchnorm+relu between, tanh at the end).
template <typename T>
class GeneratorT {
 public:
  GeneratorT() = default;
  GeneratorT(const ArchConfig& cfg, int latent_dim, ParamSetT<T>& ps, Rng& rng,
             const std::string& prefix);
  TensorT<T> forward(const TensorT<T>& z, bool training);
  int latent_dim() const { return latent_dim_; }

 private:
  struct Bn {
    TensorT<T> gamma, beta, rmean, rvar;
  };
  struct Up {
    TensorT<T> kernel;   // (in, out, 4, 4)
    TensorT<T> bias;     // only on the final stage
    Bn bn;               // absent on the final stage
    bool last = false;
  };
  ArchConfig cfg_;
  int latent_dim_ = 0;
  int ch0_ = 0;
  TensorT<T> dense_w_;
  Bn bn0_;
  std::vector<Up> ups_;
};

// image stack (N, in_channels, S, S) -> (N, out_dim) via strided 4x4 convs.
// bn_first distinguishes the encoder flavor (normalized from the first layer,
// linear output) from the discriminator flavor (raw first layer, sigmoid).
template <typename T>
class DownStackT {
 public:
  DownStackT() = default;
  DownStackT(const ArchConfig& cfg, int in_channels, int out_dim, bool bn_first,
             bool final_sigmoid, ParamSetT<T>& ps, Rng& rng, const std::string& prefix);
  TensorT<T> forward(const TensorT<T>& x, bool training);

 private:
  struct Bn {
    TensorT<T> gamma, beta, rmean, rvar;
  };
  struct Down {
    TensorT<T> kernel;  // (out, in, 4, 4)
    TensorT<T> bias;    // only when no bn follows
    Bn bn;
    bool has_bn = false;
  };
  ArchConfig cfg_;
  int out_dim_ = 0;
  bool final_sigmoid_ = false;
  std::vector<Down> downs_;
  TensorT<T> final_kernel_;  // (out_dim, ch, 4, 4), stride 1, no pad
  TensorT<T> final_bias_;
};

// Shared trunk ending at half resolution, then one 4x4 transposed-conv head
// per output image. All heads consume the same trunk features.
template <typename T>
class MultiHeadGeneratorT {
 public:
  MultiHeadGeneratorT() = default;
  MultiHeadGeneratorT(const ArchConfig& cfg, int latent_dim, int heads, ParamSetT<T>& ps,
                      Rng& rng, const std::string& prefix);
  std::vector<TensorT<T>> forward(const TensorT<T>& z, bool training);
  int latent_dim() const { return trunk_latent_; }
  int heads() const { return static_cast<int>(head_kernels_.size()); }

 private:
  struct Bn {
    TensorT<T> gamma, beta, rmean, rvar;
  };
  ArchConfig cfg_;
  int trunk_latent_ = 0;
  int ch0_ = 0;
  TensorT<T> dense_w_;
  Bn bn0_;
  struct Up {
    TensorT<T> kernel;
    Bn bn;
  };
  std::vector<Up> trunk_;  // every stage batchnorm+relu, ends at S/2
  std::vector<TensorT<T>> head_kernels_, head_biases_;
};

using Generator = GeneratorT<float>;
using DownStack = DownStackT<float>;
using MultiHeadGenerator = MultiHeadGeneratorT<float>;

// (n, dim) of N(0,1) draws.
Tensor sample_normal(Rng& rng, int n, int dim);

// Paired model: G(content, view) vs a discriminator over image pairs that
// share an underlying object.
struct GmvModel {
  ArchConfig cfg;
  ParamSet pg, pd;
  Generator gen;
  DownStack disc;  // 6 input channels (pair)
  GmvModel(const ArchConfig& c, uint64_t seed);
  GmvModel(const GmvModel&) = delete;
  GmvModel& operator=(const GmvModel&) = delete;
};

// Encoder-paired model: adds E mapping images to content codes; the
// generator is driven by E(x) instead of a sampled content vector.
struct CgmvModel {
  ArchConfig cfg;
  ParamSet pg, pd, pe;
  Generator gen;
  DownStack disc;  // pair discriminator, 6 channels
  DownStack enc;   // image -> content code
  CgmvModel(const ArchConfig& c, uint64_t seed);
  CgmvModel(const CgmvModel&) = delete;
  CgmvModel& operator=(const CgmvModel&) = delete;
};

// Conditional baseline: G(E(y), view) with a discriminator that sees the
// candidate image stacked on its conditioning image.
struct CganModel {
  ArchConfig cfg;
  ParamSet pg, pd, pe;
  Generator gen;
  DownStack disc;  // 6 channels: target + condition
  DownStack enc;
  CganModel(const ArchConfig& c, uint64_t seed);
  CganModel(const CganModel&) = delete;
  CganModel& operator=(const CganModel&) = delete;
};

// Tuple baseline: one latent generates K images jointly; the discriminator
// sees all K stacked (3K channels).
struct TupleGanModel {
  ArchConfig cfg;
  int k;
  ParamSet pg, pd;
  MultiHeadGenerator gen;
  DownStack disc;
  TupleGanModel(const ArchConfig& c, int k, uint64_t seed);
  TupleGanModel(const TupleGanModel&) = delete;
  TupleGanModel& operator=(const TupleGanModel&) = delete;
};

}  // namespace mvgen
