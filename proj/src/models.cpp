#include "mvgen/models.hpp"

#include <cmath>
#include <stdexcept>

namespace mvgen {

namespace {

constexpr float kInitStd = 0.02f;
constexpr float kBnEps = 1e-5f;

int stages_for(int image_size) {
  switch (image_size) {
    case 16: return 2;
    case 32: return 3;
    case 64: return 4;
    default: throw std::invalid_argument("image_size must be 16, 32 or 64");
  }
}

template <typename T>
TensorT<T> make_weight(ParamSetT<T>& ps, Rng& rng, const std::string& name,
                       std::vector<int> shape) {
  auto t = ps.add(name, TensorT<T>::zeros(std::move(shape)));
  init_normal(t, rng, static_cast<T>(kInitStd));
  return t;
}

template <typename T>
TensorT<T> make_bias(ParamSetT<T>& ps, const std::string& name, int n) {
  return ps.add(name, TensorT<T>::zeros({n}));
}

}  // namespace

void to_json(nlohmann::json& j, const ArchConfig& c) {
  j = {{"image_size", c.image_size}, {"content_dim", c.content_dim},
       {"view_dim", c.view_dim},     {"width", c.width},
       {"leaky_slope", c.leaky_slope}, {"bn_momentum", c.bn_momentum}};
}

void from_json(const nlohmann::json& j, ArchConfig& c) {
  c.image_size = j.at("image_size").get<int>();
  c.content_dim = j.at("content_dim").get<int>();
  c.view_dim = j.at("view_dim").get<int>();
  c.width = j.at("width").get<int>();
  c.leaky_slope = j.value("leaky_slope", 0.2f);
  c.bn_momentum = j.value("bn_momentum", 0.1f);
}

namespace {

template <typename T>
void make_bn(ParamSetT<T>& ps, const std::string& prefix, int c,
             TensorT<T>& gamma, TensorT<T>& beta, TensorT<T>& rmean, TensorT<T>& rvar) {
  gamma = ps.add(prefix + ".gamma", TensorT<T>::zeros({c}));
  init_constant(gamma, T(1));
  beta = ps.add(prefix + ".beta", TensorT<T>::zeros({c}));
  rmean = ps.add(prefix + ".rmean", TensorT<T>::zeros({c}), /*trainable=*/false);
  rvar = ps.add(prefix + ".rvar", TensorT<T>::zeros({c}), /*trainable=*/false);
  init_constant(rvar, T(1));
}

}  // namespace

template <typename T>
GeneratorT<T>::GeneratorT(const ArchConfig& cfg, int latent_dim, ParamSetT<T>& ps, Rng& rng,
                          const std::string& prefix)
    : cfg_(cfg), latent_dim_(latent_dim) {
  int stages = stages_for(cfg.image_size);
  ch0_ = cfg.width << (stages - 1);
  dense_w_ = make_weight(ps, rng, prefix + ".dense.w", {latent_dim, ch0_ * 4 * 4});
  make_bn(ps, prefix + ".bn0", ch0_, bn0_.gamma, bn0_.beta, bn0_.rmean, bn0_.rvar);
  int ch = ch0_;
  for (int s = 0; s < stages; ++s) {
    Up up;
    up.last = (s == stages - 1);
    int out_ch = up.last ? 3 : ch / 2;
    std::string p = prefix + ".up" + std::to_string(s);
    up.kernel = make_weight(ps, rng, p + ".k", {ch, out_ch, 4, 4});
    if (up.last)
      up.bias = make_bias(ps, p + ".b", out_ch);
    else
      make_bn(ps, p + ".bn", out_ch, up.bn.gamma, up.bn.beta, up.bn.rmean, up.bn.rvar);
    ups_.push_back(std::move(up));
    ch = out_ch;
  }
}

template <typename T>
TensorT<T> GeneratorT<T>::forward(const TensorT<T>& z, bool training) {
  if (z.shape().size() != 2 || z.dim(1) != latent_dim_)
    throw std::invalid_argument("generator: latent must be (N, " + std::to_string(latent_dim_) + ")");
  int n = z.dim(0);
  auto h = reshape(matmul(z, dense_w_), {n, ch0_, 4, 4});
  h = relu(batch_norm(h, bn0_.gamma, bn0_.beta, bn0_.rmean, bn0_.rvar, training,
                      static_cast<T>(cfg_.bn_momentum), static_cast<T>(kBnEps)));
  for (auto& up : ups_) {
    h = conv_transpose2d(h, up.kernel, 2, 1);
    if (up.last) {
      h = tanh_op(add_bias(h, up.bias));
    } else {
      h = relu(batch_norm(h, up.bn.gamma, up.bn.beta, up.bn.rmean, up.bn.rvar, training,
                          static_cast<T>(cfg_.bn_momentum), static_cast<T>(kBnEps)));
    }
  }
  return h;
}

template <typename T>
DownStackT<T>::DownStackT(const ArchConfig& cfg, int in_channels, int out_dim, bool bn_first,
                          bool final_sigmoid, ParamSetT<T>& ps, Rng& rng,
                          const std::string& prefix)
    : cfg_(cfg), out_dim_(out_dim), final_sigmoid_(final_sigmoid) {
  int stages = stages_for(cfg.image_size);
  int ch_in = in_channels;
  int ch_out = cfg.width;
  for (int s = 0; s < stages; ++s) {
    Down d;
    std::string p = prefix + ".down" + std::to_string(s);
    d.kernel = make_weight(ps, rng, p + ".k", {ch_out, ch_in, 4, 4});
    d.has_bn = bn_first || s > 0;
    if (d.has_bn)
      make_bn(ps, p + ".bn", ch_out, d.bn.gamma, d.bn.beta, d.bn.rmean, d.bn.rvar);
    else
      d.bias = make_bias(ps, p + ".b", ch_out);
    downs_.push_back(std::move(d));
    ch_in = ch_out;
    ch_out *= 2;
  }
  final_kernel_ = make_weight(ps, rng, prefix + ".final.k", {out_dim, ch_in, 4, 4});
  final_bias_ = make_bias(ps, prefix + ".final.b", out_dim);
}

template <typename T>
TensorT<T> DownStackT<T>::forward(const TensorT<T>& x, bool training) {
  if (x.shape().size() != 4 || x.dim(2) != cfg_.image_size || x.dim(3) != cfg_.image_size)
    throw std::invalid_argument("stack: input must be (N, C, S, S)");
  auto h = x;
  for (auto& d : downs_) {
    h = conv2d(h, d.kernel, 2, 1);
    if (d.has_bn)
      h = batch_norm(h, d.bn.gamma, d.bn.beta, d.bn.rmean, d.bn.rvar, training,
                     static_cast<T>(cfg_.bn_momentum), static_cast<T>(kBnEps));
    else
      h = add_bias(h, d.bias);
    h = leaky_relu(h, static_cast<T>(cfg_.leaky_slope));
  }
  h = add_bias(conv2d(h, final_kernel_, 1, 0), final_bias_);  // (N, out, 1, 1)
  h = reshape(h, {x.dim(0), out_dim_});
  return final_sigmoid_ ? sigmoid(h) : h;
}

template <typename T>
MultiHeadGeneratorT<T>::MultiHeadGeneratorT(const ArchConfig& cfg, int latent_dim, int heads,
                                            ParamSetT<T>& ps, Rng& rng, const std::string& prefix)
    : cfg_(cfg), trunk_latent_(latent_dim) {
  int stages = stages_for(cfg.image_size);
  ch0_ = cfg.width << (stages - 1);
  dense_w_ = make_weight(ps, rng, prefix + ".dense.w", {latent_dim, ch0_ * 4 * 4});
  make_bn(ps, prefix + ".bn0", ch0_, bn0_.gamma, bn0_.beta, bn0_.rmean, bn0_.rvar);
  int ch = ch0_;
  for (int s = 0; s < stages - 1; ++s) {
    Up up;
    std::string p = prefix + ".up" + std::to_string(s);
    int out_ch = ch / 2;
    up.kernel = make_weight(ps, rng, p + ".k", {ch, out_ch, 4, 4});
    make_bn(ps, p + ".bn", out_ch, up.bn.gamma, up.bn.beta, up.bn.rmean, up.bn.rvar);
    trunk_.push_back(std::move(up));
    ch = out_ch;
  }
  for (int hid = 0; hid < heads; ++hid) {
    std::string p = prefix + ".head" + std::to_string(hid);
    head_kernels_.push_back(make_weight(ps, rng, p + ".k", {ch, 3, 4, 4}));
    head_biases_.push_back(make_bias(ps, p + ".b", 3));
  }
}

template <typename T>
std::vector<TensorT<T>> MultiHeadGeneratorT<T>::forward(const TensorT<T>& z, bool training) {
  if (z.shape().size() != 2 || z.dim(1) != trunk_latent_)
    throw std::invalid_argument("multi-head generator: latent must be (N, " +
                                std::to_string(trunk_latent_) + ")");
  int n = z.dim(0);
  auto h = reshape(matmul(z, dense_w_), {n, ch0_, 4, 4});
  h = relu(batch_norm(h, bn0_.gamma, bn0_.beta, bn0_.rmean, bn0_.rvar, training,
                      static_cast<T>(cfg_.bn_momentum), static_cast<T>(kBnEps)));
  for (auto& up : trunk_) {
    h = conv_transpose2d(h, up.kernel, 2, 1);
    h = relu(batch_norm(h, up.bn.gamma, up.bn.beta, up.bn.rmean, up.bn.rvar, training,
                        static_cast<T>(cfg_.bn_momentum), static_cast<T>(kBnEps)));
  }
  std::vector<TensorT<T>> out;
  out.reserve(head_kernels_.size());
  for (size_t i = 0; i < head_kernels_.size(); ++i)
    out.push_back(tanh_op(add_bias(conv_transpose2d(h, head_kernels_[i], 2, 1), head_biases_[i])));
  return out;
}

template class GeneratorT<float>;
template class DownStackT<float>;
template class MultiHeadGeneratorT<float>;

Tensor sample_normal(Rng& rng, int n, int dim) {
  std::vector<float> v(static_cast<size_t>(n) * dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor::from({n, dim}, std::move(v));
}

GmvModel::GmvModel(const ArchConfig& c, uint64_t seed) : cfg(c) {
  Rng root(seed);
  Rng rg = root.substream("gen"), rd = root.substream("disc");
  gen = Generator(cfg, cfg.content_dim + cfg.view_dim, pg, rg, "g");
  disc = DownStack(cfg, 6, 1, /*bn_first=*/false, /*final_sigmoid=*/true, pd, rd, "d");
}

CgmvModel::CgmvModel(const ArchConfig& c, uint64_t seed) : cfg(c) {
  Rng root(seed);
  Rng rg = root.substream("gen"), rd = root.substream("disc"), re = root.substream("enc");
  gen = Generator(cfg, cfg.content_dim + cfg.view_dim, pg, rg, "g");
  disc = DownStack(cfg, 6, 1, false, true, pd, rd, "d");
  enc = DownStack(cfg, 3, cfg.content_dim, /*bn_first=*/true, /*final_sigmoid=*/false, pe, re, "e");
}

CganModel::CganModel(const ArchConfig& c, uint64_t seed) : cfg(c) {
  Rng root(seed);
  Rng rg = root.substream("gen"), rd = root.substream("disc"), re = root.substream("enc");
  gen = Generator(cfg, cfg.content_dim + cfg.view_dim, pg, rg, "g");
  disc = DownStack(cfg, 6, 1, false, true, pd, rd, "d");
  enc = DownStack(cfg, 3, cfg.content_dim, true, false, pe, re, "e");
}

TupleGanModel::TupleGanModel(const ArchConfig& c, int k_, uint64_t seed) : cfg(c), k(k_) {
  if (k_ < 2) throw std::invalid_argument("tuple model needs k >= 2");
  Rng root(seed);
  Rng rg = root.substream("gen"), rd = root.substream("disc");
  gen = MultiHeadGenerator(cfg, cfg.content_dim + cfg.view_dim, k, pg, rg, "g");
  disc = DownStack(cfg, 3 * k, 1, false, true, pd, rd, "d");
}

}  // namespace mvgen
