#include "mvgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "mvgen/train.hpp"

namespace mvgen {

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = {{"width", c.width}, {"embed_dim", c.embed_dim},
       {"steps", c.steps}, {"batch", c.batch},
       {"lr", c.lr},       {"seed", c.seed},
       {"attr_objects", c.attr_objects}, {"attr_views", c.attr_views}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  c.width = j.at("width").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.steps = j.at("steps").get<int>();
  c.batch = j.at("batch").get<int>();
  c.lr = j.at("lr").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.attr_objects = j.at("attr_objects").get<int>();
  c.attr_views = j.at("attr_views").get<int>();
}

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"n_pairs", c.n_pairs},
       {"n_images", c.n_images},
       {"classifier", c.classifier},
       {"min_attr_accuracy", c.min_attr_accuracy},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
  c.n_pairs = j.at("n_pairs").get<int>();
  c.n_images = j.at("n_images").get<int>();
  c.classifier = j.at("classifier").get<ClassifierConfig>();
  c.min_attr_accuracy = j.at("min_attr_accuracy").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
}

namespace {

constexpr int kInferBatch = 128;

size_t test_index(const Dataset& ds, int object, int view) {
  return ds.train_count() + static_cast<size_t>(object) * ds.cfg.views_per_test + view;
}

Tensor rows_slice(const Tensor& t, int start, int count) {
  auto sh = t.shape();
  size_t row = t.numel() / static_cast<size_t>(sh[0]);
  const auto& v = t.value();
  std::vector<float> buf(v.begin() + start * row, v.begin() + (start + count) * row);
  sh[0] = count;
  return Tensor::from(sh, std::move(buf));
}

// out row i = heads[which[i]] row i
Tensor gather_rows(const std::vector<Tensor>& heads, const std::vector<int>& which) {
  auto sh = heads[0].shape();
  size_t row = heads[0].numel() / static_cast<size_t>(sh[0]);
  sh[0] = static_cast<int>(which.size());
  std::vector<float> buf(row * which.size());
  for (size_t i = 0; i < which.size(); ++i) {
    const auto& src = heads[which[i]].value();
    std::copy(src.begin() + i * row, src.begin() + (i + 1) * row, buf.begin() + i * row);
  }
  return Tensor::from(sh, std::move(buf));
}

std::vector<double> row_distances(const Tensor& a, const Tensor& b) {
  int n = a.shape()[0];
  size_t d = a.numel() / static_cast<size_t>(n);
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (size_t j = 0; j < d; ++j) {
      double diff = static_cast<double>(av[i * d + j]) - static_cast<double>(bv[i * d + j]);
      s += diff * diff;
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

double label_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  size_t hit = 0;
  for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::vector<size_t> all_train_indices(const Dataset& ds) {
  std::vector<size_t> idx(ds.train_count());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

std::vector<size_t> all_test_indices(const Dataset& ds) {
  std::vector<size_t> idx(ds.test_count());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = ds.train_count() + i;
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------
// re-identification embedder

ReidEmbedder::ReidEmbedder(int image_size, int width, int embed_dim, int num_classes,
                           uint64_t seed)
    : num_classes_(num_classes) {
  ArchConfig a;
  a.image_size = image_size;
  a.width = width;
  Rng rng(seed);
  Rng rt = rng.substream("trunk");
  trunk_ = DownStack(a, 3, embed_dim, /*bn_first=*/true, /*final_sigmoid=*/false, ps, rt, "r");
  head_w_ = ps.add("head.w", Tensor::zeros({embed_dim, num_classes}));
  head_b_ = ps.add("head.b", Tensor::zeros({num_classes}));
  Rng rh = rng.substream("head");
  init_normal(head_w_, rh, 0.02f);
}

Tensor ReidEmbedder::logits(const Tensor& images, bool training) {
  auto e = trunk_.forward(images, training);
  return add_bias(matmul(e, head_w_), head_b_);
}

Tensor ReidEmbedder::embed(const Tensor& images) {
  NoGradGuard ng;
  int n = images.shape()[0];
  std::vector<float> buf;
  buf.reserve(static_cast<size_t>(n) * head_w_.shape()[0]);
  for (int at = 0; at < n; at += kInferBatch) {
    int c = std::min(kInferBatch, n - at);
    auto e = trunk_.forward(rows_slice(images, at, c), false);
    const auto& v = e.value();
    buf.insert(buf.end(), v.begin(), v.end());
  }
  int dim = head_w_.shape()[0];
  return Tensor::from({n, dim}, std::move(buf));
}

std::vector<int> ReidEmbedder::classify(const Tensor& images) {
  NoGradGuard ng;
  int n = images.shape()[0];
  std::vector<int> out;
  out.reserve(n);
  for (int at = 0; at < n; at += kInferBatch) {
    int c = std::min(kInferBatch, n - at);
    auto lg = logits(rows_slice(images, at, c), false);
    auto part = argmax_rows(lg);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

namespace {

ReidEmbedder train_object_classifier(const Dataset& ds, const std::vector<size_t>& indices,
                                     const std::vector<int>& labels, int num_classes,
                                     const ClassifierConfig& cfg, const char* tag) {
  if (indices.empty()) throw std::invalid_argument("object classifier: empty training set");
  ReidEmbedder emb(ds.cfg.image_size, cfg.width, cfg.embed_dim, num_classes, cfg.seed);
  Rng rng = Rng(cfg.seed).substream(tag);
  const int b = std::min<int>(cfg.batch, static_cast<int>(indices.size()));
  for (int step = 0; step < cfg.steps; ++step) {
    emb.ps.zero_grads();
    std::vector<size_t> pick(b);
    std::vector<int> lab(b);
    for (int i = 0; i < b; ++i) {
      size_t r = rng.uniform_int(indices.size());
      pick[i] = indices[r];
      lab[i] = labels[r];
    }
    auto loss = softmax_cross_entropy(emb.logits(image_batch(ds, pick), true), lab);
    loss.backward();
    adam_step(emb.ps, {cfg.lr, 0.9, 0.999, 1e-8});
  }
  auto pred = emb.classify(image_batch(ds, indices));
  emb.train_accuracy = label_accuracy(pred, labels);
  return emb;
}

// Cache entries are keyed by the full (dataset, classifier) config pair; the
// hash only names the file, the stored key decides whether it may be reused.
std::string cache_file(const std::string& dir, const char* kind, const nlohmann::json& key) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::hash<std::string>{}(key.dump())));
  return dir + "/" + kind + "_" + buf + ".ckpt";
}

}  // namespace

ReidEmbedder train_reid_embedder(const Dataset& ds, const ClassifierConfig& cfg,
                                 const std::string& cache_dir) {
  nlohmann::json key{{"dataset", ds.cfg}, {"classifier", cfg}, {"net", "reid"}};
  std::string path;
  if (!cache_dir.empty()) {
    path = cache_file(cache_dir, "reid", key);
    if (std::filesystem::exists(path)) {
      try {
        ReidEmbedder emb(ds.cfg.image_size, cfg.width, cfg.embed_dim, ds.cfg.train_objects,
                         cfg.seed);
        auto meta = load_checkpoint(path, emb.ps);
        if (meta.at("key") == key) {
          emb.train_accuracy = meta.at("train_accuracy").get<double>();
          return emb;
        }
      } catch (const std::exception&) {
        // stale or foreign file: fall through and retrain over it
      }
    }
  }
  auto idx = all_train_indices(ds);
  std::vector<int> labels(idx.size());
  for (size_t i = 0; i < idx.size(); ++i)
    labels[i] = static_cast<int>(ds.records[idx[i]].object_id);
  ReidEmbedder emb =
      train_object_classifier(ds, idx, labels, ds.cfg.train_objects, cfg, "reid");
  if (!path.empty()) {
    std::filesystem::create_directories(cache_dir);
    save_checkpoint(path, {{"key", key}, {"train_accuracy", emb.train_accuracy}}, emb.ps);
  }
  return emb;
}

// ---------------------------------------------------------------------------
// attribute classifiers

namespace {

constexpr float kAttrInitStd = 0.02f;
constexpr float kAttrBnEps = 1e-5f;
constexpr float kAttrBnMomentum = 0.1f;
constexpr float kAttrLeakySlope = 0.2f;

int attr_stages_for(int image_size) {
  switch (image_size) {
    case 16: return 2;
    case 32: return 3;
    case 64: return 4;
    default: throw std::invalid_argument("image_size must be 16, 32 or 64");
  }
}

Tensor attr_weight(ParamSet& ps, Rng& rng, const std::string& name, std::vector<int> shape) {
  auto t = ps.add(name, Tensor::zeros(std::move(shape)));
  init_normal(t, rng, kAttrInitStd);
  return t;
}

void attr_bn(ParamSet& ps, const std::string& prefix, int c, Tensor& gamma, Tensor& beta,
             Tensor& rmean, Tensor& rvar) {
  gamma = ps.add(prefix + ".gamma", Tensor::zeros({c}));
  init_constant(gamma, 1.f);
  beta = ps.add(prefix + ".beta", Tensor::zeros({c}));
  rmean = ps.add(prefix + ".rmean", Tensor::zeros({c}), /*trainable=*/false);
  rvar = ps.add(prefix + ".rvar", Tensor::zeros({c}), /*trainable=*/false);
  init_constant(rvar, 1.f);
}

}  // namespace

AttributeClassifiers::AttributeClassifiers(int image_size, int width, uint64_t seed)
    : image_size_(image_size) {
  Rng rng(seed);
  Rng rt = rng.substream("attr");
  int stages = attr_stages_for(image_size);
  int ch_in = 3;
  int ch_out = width;
  for (int s = 0; s < stages; ++s) {
    Stage st;
    std::string p = "a.stage" + std::to_string(s);
    st.refine_k = attr_weight(ps, rt, p + ".refine.k", {ch_out, ch_in, 3, 3});
    attr_bn(ps, p + ".rbn", ch_out, st.rbn.gamma, st.rbn.beta, st.rbn.rmean, st.rbn.rvar);
    st.down_k = attr_weight(ps, rt, p + ".down.k", {ch_out, ch_out, 4, 4});
    attr_bn(ps, p + ".dbn", ch_out, st.dbn.gamma, st.dbn.beta, st.dbn.rmean, st.dbn.rvar);
    stages_.push_back(std::move(st));
    ch_in = ch_out;
    ch_out *= 2;
  }
  final_k_ = attr_weight(ps, rt, "a.final.k", {kNumAttributes, ch_in, 4, 4});
  final_b_ = ps.add("a.final.b", Tensor::zeros({kNumAttributes}));
}

Tensor AttributeClassifiers::forward(const Tensor& images, bool training) {
  if (images.shape().size() != 4 || images.dim(2) != image_size_ || images.dim(3) != image_size_)
    throw std::invalid_argument("attribute classifiers: input must be (N, C, S, S)");
  auto h = images;
  for (auto& st : stages_) {
    h = conv2d(h, st.refine_k, 1, 1);
    h = batch_norm(h, st.rbn.gamma, st.rbn.beta, st.rbn.rmean, st.rbn.rvar, training,
                   kAttrBnMomentum, kAttrBnEps);
    h = leaky_relu(h, kAttrLeakySlope);
    h = conv2d(h, st.down_k, 2, 1);
    h = batch_norm(h, st.dbn.gamma, st.dbn.beta, st.dbn.rmean, st.dbn.rvar, training,
                   kAttrBnMomentum, kAttrBnEps);
    h = leaky_relu(h, kAttrLeakySlope);
  }
  h = add_bias(conv2d(h, final_k_, 1, 0), final_b_);  // (N, 10, 1, 1)
  h = reshape(h, {images.dim(0), kNumAttributes});
  return sigmoid(h);
}

std::vector<std::array<float, kNumAttributes>> AttributeClassifiers::predict(
    const Tensor& images) {
  NoGradGuard ng;
  int n = images.shape()[0];
  std::vector<std::array<float, kNumAttributes>> out(n);
  for (int at = 0; at < n; at += kInferBatch) {
    int c = std::min(kInferBatch, n - at);
    auto p = forward(rows_slice(images, at, c), false);
    const auto& v = p.value();
    for (int i = 0; i < c; ++i)
      for (int k = 0; k < kNumAttributes; ++k) out[at + i][k] = v[i * kNumAttributes + k];
  }
  return out;
}

std::vector<uint16_t> AttributeClassifiers::predict_bits(const Tensor& images) {
  auto probs = predict(images);
  std::vector<uint16_t> out(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    uint16_t bits = 0;
    for (int k = 0; k < kNumAttributes; ++k)
      if (probs[i][k] > 0.5f) bits |= static_cast<uint16_t>(1u << k);
    out[i] = bits;
  }
  return out;
}

static void check_attr_gate(const std::array<double, kNumAttributes>& acc, double min_accuracy) {
  for (int k = 0; k < kNumAttributes; ++k)
    if (acc[k] < min_accuracy)
      throw std::runtime_error(std::string("attribute classifier '") + attribute_name(k) +
                               "' held-out accuracy " + std::to_string(acc[k]) + " below " +
                               std::to_string(min_accuracy));
}

AttributeClassifiers train_attribute_classifiers(const Dataset& ds, const ClassifierConfig& cfg,
                                                 double min_accuracy,
                                                 const std::string& cache_dir) {
  if (ds.train_count() == 0) throw std::invalid_argument("attribute classifiers: empty train split");

  nlohmann::json key{{"dataset", ds.cfg}, {"classifier", cfg}, {"net", "attr"}};
  std::string path;
  if (!cache_dir.empty()) {
    path = cache_file(cache_dir, "attr", key);
    if (std::filesystem::exists(path)) {
      AttributeClassifiers cached(ds.cfg.image_size, cfg.width, cfg.seed);
      bool loaded = false;
      try {
        auto meta = load_checkpoint(path, cached.ps);
        if (meta.at("key") == key) {
          auto acc = meta.at("holdout_accuracy").get<std::vector<double>>();
          if (acc.size() == kNumAttributes) {
            std::copy(acc.begin(), acc.end(), cached.holdout_accuracy.begin());
            loaded = true;
          }
        }
      } catch (const std::exception&) {
        // stale or foreign file: fall through and retrain over it
      }
      if (loaded) {
        check_attr_gate(cached.holdout_accuracy, min_accuracy);  // gate still applies
        return cached;
      }
    }
  }

  // Shape kind, hue and aspect are constant across an object's views, so a
  // trunk trained on few objects shortcuts them by memorizing identities (hue
  // alone nearly indexes an object). A disposable corpus with many more
  // objects from the same renderer distribution removes the shortcut.
  Dataset corpus;
  const Dataset* src = &ds;
  if (cfg.attr_objects > 0) {
    if (cfg.attr_objects < 24 || cfg.attr_views < 2)
      throw std::invalid_argument("attr corpus needs >= 24 objects and >= 2 views");
    DatasetConfig aux = ds.cfg;
    aux.num_objects = cfg.attr_objects;
    aux.train_objects = cfg.attr_objects - std::max(16, cfg.attr_objects / 12);
    aux.views_per_train = cfg.attr_views;
    aux.views_per_test = cfg.attr_views;
    aux.seed = ds.cfg.seed ^ 0x0a77c0de0a77c0deULL;  // disjoint object stream
    corpus = generate_dataset(aux);
    src = &corpus;
  }
  const Dataset& tds = *src;
  const size_t n_train = tds.train_count();

  // refuse single-class attributes outright: nothing to learn from
  std::array<size_t, kNumAttributes> positives{};
  std::vector<size_t> blur_pool;
  for (size_t i = 0; i < n_train; ++i) {
    uint16_t bits = attribute_bits(tds.records[i].factors);
    for (int k = 0; k < kNumAttributes; ++k) positives[k] += (bits >> k) & 1u;
    if (tds.records[i].factors.blurred) blur_pool.push_back(i);
  }
  for (int k = 0; k < kNumAttributes; ++k)
    if (positives[k] == 0 || positives[k] == n_train)
      throw std::runtime_error(std::string("attribute '") + attribute_name(k) +
                               "' is single-class on the training images");

  AttributeClassifiers ac(tds.cfg.image_size, cfg.width, cfg.seed);
  Rng rng = Rng(cfg.seed).substream("attr_train");
  const int b = std::min<int>(cfg.batch, static_cast<int>(n_train));
  for (int step = 0; step < cfg.steps; ++step) {
    ac.ps.zero_grads();
    std::vector<size_t> pick(b);
    for (int i = 0; i < b; ++i) {
      // oversample the rare blur positives so that head sees both classes often
      bool from_pool = !blur_pool.empty() && rng.bernoulli(0.25);
      pick[i] = from_pool ? blur_pool[rng.uniform_int(blur_pool.size())]
                          : rng.uniform_int(n_train);
    }
    std::vector<float> target(static_cast<size_t>(b) * kNumAttributes);
    for (int i = 0; i < b; ++i) {
      uint16_t bits = attribute_bits(tds.records[pick[i]].factors);
      for (int k = 0; k < kNumAttributes; ++k)
        target[static_cast<size_t>(i) * kNumAttributes + k] = static_cast<float>((bits >> k) & 1u);
    }
    auto pred = ac.forward(image_batch(tds, pick), true);
    auto loss = bce_loss(pred, Tensor::from({b, kNumAttributes}, std::move(target)));
    loss.backward();
    adam_step(ac.ps, {cfg.lr, 0.9, 0.999, 1e-8});
  }

  // gate every head on held-out-object accuracy
  auto tidx = all_test_indices(tds);
  auto probs = ac.predict(image_batch(tds, tidx));
  std::array<size_t, kNumAttributes> hits{};
  for (size_t i = 0; i < tidx.size(); ++i) {
    uint16_t bits = attribute_bits(tds.records[tidx[i]].factors);
    for (int k = 0; k < kNumAttributes; ++k)
      hits[k] += (probs[i][k] > 0.5f) == (((bits >> k) & 1u) != 0);
  }
  for (int k = 0; k < kNumAttributes; ++k)
    ac.holdout_accuracy[k] = static_cast<double>(hits[k]) / static_cast<double>(tidx.size());
  if (!path.empty()) {
    // cache before gating so a stricter caller can still reuse the weights
    std::filesystem::create_directories(cache_dir);
    save_checkpoint(path, {{"key", key},
                           {"holdout_accuracy", std::vector<double>(ac.holdout_accuracy.begin(),
                                                                    ac.holdout_accuracy.end())}},
                    ac.ps);
  }
  check_attr_gate(ac.holdout_accuracy, min_accuracy);
  return ac;
}

// ---------------------------------------------------------------------------
// pair sources

PairSource real_pair_source(const Dataset& ds) {
  const int T = ds.cfg.num_objects - ds.cfg.train_objects;
  const int V = ds.cfg.views_per_test;
  if (T < 2 || V < 2) throw std::invalid_argument("real pairs need >= 2 test objects and views");
  PairSource s;
  s.positive = [&ds, T, V](Rng& rng, int n, Tensor& a, Tensor& b) {
    std::vector<size_t> ia(n), ib(n);
    for (int i = 0; i < n; ++i) {
      int o = static_cast<int>(rng.uniform_int(T));
      int v1 = static_cast<int>(rng.uniform_int(V));
      int v2 = static_cast<int>(rng.uniform_int(V - 1));
      if (v2 >= v1) ++v2;
      ia[i] = test_index(ds, o, v1);
      ib[i] = test_index(ds, o, v2);
    }
    a = image_batch(ds, ia);
    b = image_batch(ds, ib);
  };
  s.negative = [&ds, T, V](Rng& rng, int n, Tensor& a, Tensor& b) {
    std::vector<size_t> ia(n), ib(n);
    for (int i = 0; i < n; ++i) {
      int o1 = static_cast<int>(rng.uniform_int(T));
      int o2 = static_cast<int>(rng.uniform_int(T - 1));
      if (o2 >= o1) ++o2;
      ia[i] = test_index(ds, o1, static_cast<int>(rng.uniform_int(V)));
      ib[i] = test_index(ds, o2, static_cast<int>(rng.uniform_int(V)));
    }
    a = image_batch(ds, ia);
    b = image_batch(ds, ib);
  };
  return s;
}

PairSource gmv_pair_source(GmvModel& m) {
  PairSource s;
  s.positive = [&m](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    Tensor c = sample_normal(rng, n, m.cfg.content_dim);
    Tensor v1 = sample_normal(rng, n, m.cfg.view_dim);
    Tensor v2 = sample_normal(rng, n, m.cfg.view_dim);
    a = m.gen.forward(concat_channels(c, v1), false);
    b = m.gen.forward(concat_channels(c, v2), false);
  };
  s.negative = [&m](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    Tensor c1 = sample_normal(rng, n, m.cfg.content_dim);
    Tensor c2 = sample_normal(rng, n, m.cfg.content_dim);
    Tensor v1 = sample_normal(rng, n, m.cfg.view_dim);
    Tensor v2 = sample_normal(rng, n, m.cfg.view_dim);
    a = m.gen.forward(concat_channels(c1, v1), false);
    b = m.gen.forward(concat_channels(c2, v2), false);
  };
  return s;
}

PairSource tuple_pair_source(TupleGanModel& m) {
  if (m.k < 2) throw std::invalid_argument("tuple pairs need k >= 2");
  PairSource s;
  const int k = m.k;
  s.positive = [&m, k](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    auto z = sample_normal(rng, n, m.gen.latent_dim());
    auto heads = m.gen.forward(z, false);
    std::vector<int> h1(n), h2(n);
    for (int i = 0; i < n; ++i) {
      h1[i] = static_cast<int>(rng.uniform_int(k));
      h2[i] = static_cast<int>(rng.uniform_int(k - 1));
      if (h2[i] >= h1[i]) ++h2[i];
    }
    a = gather_rows(heads, h1);
    b = gather_rows(heads, h2);
  };
  s.negative = [&m, k](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    auto z1 = sample_normal(rng, n, m.gen.latent_dim());
    auto z2 = sample_normal(rng, n, m.gen.latent_dim());
    auto heads1 = m.gen.forward(z1, false);
    auto heads2 = m.gen.forward(z2, false);
    std::vector<int> h1(n), h2(n);
    for (int i = 0; i < n; ++i) {
      h1[i] = static_cast<int>(rng.uniform_int(k));
      h2[i] = static_cast<int>(rng.uniform_int(k));
    }
    a = gather_rows(heads1, h1);
    b = gather_rows(heads2, h2);
  };
  return s;
}

namespace {

// a test-split image batch plus the drawn record indices
Tensor random_test_batch(const Dataset& ds, Rng& rng, int n, std::vector<int>* objects) {
  const int T = ds.cfg.num_objects - ds.cfg.train_objects;
  const int V = ds.cfg.views_per_test;
  std::vector<size_t> idx(n);
  for (int i = 0; i < n; ++i) {
    int o = static_cast<int>(rng.uniform_int(T));
    if (objects) (*objects)[i] = o;
    idx[i] = test_index(ds, o, static_cast<int>(rng.uniform_int(V)));
  }
  return image_batch(ds, idx);
}

}  // namespace

PairSource conditional_pair_source(Generator& gen, DownStack& enc, const ArchConfig& arch,
                                   const Dataset& ds) {
  const int T = ds.cfg.num_objects - ds.cfg.train_objects;
  if (T < 2) throw std::invalid_argument("conditional pairs need >= 2 test objects");
  PairSource s;
  s.positive = [&gen, &enc, arch, &ds](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    Tensor x = random_test_batch(ds, rng, n, nullptr);
    auto e = enc.forward(x, false);
    Tensor v1 = sample_normal(rng, n, arch.view_dim);
    Tensor v2 = sample_normal(rng, n, arch.view_dim);
    a = gen.forward(concat_channels(e, v1), false);
    b = gen.forward(concat_channels(e, v2), false);
  };
  s.negative = [&gen, &enc, arch, &ds, T](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    const int V = ds.cfg.views_per_test;
    std::vector<size_t> i1(n), i2(n);
    for (int i = 0; i < n; ++i) {
      int o1 = static_cast<int>(rng.uniform_int(T));
      int o2 = static_cast<int>(rng.uniform_int(T - 1));
      if (o2 >= o1) ++o2;
      i1[i] = test_index(ds, o1, static_cast<int>(rng.uniform_int(V)));
      i2[i] = test_index(ds, o2, static_cast<int>(rng.uniform_int(V)));
    }
    auto e1 = enc.forward(image_batch(ds, i1), false);
    auto e2 = enc.forward(image_batch(ds, i2), false);
    Tensor v1 = sample_normal(rng, n, arch.view_dim);
    Tensor v2 = sample_normal(rng, n, arch.view_dim);
    a = gen.forward(concat_channels(e1, v1), false);
    b = gen.forward(concat_channels(e2, v2), false);
  };
  return s;
}

PairSource input_pair_source(Generator& gen, DownStack& enc, const ArchConfig& arch,
                             const Dataset& ds) {
  const int T = ds.cfg.num_objects - ds.cfg.train_objects;
  if (T < 2) throw std::invalid_argument("conditional pairs need >= 2 test objects");
  PairSource s;
  s.positive = [&gen, &enc, arch, &ds](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    Tensor x = random_test_batch(ds, rng, n, nullptr);
    auto e = enc.forward(x, false);
    Tensor v = sample_normal(rng, n, arch.view_dim);
    a = x;
    b = gen.forward(concat_channels(e, v), false);
  };
  s.negative = [&gen, &enc, arch, &ds, T](Rng& rng, int n, Tensor& a, Tensor& b) {
    NoGradGuard ng;
    const int V = ds.cfg.views_per_test;
    std::vector<size_t> i1(n), i2(n);
    for (int i = 0; i < n; ++i) {
      int o1 = static_cast<int>(rng.uniform_int(T));
      int o2 = static_cast<int>(rng.uniform_int(T - 1));
      if (o2 >= o1) ++o2;
      i1[i] = test_index(ds, o1, static_cast<int>(rng.uniform_int(V)));
      i2[i] = test_index(ds, o2, static_cast<int>(rng.uniform_int(V)));
    }
    a = image_batch(ds, i1);
    auto e2 = enc.forward(image_batch(ds, i2), false);
    Tensor v = sample_normal(rng, n, arch.view_dim);
    b = gen.forward(concat_channels(e2, v), false);
  };
  return s;
}

IdentityAucReport identity_auc_suite(ReidEmbedder& emb, const PairSource& src, const Dataset& ds,
                                     int n_pairs, uint64_t seed) {
  if (n_pairs < 100) throw std::invalid_argument("identity auc needs at least 100 pairs");
  PairSource real = real_pair_source(ds);

  auto distances = [&](const std::function<void(Rng&, int, Tensor&, Tensor&)>& fill, Rng rng) {
    std::vector<double> out;
    out.reserve(n_pairs);
    for (int done = 0; done < n_pairs; done += kInferBatch) {
      int c = std::min(kInferBatch, n_pairs - done);
      Tensor a, b;
      fill(rng, c, a, b);
      auto d = row_distances(emb.embed(a), emb.embed(b));
      out.insert(out.end(), d.begin(), d.end());
    }
    return out;
  };

  // same streams for source rows and real rows: an identity source reproduces
  // the real_real value exactly
  auto d_pos_src = distances(src.positive, Rng(seed).substream("pos"));
  auto d_neg_src = distances(src.negative, Rng(seed).substream("neg"));
  auto d_pos_real = distances(real.positive, Rng(seed).substream("pos"));
  auto d_neg_real = distances(real.negative, Rng(seed).substream("neg"));

  IdentityAucReport r;
  r.n_pairs = n_pairs;
  r.real_real = auc_lower_distance(d_pos_real, d_neg_real);
  r.gen_gen = auc_lower_distance(d_pos_src, d_neg_src);
  r.gen_real = auc_lower_distance(d_pos_src, d_neg_real);
  r.real_gen = auc_lower_distance(d_pos_real, d_neg_src);
  return r;
}

// ---------------------------------------------------------------------------
// image sources and distribution metrics

ImageSource prior_image_source(GmvModel& m) {
  return [&m](Rng& rng, int n) {
    NoGradGuard ng;
    Tensor c = sample_normal(rng, n, m.cfg.content_dim);
    Tensor v = sample_normal(rng, n, m.cfg.view_dim);
    return m.gen.forward(concat_channels(c, v), false);
  };
}

ImageSource prior_image_source(TupleGanModel& m) {
  const int k = m.k;
  return [&m, k](Rng& rng, int n) {
    NoGradGuard ng;
    auto heads = m.gen.forward(sample_normal(rng, n, m.gen.latent_dim()), false);
    std::vector<int> h(n);
    for (int i = 0; i < n; ++i) h[i] = static_cast<int>(rng.uniform_int(k));
    return gather_rows(heads, h);
  };
}

ImageSource conditional_image_source(Generator& gen, DownStack& enc, const ArchConfig& arch,
                                     const Dataset& ds) {
  return [&gen, &enc, arch, &ds](Rng& rng, int n) {
    NoGradGuard ng;
    Tensor x = random_test_batch(ds, rng, n, nullptr);
    auto e = enc.forward(x, false);
    Tensor v = sample_normal(rng, n, arch.view_dim);
    return gen.forward(concat_channels(e, v), false);
  };
}

namespace {

std::array<double, kNumAttributes> marginals_of(
    const std::vector<std::array<float, kNumAttributes>>& probs) {
  std::array<double, kNumAttributes> m{};
  for (const auto& row : probs)
    for (int k = 0; k < kNumAttributes; ++k) m[k] += row[k] > 0.5f;
  for (auto& v : m) v /= static_cast<double>(probs.size());
  return m;
}

std::vector<uint16_t> codes_of(const std::vector<std::array<float, kNumAttributes>>& probs) {
  std::vector<uint16_t> codes(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    uint16_t bits = 0;
    for (int k = 0; k < kNumAttributes; ++k)
      if (probs[i][k] > 0.5f) bits |= static_cast<uint16_t>(1u << k);
    codes[i] = bits;
  }
  return codes;
}

std::vector<double> to_vec(const std::array<double, kNumAttributes>& a) {
  return std::vector<double>(a.begin(), a.end());
}

}  // namespace

std::array<double, kNumAttributes> attribute_distribution(AttributeClassifiers& ac,
                                                          const Tensor& images) {
  if (images.shape()[0] < 500)
    throw std::invalid_argument("attribute distribution needs >= 500 images");
  return marginals_of(ac.predict(images));
}

double blurry_rate(AttributeClassifiers& ac, const Tensor& images) {
  auto probs = ac.predict(images);
  double s = 0;
  for (const auto& row : probs) s += row[kNumAttributes - 1] > 0.5f;
  return s / static_cast<double>(probs.size());
}

double diversity_ratio(AttributeClassifiers& ac, const Tensor& images) {
  if (images.shape()[0] < 500)
    throw std::invalid_argument("diversity ratio needs >= 500 images");
  return unique_combination_ratio(ac.predict_bits(images));
}

DistributionReport distribution_suite(AttributeClassifiers& ac, const ImageSource& gen,
                                      const Dataset& ds, int n_images, uint64_t seed) {
  if (n_images < 500) throw std::invalid_argument("distribution suite needs >= 500 images");

  Rng rng = Rng(seed).substream("gen_images");
  std::vector<float> buf;
  int s = ds.cfg.image_size;
  buf.reserve(static_cast<size_t>(n_images) * 3 * s * s);
  for (int done = 0; done < n_images; done += kInferBatch) {
    int c = std::min(kInferBatch, n_images - done);
    Tensor chunk = gen(rng, c);
    buf.insert(buf.end(), chunk.value().begin(), chunk.value().end());
  }
  Tensor gimgs = Tensor::from({n_images, 3, s, s}, std::move(buf));

  DistributionReport r;
  r.n_gen = n_images;
  auto gen_probs = ac.predict(gimgs);
  r.gen_marginals = marginals_of(gen_probs);
  r.diversity_gen = unique_combination_ratio(codes_of(gen_probs));
  r.blurry_gen = r.gen_marginals[kNumAttributes - 1];

  auto tidx = all_train_indices(ds);
  r.n_real = static_cast<int>(tidx.size());
  auto real_probs = ac.predict(image_batch(ds, tidx));
  r.real_marginals_est = marginals_of(real_probs);
  r.diversity_real = unique_combination_ratio(codes_of(real_probs));
  for (size_t i = 0; i < tidx.size(); ++i) {
    uint16_t bits = attribute_bits(ds.records[tidx[i]].factors);
    for (int k = 0; k < kNumAttributes; ++k) r.real_marginals_truth[k] += (bits >> k) & 1u;
  }
  for (auto& v : r.real_marginals_truth) v /= static_cast<double>(tidx.size());
  r.blurry_real_truth = r.real_marginals_truth[kNumAttributes - 1];

  r.d2e = bhattacharyya_bernoulli_sum(to_vec(r.gen_marginals), to_vec(r.real_marginals_est));
  r.d2t = bhattacharyya_bernoulli_sum(to_vec(r.gen_marginals), to_vec(r.real_marginals_truth));
  return r;
}

// ---------------------------------------------------------------------------
// content transfer

ContentTransferReport content_transfer_suite(Generator& gen, DownStack& enc,
                                             const ArchConfig& arch, const Dataset& ds,
                                             const ClassifierConfig& ccfg, uint64_t seed) {
  const int T = ds.cfg.num_objects - ds.cfg.train_objects;
  const int V = ds.cfg.views_per_test;
  if (T < 2) throw std::invalid_argument("content transfer needs >= 2 held-out objects");
  if (V < 2) throw std::invalid_argument("content transfer needs >= 2 views per object");
  const int holdout_v = std::max(1, V / 4);
  const int fit_v = V - holdout_v;

  std::vector<size_t> fit_idx, hold_idx;
  std::vector<int> fit_lab, hold_lab;
  for (int o = 0; o < T; ++o)
    for (int v = 0; v < V; ++v) {
      if (v < fit_v) {
        fit_idx.push_back(test_index(ds, o, v));
        fit_lab.push_back(o);
      } else {
        hold_idx.push_back(test_index(ds, o, v));
        hold_lab.push_back(o);
      }
    }

  ContentTransferReport r;
  r.n_objects = T;
  r.n_fit = static_cast<int>(fit_idx.size());
  r.n_holdout = static_cast<int>(hold_idx.size());
  r.chance = 1.0 / static_cast<double>(T);

  // (a) image classifier fit on real views, scored on held-out real views
  ReidEmbedder clf = train_object_classifier(ds, fit_idx, fit_lab, T, ccfg, "transfer");
  Tensor hold_images = image_batch(ds, hold_idx);
  r.real_image_acc = label_accuracy(clf.classify(hold_images), hold_lab);

  // (b) linear classifier on encoder codes
  Tensor fit_codes, hold_codes;
  {
    NoGradGuard ng;
    fit_codes = enc.forward(image_batch(ds, fit_idx), false).detach();
    hold_codes = enc.forward(hold_images, false).detach();
  }
  ParamSet lin;
  Tensor w = lin.add("w", Tensor::zeros({arch.content_dim, T}));
  Tensor bias = lin.add("b", Tensor::zeros({T}));
  {
    Rng rlin = Rng(ccfg.seed).substream("linear");
    init_normal(w, rlin, 0.02f);
  }
  for (int step = 0; step < 300; ++step) {
    lin.zero_grads();
    auto loss = softmax_cross_entropy(add_bias(matmul(fit_codes, w), bias), fit_lab);
    loss.backward();
    adam_step(lin, {1e-2, 0.9, 0.999, 1e-8});
  }
  {
    NoGradGuard ng;
    auto pred = argmax_rows(add_bias(matmul(hold_codes, w), bias));
    r.code_linear_acc = label_accuracy(pred, hold_lab);
  }

  // (c) the same image classifier on generated new views of held-out inputs
  const int rounds = 5;
  Rng rng = Rng(seed).substream("transfer_gen");
  size_t hit = 0;
  for (int round = 0; round < rounds; ++round) {
    Tensor g;
    {
      NoGradGuard ng;
      Tensor v = sample_normal(rng, r.n_holdout, arch.view_dim);
      g = gen.forward(concat_channels(hold_codes, v), false);
    }
    auto pred = clf.classify(g);
    for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == hold_lab[i];
  }
  r.n_generated = rounds * r.n_holdout;
  r.transfer_acc = static_cast<double>(hit) / static_cast<double>(r.n_generated);
  return r;
}

// ---------------------------------------------------------------------------
// bundle entry point

namespace {

nlohmann::json auc_json(const IdentityAucReport& a) {
  return {{"real_real", a.real_real}, {"gen_gen", a.gen_gen},   {"gen_real", a.gen_real},
          {"real_gen", a.real_gen},   {"n_pairs", a.n_pairs}};
}

nlohmann::json distribution_json(const DistributionReport& d) {
  return {{"d2e", d.d2e},
          {"d2t", d.d2t},
          {"diversity", d.diversity_gen},
          {"diversity_real", d.diversity_real},
          {"blurry_rate", d.blurry_gen},
          {"blurry_rate_real", d.blurry_real_truth},
          {"marginals",
           {{"generated", d.gen_marginals},
            {"real_estimated", d.real_marginals_est},
            {"real_truth", d.real_marginals_truth}}},
          {"n_gen", d.n_gen},
          {"n_real", d.n_real}};
}

nlohmann::json transfer_json(const ContentTransferReport& t) {
  return {{"real_image_acc", t.real_image_acc},
          {"code_linear_acc", t.code_linear_acc},
          {"transfer_acc", t.transfer_acc},
          {"chance", t.chance},
          {"n_objects", t.n_objects},
          {"n_fit", t.n_fit},
          {"n_holdout", t.n_holdout},
          {"n_generated", t.n_generated}};
}

}  // namespace

nlohmann::json evaluate_bundle(const std::string& bundle_dir, const Dataset& ds,
                               const EvalConfig& cfg, const std::string& classifier_cache_dir) {
  nlohmann::json info = read_bundle_info(bundle_dir);
  if (info.at("dataset") != nlohmann::json(ds.cfg))
    throw std::runtime_error("evaluation dataset does not match the bundle's dataset");
  ArchConfig arch = info.at("arch").get<ArchConfig>();
  std::string kind = info.at("model").get<std::string>();

  ReidEmbedder emb = train_reid_embedder(ds, cfg.classifier, classifier_cache_dir);
  AttributeClassifiers ac = train_attribute_classifiers(ds, cfg.classifier, cfg.min_attr_accuracy,
                                                        classifier_cache_dir);

  nlohmann::json out = {
      {"model_kind", kind},
      {"eval_seed", cfg.seed},
      {"eval_config", cfg},
      {"classifiers",
       {{"embedder_train_accuracy", emb.train_accuracy},
        {"attribute_holdout_accuracy", ac.holdout_accuracy}}},
  };
  nlohmann::json metrics;

  if (kind == "gmv") {
    GmvModel m(arch, 0);
    load_bundle_nets(bundle_dir, {{"g", &m.pg}, {"d", &m.pd}});
    metrics["auc"] = auc_json(identity_auc_suite(emb, gmv_pair_source(m), ds, cfg.n_pairs, cfg.seed));
    metrics["distribution"] =
        distribution_json(distribution_suite(ac, prior_image_source(m), ds, cfg.n_images, cfg.seed));
  } else if (kind == "tuple") {
    TupleGanModel m(arch, info.at("k").get<int>(), 0);
    load_bundle_nets(bundle_dir, {{"g", &m.pg}, {"d", &m.pd}});
    metrics["auc"] =
        auc_json(identity_auc_suite(emb, tuple_pair_source(m), ds, cfg.n_pairs, cfg.seed));
    metrics["distribution"] =
        distribution_json(distribution_suite(ac, prior_image_source(m), ds, cfg.n_images, cfg.seed));
  } else if (kind == "cgmv" || kind == "cgan") {
    // both expose the same generator/encoder surface
    Generator* gen = nullptr;
    DownStack* enc = nullptr;
    CgmvModel mc(arch, 0);
    CganModel mg(arch, 0);
    if (kind == "cgmv") {
      load_bundle_nets(bundle_dir, {{"g", &mc.pg}, {"d", &mc.pd}, {"e", &mc.pe}});
      gen = &mc.gen;
      enc = &mc.enc;
    } else {
      load_bundle_nets(bundle_dir, {{"g", &mg.pg}, {"d", &mg.pd}, {"e", &mg.pe}});
      gen = &mg.gen;
      enc = &mg.enc;
    }
    metrics["auc"] = auc_json(
        identity_auc_suite(emb, conditional_pair_source(*gen, *enc, arch, ds), ds, cfg.n_pairs, cfg.seed));
    metrics["auc_input"] = auc_json(
        identity_auc_suite(emb, input_pair_source(*gen, *enc, arch, ds), ds, cfg.n_pairs, cfg.seed));
    metrics["distribution"] = distribution_json(distribution_suite(
        ac, conditional_image_source(*gen, *enc, arch, ds), ds, cfg.n_images, cfg.seed));
    metrics["content_transfer"] =
        transfer_json(content_transfer_suite(*gen, *enc, arch, ds, cfg.classifier, cfg.seed));
  } else {
    throw std::runtime_error("unknown model kind in bundle: " + kind);
  }

  out["metrics"] = metrics;
  return out;
}

}  // namespace mvgen
