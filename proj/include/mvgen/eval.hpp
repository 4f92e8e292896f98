#pragma once

// Measurement battery for trained bundles: re-identification AUC suites,
// attribute-distribution distances, diversity and blur rates, and
// content-transfer classification. Everything runs in eval mode under
// NoGradGuard and is deterministic for a fixed seed.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgen/dataset.hpp"
#include "mvgen/metrics.hpp"
#include "mvgen/models.hpp"

namespace mvgen {

struct ClassifierConfig {
  int width = 16;      // conv width of classifier trunks
  int embed_dim = 64;  // re-identification embedding size
  int steps = 1500;
  int batch = 64;
  double lr = 1e-3;
  uint64_t seed = 100;
  // Attribute-classifier training corpus: a disposable dataset drawn from the
  // same renderer distribution as the evaluated one but with this many objects
  // (>= 24, holdout split off automatically) x attr_views views. 0 trains on
  // the evaluated dataset itself, which invites identity-memorization
  // shortcuts for object-constant attributes when it has few objects. Many
  // objects with few views each: the effective sample count for an
  // object-constant attribute is the object count.
  int attr_objects = 1536;
  int attr_views = 3;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

// Conv trunk -> embedding -> linear softmax head over object ids. Evaluation
// compares Euclidean distances between (frozen) embeddings; the head only
// serves training and accuracy reporting.
class ReidEmbedder {
 public:
  ReidEmbedder(int image_size, int width, int embed_dim, int num_classes, uint64_t seed);
  Tensor embed(const Tensor& images);               // (n, embed_dim), eval mode
  std::vector<int> classify(const Tensor& images);  // argmax over the head
  Tensor logits(const Tensor& images, bool training);
  int num_classes() const { return num_classes_; }

  double train_accuracy = 0;
  ParamSet ps;

 private:
  int num_classes_ = 0;
  DownStack trunk_;
  Tensor head_w_, head_b_;
};

// Trains on the train split with object-id labels. A non-empty cache_dir
// stores the trained weights keyed by (dataset, classifier) config; later
// calls with the same configs load instead of retraining.
ReidEmbedder train_reid_embedder(const Dataset& ds, const ClassifierConfig& cfg,
                                 const std::string& cache_dir = "");

// Ten sigmoid attribute heads on one shared conv trunk. Every head must clear
// a held-out accuracy gate before the instance is handed out. The trunk runs
// two convs per resolution — deeper than the models' critic — because
// orientation-relative geometry (shape kind, aspect) underfits badly on a
// single-conv-per-stage stack.
class AttributeClassifiers {
 public:
  AttributeClassifiers(int image_size, int width, uint64_t seed);
  Tensor forward(const Tensor& images, bool training);  // (n, 10) probabilities
  // (n) rows of per-attribute probabilities
  std::vector<std::array<float, kNumAttributes>> predict(const Tensor& images);
  std::vector<uint16_t> predict_bits(const Tensor& images);  // thresholded at 0.5

  std::array<double, kNumAttributes> holdout_accuracy{};
  ParamSet ps;

 private:
  struct Bn {
    Tensor gamma, beta, rmean, rvar;
  };
  struct Stage {
    Tensor refine_k;  // 3x3 stride 1
    Tensor down_k;    // 4x4 stride 2
    Bn rbn, dbn;
  };
  int image_size_ = 0;
  std::vector<Stage> stages_;
  Tensor final_k_, final_b_;  // 4x4 over the final 4x4 map = dense head
};

// Trains with rare-positive oversampling (blur) and gates every attribute on
// held-out-object accuracy >= min_accuracy, throwing with the attribute name
// otherwise. Also refuses attributes that are single-class on the training
// images. Training images come from a dedicated corpus per
// ClassifierConfig::attr_objects (ds itself when that is 0); the gate holdout
// is object-disjoint from the training images either way.
AttributeClassifiers train_attribute_classifiers(const Dataset& ds, const ClassifierConfig& cfg,
                                                 double min_accuracy = 0.9,
                                                 const std::string& cache_dir = "");

// ---------------------------------------------------------------------------
// identity preservation

// Fills two (n,3,S,S) batches whose rows form pairs.
struct PairSource {
  std::function<void(Rng&, int, Tensor&, Tensor&)> positive;  // same identity
  std::function<void(Rng&, int, Tensor&, Tensor&)> negative;  // different identities
};

PairSource real_pair_source(const Dataset& ds);  // test-split views
PairSource gmv_pair_source(GmvModel& m);
PairSource tuple_pair_source(TupleGanModel& m);
// generated pair rows for encoder models: same E(x) vs two different inputs
PairSource conditional_pair_source(Generator& gen, DownStack& enc, const ArchConfig& arch,
                                   const Dataset& ds);
// (input, generated-from-it) vs (input, generated-from-another-object)
PairSource input_pair_source(Generator& gen, DownStack& enc, const ArchConfig& arch,
                             const Dataset& ds);

struct IdentityAucReport {
  double real_real = 0;  // embedder ceiling on real pairs
  double gen_gen = 0;    // source positives vs source negatives
  double gen_real = 0;   // source positives vs real negatives
  double real_gen = 0;   // real positives vs source negatives
  int n_pairs = 0;
};

// Positive/negative draws for the source reuse the exact RNG streams of the
// real rows, so feeding real_pair_source back in reproduces real_real in
// every row. Throws when n_pairs < 100.
IdentityAucReport identity_auc_suite(ReidEmbedder& emb, const PairSource& src, const Dataset& ds,
                                     int n_pairs, uint64_t seed);

// ---------------------------------------------------------------------------
// attribute distributions, diversity, blur

using ImageSource = std::function<Tensor(Rng&, int)>;  // n generated images

ImageSource prior_image_source(GmvModel& m);
ImageSource prior_image_source(TupleGanModel& m);  // uniform head per sample
ImageSource conditional_image_source(Generator& gen, DownStack& enc, const ArchConfig& arch,
                                     const Dataset& ds);  // inputs from the test split

// Per-attribute mean of thresholded classifier outputs; needs >= 500 images.
std::array<double, kNumAttributes> attribute_distribution(AttributeClassifiers& ac,
                                                          const Tensor& images);
double blurry_rate(AttributeClassifiers& ac, const Tensor& images);
// unique_combination_ratio over predicted bit-vectors; needs >= 500 images.
double diversity_ratio(AttributeClassifiers& ac, const Tensor& images);

struct DistributionReport {
  std::array<double, kNumAttributes> gen_marginals{};
  std::array<double, kNumAttributes> real_marginals_est{};    // classifier on real images
  std::array<double, kNumAttributes> real_marginals_truth{};  // ground-truth bits
  double d2e = 0;  // bhattacharyya sum, generated vs estimated real
  double d2t = 0;  // generated vs ground truth
  double diversity_gen = 0, diversity_real = 0;
  double blurry_gen = 0, blurry_real_truth = 0;
  int n_gen = 0, n_real = 0;
};

// Real-side references come from the train split (the test split is too small
// for stable marginals); the same classifiers measure both sides of d2e.
DistributionReport distribution_suite(AttributeClassifiers& ac, const ImageSource& gen,
                                      const Dataset& ds, int n_images, uint64_t seed);

// ---------------------------------------------------------------------------
// content transfer

struct ContentTransferReport {
  double real_image_acc = 0;   // image classifier on held-out real views
  double code_linear_acc = 0;  // linear classifier on encoder codes
  double transfer_acc = 0;     // image classifier on generated new views
  double chance = 0;           // 1 / number of held-out objects
  int n_objects = 0, n_fit = 0, n_holdout = 0, n_generated = 0;
};

// Object-disjoint protocol: the encoder/generator were trained on the train
// split; classification happens over test-split objects, with views split
// into fit and holdout parts.
ContentTransferReport content_transfer_suite(Generator& gen, DownStack& enc,
                                             const ArchConfig& arch, const Dataset& ds,
                                             const ClassifierConfig& ccfg, uint64_t seed);

// ---------------------------------------------------------------------------
// bundle entry point

struct EvalConfig {
  int n_pairs = 5000;
  int n_images = 1000;
  ClassifierConfig classifier;
  double min_attr_accuracy = 0.9;  // attribute-head gate
  uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

// Loads the bundle, trains the measurement classifiers on ds (which must be
// the bundle's dataset), runs every suite that applies to the model kind and
// returns the report as JSON. classifier_cache_dir, when non-empty, reuses
// trained measurement classifiers across calls.
nlohmann::json evaluate_bundle(const std::string& bundle_dir, const Dataset& ds,
                               const EvalConfig& cfg,
                               const std::string& classifier_cache_dir = "");

}  // namespace mvgen
