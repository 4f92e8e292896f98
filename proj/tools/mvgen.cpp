// Command-line front end: dataset generation/export, model training,
// sampling (grids and latent interpolation) and the evaluation battery.
//
// Every run that writes artifacts also writes a manifest JSON next to them
// recording the subcommand, the fully resolved configuration and the
// input/output paths. Files are written under a ".incomplete" suffix and
// renamed once finished, so a killed run never leaves a plausible-looking
// artifact behind. Exit status is 0 exactly when the run succeeded.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvgen/dataset.hpp"
#include "mvgen/eval.hpp"
#include "mvgen/gradcheck.hpp"
#include "mvgen/image_io.hpp"
#include "mvgen/models.hpp"
#include "mvgen/rng.hpp"
#include "mvgen/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvgen;

namespace {

constexpr const char* kVersion = "0.1.0";

json run_manifest(const std::string& command, const json& config,
                  const std::vector<std::string>& inputs,
                  const std::vector<std::string>& outputs) {
  return {{"command", command}, {"version", kVersion}, {"config", config},
          {"inputs", inputs},   {"outputs", outputs}};
}

void write_json_file(const std::string& path, const json& j) {
  std::string tmp = path + ".incomplete";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// dataset gen / export

struct DatasetGenArgs {
  std::string out;
  DatasetConfig cfg;
  bool force = false;
};

void run_dataset_gen(const DatasetGenArgs& a) {
  if (fs::exists(a.out) && !a.force)
    throw std::runtime_error(a.out + " already exists; pass --force to overwrite");

  Dataset ds = generate_dataset(a.cfg);
  save_dataset(a.out + ".incomplete", ds);
  fs::rename(a.out + ".incomplete", a.out);

  // per-object view counts (constant by construction, reported rather than assumed)
  size_t vmin = SIZE_MAX, vmax = 0, total = 0;
  std::vector<size_t> per_object(a.cfg.num_objects, 0);
  for (const auto& r : ds.records) ++per_object[r.object_id];
  for (size_t c : per_object) {
    vmin = std::min(vmin, c);
    vmax = std::max(vmax, c);
    total += c;
  }
  std::array<size_t, kNumAttributes> pos{};
  for (size_t i = 0; i < ds.train_count(); ++i) {
    uint16_t bits = attribute_bits(ds.records[i].factors);
    for (int k = 0; k < kNumAttributes; ++k) pos[k] += (bits >> k) & 1u;
  }

  std::printf("wrote %s (%zu images, %.1f MiB)\n", a.out.c_str(), ds.records.size(),
              static_cast<double>(fs::file_size(a.out)) / (1024.0 * 1024.0));
  std::printf("train: %d objects x %d views\n", a.cfg.train_objects, a.cfg.views_per_train);
  std::printf("test:  %d objects x %d views\n", a.cfg.num_objects - a.cfg.train_objects,
              a.cfg.views_per_test);
  std::printf("views per object: min %zu  mean %.2f  max %zu\n", vmin,
              static_cast<double>(total) / static_cast<double>(per_object.size()), vmax);
  std::printf("train attribute rates:");
  for (int k = 0; k < kNumAttributes; ++k)
    std::printf(" %s %.0f%%", attribute_name(k),
                100.0 * static_cast<double>(pos[k]) / static_cast<double>(ds.train_count()));
  std::printf("\n");

  write_json_file(a.out + ".manifest.json",
                  run_manifest("dataset gen", json(a.cfg), {}, {a.out}));
}

struct DatasetExportArgs {
  std::string in, out;
  std::string split = "all";
  int count = 64;  // 0 exports everything in the split
  bool force = false;
};

void run_dataset_export(const DatasetExportArgs& a) {
  Dataset ds = load_dataset(a.in);
  if (fs::exists(a.out) && !a.force)
    throw std::runtime_error(a.out + " already exists; pass --force to overwrite");
  fs::create_directories(a.out);

  size_t lo = a.split == "test" ? ds.train_count() : 0;
  size_t hi = a.split == "train" ? ds.train_count() : ds.records.size();
  if (a.count > 0) hi = std::min(hi, lo + static_cast<size_t>(a.count));

  std::ofstream csv(a.out + "/records.csv");
  csv << "index,object_id,split,shape_kind,hue,aspect,rotation,dx,dy,scale_jitter,"
         "brightness,blurred,attribute_bits\n";
  int s = ds.cfg.image_size;
  for (size_t i = lo; i < hi; ++i) {
    const auto& r = ds.records[i];
    char name[32];
    std::snprintf(name, sizeof name, "img_%06zu.ppm", i);
    write_ppm(a.out + "/" + name, decode_image(r.image), s, s);
    const Factors& f = r.factors;
    csv << i << ',' << r.object_id << ',' << (i < ds.train_count() ? "train" : "test") << ','
        << f.shape_kind << ',' << f.hue << ',' << f.aspect << ',' << f.rotation << ',' << f.dx
        << ',' << f.dy << ',' << f.scale_jitter << ',' << f.brightness << ','
        << (f.blurred ? 1 : 0) << ',' << attribute_bits(f) << "\n";
  }
  std::printf("exported %zu images to %s\n", hi - lo, a.out.c_str());

  json cfg{{"in", a.in}, {"split", a.split}, {"count", a.count}};
  write_json_file(a.out + "/manifest.json",
                  run_manifest("dataset export", cfg, {a.in}, {a.out}));
}

// ---------------------------------------------------------------------------
// sampling helpers

// Forward in modest chunks: generation is per-sample in eval mode, so the
// split has no effect on the pixels, only on peak memory.
Tensor generate_images(Generator& g, const std::vector<std::vector<float>>& latents) {
  const int n = static_cast<int>(latents.size());
  const int dim = static_cast<int>(latents[0].size());
  Tensor out;
  std::vector<float> all;
  for (int start = 0; start < n; start += 32) {
    int b = std::min(32, n - start);
    std::vector<float> flat;
    flat.reserve(static_cast<size_t>(b) * dim);
    for (int i = 0; i < b; ++i) {
      const auto& l = latents[start + i];
      if (static_cast<int>(l.size()) != dim) throw std::invalid_argument("ragged latent list");
      flat.insert(flat.end(), l.begin(), l.end());
    }
    Tensor img = g.forward(Tensor::from({b, dim}, std::move(flat)), false).detach();
    all.insert(all.end(), img.value().begin(), img.value().end());
  }
  int s = 0;
  {
    // recover the image side from the per-sample element count
    size_t per = all.size() / static_cast<size_t>(n) / 3;
    while (static_cast<size_t>(s) * s < per) ++s;
  }
  return Tensor::from({n, 3, s, s}, std::move(all));
}

std::vector<std::vector<float>> rows_of(const Tensor& t) {
  const auto& sh = t.shape();
  size_t per = t.numel() / sh[0];
  std::vector<std::vector<float>> out(sh[0]);
  for (int i = 0; i < sh[0]; ++i)
    out[i].assign(t.value().begin() + i * per, t.value().begin() + (i + 1) * per);
  return out;
}

std::vector<float> draw_vec(Rng& rng, int dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

void write_grid_ppm(const std::string& path, const Tensor& images, int cols) {
  const auto& sh = images.shape();
  std::vector<std::vector<float>> cells(sh[0]);
  size_t per = images.numel() / sh[0];
  for (int i = 0; i < sh[0]; ++i)
    cells[i].assign(images.value().begin() + i * per, images.value().begin() + (i + 1) * per);
  int h = 0, w = 0;
  auto grid = tile_grid(cells, sh[2], sh[3], cols, h, w);
  std::string tmp = path + ".incomplete";
  write_ppm(tmp, grid, h, w);
  fs::rename(tmp, path);
}

struct LoadedBundle {
  json info;
  std::string kind;
  ArchConfig arch;
  int k = 0;
  std::unique_ptr<GmvModel> gmv;
  std::unique_ptr<CgmvModel> cgmv;
  std::unique_ptr<CganModel> cgan;
  std::unique_ptr<TupleGanModel> tup;
  Generator* gen = nullptr;          // single-image kinds
  MultiHeadGenerator* mgen = nullptr;  // tuple kind
  DownStack* enc = nullptr;          // kinds with an encoder
};

LoadedBundle load_any_bundle(const std::string& dir) {
  LoadedBundle lb;
  lb.info = read_bundle_info(dir);
  lb.kind = lb.info.at("model").get<std::string>();
  lb.arch = lb.info.at("arch").get<ArchConfig>();
  if (lb.kind == "gmv") {
    lb.gmv = std::make_unique<GmvModel>(lb.arch, 0);
    load_bundle_nets(dir, {{"g", &lb.gmv->pg}, {"d", &lb.gmv->pd}});
    lb.gen = &lb.gmv->gen;
  } else if (lb.kind == "cgmv") {
    lb.cgmv = std::make_unique<CgmvModel>(lb.arch, 0);
    load_bundle_nets(dir, {{"g", &lb.cgmv->pg}, {"d", &lb.cgmv->pd}, {"e", &lb.cgmv->pe}});
    lb.gen = &lb.cgmv->gen;
    lb.enc = &lb.cgmv->enc;
  } else if (lb.kind == "cgan") {
    lb.cgan = std::make_unique<CganModel>(lb.arch, 0);
    load_bundle_nets(dir, {{"g", &lb.cgan->pg}, {"d", &lb.cgan->pd}, {"e", &lb.cgan->pe}});
    lb.gen = &lb.cgan->gen;
    lb.enc = &lb.cgan->enc;
  } else if (lb.kind == "tuple") {
    lb.k = lb.info.at("k").get<int>();
    lb.tup = std::make_unique<TupleGanModel>(lb.arch, lb.k, 0);
    load_bundle_nets(dir, {{"g", &lb.tup->pg}, {"d", &lb.tup->pd}});
    lb.mgen = &lb.tup->gen;
  } else {
    throw std::runtime_error("unknown model kind in bundle: " + lb.kind);
  }
  return lb;
}

// fixed-noise progress grids written during training
void snapshot_single(const std::string& path, Generator& g, const ArchConfig& a, uint64_t seed) {
  const int rows = 4, cols = 6;
  Rng cr = Rng(seed).substream("snapshot_content");
  Rng vr = Rng(seed).substream("snapshot_view");
  std::vector<std::vector<float>> cs, vs, latents;
  for (int i = 0; i < rows; ++i) cs.push_back(draw_vec(cr, a.content_dim));
  for (int j = 0; j < cols; ++j) vs.push_back(draw_vec(vr, a.view_dim));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      auto l = cs[i];
      l.insert(l.end(), vs[j].begin(), vs[j].end());
      latents.push_back(std::move(l));
    }
  write_grid_ppm(path, generate_images(g, latents), cols);
}

void snapshot_tuple(const std::string& path, MultiHeadGenerator& g, uint64_t seed) {
  const int rows = 4;
  Rng zr = Rng(seed).substream("snapshot_content");
  std::vector<float> flat;
  for (int i = 0; i < rows; ++i) {
    auto z = draw_vec(zr, g.latent_dim());
    flat.insert(flat.end(), z.begin(), z.end());
  }
  NoGradGuard ng;
  auto heads = g.forward(Tensor::from({rows, g.latent_dim()}, std::move(flat)), false);
  // row = latent, column = head
  std::vector<std::vector<float>> cells;
  int s = heads[0].shape()[2];
  for (int i = 0; i < rows; ++i)
    for (auto& h : heads) {
      size_t per = h.numel() / rows;
      cells.emplace_back(h.value().begin() + i * per, h.value().begin() + (i + 1) * per);
    }
  int hh = 0, ww = 0;
  auto grid = tile_grid(cells, s, s, static_cast<int>(heads.size()), hh, ww);
  std::string tmp = path + ".incomplete";
  write_ppm(tmp, grid, s == 0 ? 0 : hh, ww);
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model, dataset, out;
  ArchConfig arch;
  TrainConfig train;
};

void run_train(const TrainArgs& a) {
  Dataset ds = load_dataset(a.dataset);
  ArchConfig arch = a.arch;
  arch.image_size = ds.cfg.image_size;

  fs::create_directories(a.out);
  auto progress = [&](const StepStats& st) {
    if (a.train.log_every > 0 && st.step % a.train.log_every == 0)
      std::printf("step %6d  d %.4f  g %.4f  D(real) %.3f  D(fake) %.3f  %.0f ms\n", st.step,
                  st.d_loss, st.g_loss, st.d_real, st.d_fake, st.ms);
  };

  int k = 0;
  if (a.model == "gmv") {
    GmvModel m(arch, a.train.seed);
    auto hook = [&](const StepStats& st) {
      progress(st);
      if (a.train.checkpoint_every > 0 && st.step % a.train.checkpoint_every == 0)
        snapshot_single(a.out + "/samples_" + std::to_string(st.step) + ".ppm", m.gen, arch,
                        a.train.seed);
    };
    train_gmv(m, ds, a.train, a.out, hook);
    snapshot_single(a.out + "/samples_final.ppm", m.gen, arch, a.train.seed);
  } else if (a.model == "cgmv") {
    CgmvModel m(arch, a.train.seed);
    train_cgmv(m, ds, a.train, a.out, progress);
    snapshot_single(a.out + "/samples_final.ppm", m.gen, arch, a.train.seed);
  } else if (a.model == "cgan") {
    CganModel m(arch, a.train.seed);
    train_cgan(m, ds, a.train, a.out, progress);
    snapshot_single(a.out + "/samples_final.ppm", m.gen, arch, a.train.seed);
  } else if (a.model == "dcganx2" || a.model == "dcganx4" || a.model == "dcganx8") {
    k = a.model.back() - '0';
    TupleGanModel m(arch, k, a.train.seed);
    train_tuple(m, ds, a.train, a.out, progress);
    snapshot_tuple(a.out + "/samples_final.ppm", m.gen, a.train.seed);
  } else {
    throw std::runtime_error("unknown model: " + a.model);
  }

  json cfg{{"model", a.model}, {"arch", arch}, {"train", a.train},
           {"dataset_path", a.dataset}, {"dataset", ds.cfg}};
  if (k > 0) cfg["k"] = k;
  write_json_file(a.out + "/manifest.json",
                  run_manifest("train", cfg, {a.dataset}, {a.out}));
  std::printf("bundle written to %s\n", a.out.c_str());
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string bundle, out, dataset;
  std::string mode = "grid";       // grid | interpolate
  std::string axis = "content";    // interpolate: which latent half sweeps
  int rows = 6, cols = 8, steps = 8;
  uint64_t seed = 0;
  std::string from_manifest;       // regenerate a previous run's tiles exactly
  bool force = false;
};

// Encoder-backed kinds can draw their content codes from real held-out images
// when a dataset is supplied; otherwise codes come from the unit normal prior.
std::vector<std::vector<float>> content_rows(const LoadedBundle& lb, const SampleArgs& a, int n,
                                             Rng& rng) {
  if (!a.dataset.empty() && lb.enc != nullptr) {
    Dataset ds = load_dataset(a.dataset);
    if (ds.test_count() == 0) throw std::runtime_error("dataset has no test images to encode");
    std::vector<size_t> idx(n);
    for (auto& i : idx) i = ds.train_count() + rng.uniform_int(ds.test_count());
    NoGradGuard ng;
    return rows_of(lb.enc->forward(image_batch(ds, idx), false));
  }
  std::vector<std::vector<float>> out(n);
  for (auto& v : out) v = draw_vec(rng, lb.arch.content_dim);
  return out;
}

void run_sample(const SampleArgs& a) {
  if (fs::exists(a.out) && !a.force)
    throw std::runtime_error(a.out + " already exists; pass --force to overwrite");
  LoadedBundle lb = load_any_bundle(a.bundle);

  json latents;
  if (!a.from_manifest.empty()) {
    std::ifstream in(a.from_manifest);
    if (!in) throw std::runtime_error("cannot read " + a.from_manifest);
    latents = json::parse(in).at("latents");
  } else if (a.mode == "grid") {
    if (a.rows < 1 || a.cols < 1 || a.rows > 16 || a.cols > 16)
      throw std::runtime_error("grid must be between 1x1 and 16x16");
    latents["mode"] = "grid";
    if (lb.mgen != nullptr) {
      Rng zr = Rng(a.seed).substream("content");
      std::vector<std::vector<float>> zs(a.rows);
      for (auto& z : zs) z = draw_vec(zr, lb.mgen->latent_dim());
      latents["zs"] = zs;
    } else {
      Rng cr = Rng(a.seed).substream("content");
      Rng vr = Rng(a.seed).substream("view");
      latents["contents"] = content_rows(lb, a, a.rows, cr);
      std::vector<std::vector<float>> vs(a.cols);
      for (auto& v : vs) v = draw_vec(vr, lb.arch.view_dim);
      latents["views"] = vs;
    }
  } else if (a.mode == "interpolate") {
    if (lb.mgen != nullptr)
      throw std::runtime_error("interpolation needs a single-image generator");
    if (a.steps < 2 || a.steps > 16) throw std::runtime_error("steps must be between 2 and 16");
    latents["mode"] = "interpolate";
    latents["axis"] = a.axis;
    latents["steps"] = a.steps;
    Rng cr = Rng(a.seed).substream("content");
    Rng vr = Rng(a.seed).substream("view");
    if (a.axis == "content") {
      auto ends = content_rows(lb, a, 2, cr);
      latents["from"] = ends[0];
      latents["to"] = ends[1];
      latents["fixed"] = draw_vec(vr, lb.arch.view_dim);
    } else {
      latents["from"] = draw_vec(vr, lb.arch.view_dim);
      latents["to"] = draw_vec(vr, lb.arch.view_dim);
      latents["fixed"] = content_rows(lb, a, 1, cr)[0];
    }
  } else {
    throw std::runtime_error("unknown sample mode: " + a.mode);
  }

  // materialize the tile latents (shared by fresh runs and manifest replays)
  int cols = 0;
  Tensor images;
  std::string mode = latents.at("mode").get<std::string>();
  if (mode == "grid" && lb.mgen != nullptr) {
    auto zs = latents.at("zs").get<std::vector<std::vector<float>>>();
    std::vector<float> flat;
    for (auto& z : zs) flat.insert(flat.end(), z.begin(), z.end());
    NoGradGuard ng;
    auto heads =
        lb.mgen->forward(Tensor::from({static_cast<int>(zs.size()), lb.mgen->latent_dim()},
                                      std::move(flat)),
                         false);
    int n = static_cast<int>(zs.size());
    int s = heads[0].shape()[2];
    std::vector<float> all;
    for (int i = 0; i < n; ++i)
      for (auto& h : heads) {
        size_t per = h.numel() / n;
        all.insert(all.end(), h.value().begin() + i * per, h.value().begin() + (i + 1) * per);
      }
    cols = static_cast<int>(heads.size());
    images = Tensor::from({n * cols, 3, s, s}, std::move(all));
  } else if (mode == "grid") {
    auto cs = latents.at("contents").get<std::vector<std::vector<float>>>();
    auto vs = latents.at("views").get<std::vector<std::vector<float>>>();
    std::vector<std::vector<float>> tiles;
    for (const auto& c : cs)
      for (const auto& v : vs) {
        auto l = c;
        l.insert(l.end(), v.begin(), v.end());
        tiles.push_back(std::move(l));
      }
    cols = static_cast<int>(vs.size());
    images = generate_images(*lb.gen, tiles);
  } else {
    auto from = latents.at("from").get<std::vector<float>>();
    auto to = latents.at("to").get<std::vector<float>>();
    auto fixed = latents.at("fixed").get<std::vector<float>>();
    bool content_axis = latents.at("axis").get<std::string>() == "content";
    auto sweep = interpolate_latent(from, to, latents.at("steps").get<int>());
    std::vector<std::vector<float>> tiles;
    for (auto& s : sweep) {
      std::vector<float> l;
      const auto& c = content_axis ? s : fixed;
      const auto& v = content_axis ? fixed : s;
      l.insert(l.end(), c.begin(), c.end());
      l.insert(l.end(), v.begin(), v.end());
      tiles.push_back(std::move(l));
    }
    cols = static_cast<int>(tiles.size());
    images = generate_images(*lb.gen, tiles);
  }

  write_grid_ppm(a.out, images, cols);
  std::printf("wrote %s (%d tiles)\n", a.out.c_str(), images.shape()[0]);

  json cfg{{"bundle", a.bundle}, {"mode", mode}, {"seed", a.seed}};
  if (!a.dataset.empty()) cfg["dataset"] = a.dataset;
  json m = run_manifest("sample", cfg, {a.bundle}, {a.out});
  m["latents"] = latents;
  write_json_file(a.out + ".manifest.json", m);
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string bundle, dataset, out, cache;
  EvalConfig cfg;
  bool force = false;
};

void run_eval(const EvalArgs& a) {
  if (fs::exists(a.out) && !a.force)
    throw std::runtime_error(a.out + " already exists; pass --force to overwrite");
  Dataset ds = load_dataset(a.dataset);
  json report = evaluate_bundle(a.bundle, ds, a.cfg, a.cache);
  write_json_file(a.out, report);

  const json& auc = report.at("metrics").at("auc");
  std::printf("model %s\n", report.at("model_kind").get<std::string>().c_str());
  std::printf("identity auc: real-real %.3f  gen-gen %.3f  gen-real %.3f  real-gen %.3f\n",
              auc.at("real_real").get<double>(), auc.at("gen_gen").get<double>(),
              auc.at("gen_real").get<double>(), auc.at("real_gen").get<double>());
  const json& d = report.at("metrics").at("distribution");
  std::printf("attributes: d2e %.4f  d2t %.4f  diversity %.3f  blurry %.3f (real %.3f)\n",
              d.at("d2e").get<double>(), d.at("d2t").get<double>(),
              d.at("diversity").get<double>(), d.at("blurry_rate").get<double>(),
              d.at("blurry_rate_real").get<double>());
  if (report.at("metrics").contains("content_transfer")) {
    const json& t = report.at("metrics").at("content_transfer");
    std::printf("content transfer: real %.3f  code %.3f  generated %.3f  (chance %.3f)\n",
                t.at("real_image_acc").get<double>(), t.at("code_linear_acc").get<double>(),
                t.at("transfer_acc").get<double>(), t.at("chance").get<double>());
  }
  std::printf("report written to %s\n", a.out.c_str());

  json cfg{{"bundle", a.bundle}, {"dataset", a.dataset}, {"eval", a.cfg}};
  if (!a.cache.empty()) cfg["classifier_cache"] = a.cache;
  write_json_file(a.out + ".manifest.json",
                  run_manifest("eval", cfg, {a.bundle, a.dataset}, {a.out}));
}

// ---------------------------------------------------------------------------
// gradcheck

int run_gradcheck(double h, double tol) {
  auto entries = gradcheck_battery(h);
  double worst = 0;
  int failed = 0;
  for (const auto& e : entries) {
    bool ok = e.result.max_rel_err < tol;
    std::printf("%-24s max rel err %.3e  %s\n", e.name.c_str(), e.result.max_rel_err,
                ok ? "ok" : "FAIL");
    worst = std::max(worst, e.result.max_rel_err);
    failed += !ok;
  }
  std::printf("%zu checks, worst %.3e, tolerance %.1e: %s\n", entries.size(), worst, tol,
              failed == 0 ? "all ok" : "FAILED");
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view generative models on a procedural shape dataset"};
  app.require_subcommand(1);

  // dataset gen / export
  auto* dataset = app.add_subcommand("dataset", "create or inspect dataset files");
  dataset->require_subcommand(1);

  DatasetGenArgs ga;
  auto* gen = dataset->add_subcommand("gen", "render a synthetic multi-view dataset");
  gen->add_option("--out", ga.out, "output dataset file")->required();
  gen->add_option("--size", ga.cfg.image_size, "image side")->check(CLI::IsMember({16, 32, 64}));
  gen->add_option("--objects", ga.cfg.num_objects, "total object count");
  gen->add_option("--train-objects", ga.cfg.train_objects, "objects in the train split");
  gen->add_option("--views-train", ga.cfg.views_per_train, "views per train object");
  gen->add_option("--views-test", ga.cfg.views_per_test, "views per held-out object");
  gen->add_option("--blur-prob", ga.cfg.blur_prob, "per-image blur probability");
  gen->add_option("--seed", ga.cfg.seed, "dataset seed");
  gen->add_flag("--force", ga.force, "overwrite an existing file");
  gen->callback([&] { run_dataset_gen(ga); });

  DatasetExportArgs ea;
  auto* exp = dataset->add_subcommand("export", "dump images as PPM plus a factor CSV");
  exp->add_option("--in", ea.in, "dataset file")->required();
  exp->add_option("--out", ea.out, "output directory")->required();
  exp->add_option("--split", ea.split, "train, test or all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  exp->add_option("--count", ea.count, "images to export (0 = the whole split)");
  exp->add_flag("--force", ea.force, "export into an existing directory");
  exp->callback([&] { run_dataset_export(ea); });

  // train
  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint bundle");
  tr->add_option("--model", ta.model, "gmv, cgmv, cgan, dcganx2, dcganx4 or dcganx8")
      ->required()
      ->check(CLI::IsMember({"gmv", "cgmv", "cgan", "dcganx2", "dcganx4", "dcganx8"}));
  tr->add_option("--dataset", ta.dataset, "dataset file")->required();
  tr->add_option("--out", ta.out, "bundle directory (resumes if it already holds one)")
      ->required();
  tr->add_option("--steps", ta.train.steps, "training steps (0 writes the initial state)");
  tr->add_option("--batch", ta.train.batch, "batch size");
  tr->add_option("--g-lr", ta.train.g_lr, "generator learning rate");
  tr->add_option("--d-lr", ta.train.d_lr, "discriminator learning rate");
  tr->add_option("--e-lr", ta.train.e_lr, "encoder learning rate");
  tr->add_option("--beta1", ta.train.beta1, "adam beta1");
  tr->add_option("--beta2", ta.train.beta2, "adam beta2");
  tr->add_flag("--minimax", ta.train.minimax_g, "minimax generator loss (default non-saturating)");
  tr->add_option("--seed", ta.train.seed, "training seed");
  tr->add_option("--log-every", ta.train.log_every, "steps between log lines");
  tr->add_option("--checkpoint-every", ta.train.checkpoint_every,
                 "steps between bundle refreshes (0 = final only)");
  tr->add_option("--width", ta.arch.width, "base feature maps");
  tr->add_option("--content-dim", ta.arch.content_dim, "content latent size");
  tr->add_option("--view-dim", ta.arch.view_dim, "view latent size");
  tr->callback([&] { run_train(ta); });

  // sample
  SampleArgs sa;
  auto* sm = app.add_subcommand("sample", "write a sample grid or latent interpolation");
  sm->add_option("--bundle", sa.bundle, "checkpoint bundle directory")->required();
  sm->add_option("--out", sa.out, "output PPM path")->required();
  sm->add_option("--mode", sa.mode, "grid or interpolate")
      ->check(CLI::IsMember({"grid", "interpolate"}));
  sm->add_option("--rows", sa.rows, "grid rows (content draws)");
  sm->add_option("--cols", sa.cols, "grid columns (view draws; tuple models use their heads)");
  sm->add_option("--steps", sa.steps, "interpolation tile count");
  sm->add_option("--axis", sa.axis, "interpolation axis: content or view")
      ->check(CLI::IsMember({"content", "view"}));
  sm->add_option("--dataset", sa.dataset,
                 "encode held-out images from this dataset as content codes");
  sm->add_option("--seed", sa.seed, "latent seed");
  sm->add_option("--from-manifest", sa.from_manifest,
                 "regenerate the exact tiles of a previous run's manifest");
  sm->add_flag("--force", sa.force, "overwrite an existing file");
  sm->callback([&] { run_sample(sa); });

  // eval
  EvalArgs va;
  auto* ev = app.add_subcommand("eval", "run the evaluation battery on a bundle");
  ev->add_option("--bundle", va.bundle, "checkpoint bundle directory")->required();
  ev->add_option("--dataset", va.dataset, "dataset file (must match the bundle)")->required();
  ev->add_option("--out", va.out, "report JSON path")->required();
  ev->add_option("--pairs", va.cfg.n_pairs, "pairs per identity auc row");
  ev->add_option("--images", va.cfg.n_images, "generated images for attribute statistics");
  ev->add_option("--clf-width", va.cfg.classifier.width, "measurement classifier width");
  ev->add_option("--clf-embed", va.cfg.classifier.embed_dim, "identity embedding size");
  ev->add_option("--clf-steps", va.cfg.classifier.steps, "classifier training steps");
  ev->add_option("--clf-batch", va.cfg.classifier.batch, "classifier batch size");
  ev->add_option("--clf-lr", va.cfg.classifier.lr, "classifier learning rate");
  ev->add_option("--clf-seed", va.cfg.classifier.seed, "classifier seed");
  ev->add_option("--min-attr-acc", va.cfg.min_attr_accuracy,
                 "held-out accuracy every attribute head must reach");
  ev->add_option("--seed", va.cfg.seed, "evaluation seed");
  ev->add_option("--cache", va.cache, "directory for reusable measurement classifiers");
  ev->add_flag("--force", va.force, "overwrite an existing report");
  ev->callback([&] { run_eval(va); });

  // gradcheck
  double gh = 1e-5, gtol = 1e-4;
  int grc = 0;
  auto* gc = app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
  gc->add_option("--fd-step", gh, "finite-difference step");
  gc->add_option("--tol", gtol, "max relative error allowed");
  gc->callback([&] { grc = run_gradcheck(gh, gtol); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return grc;
}
