#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mvgen/models.hpp"

using namespace mvgen;

namespace {

ArchConfig tiny_cfg(int image_size = 32) {
  ArchConfig c;
  c.image_size = image_size;
  c.content_dim = 8;
  c.view_dim = 4;
  c.width = 8;
  return c;
}

bool any_nonzero(const std::vector<float>& v) {
  for (float x : v)
    if (x != 0.f) return true;
  return false;
}

}  // namespace

TEST_CASE("generator produces tanh-bounded images at every supported size") {
  for (int s : {16, 32, 64}) {
    GmvModel m(tiny_cfg(s), 7);
    Rng rng(1);
    auto z = sample_normal(rng, 2, m.cfg.content_dim + m.cfg.view_dim);
    NoGradGuard g;
    auto img = m.gen.forward(z, true);
    CHECK(img.shape() == std::vector<int>{2, 3, s, s});
    for (float v : img.value()) {
      CHECK(v <= 1.f);
      CHECK(v >= -1.f);
    }
  }
}

TEST_CASE("pair discriminator maps stacked images to probabilities") {
  GmvModel m(tiny_cfg(), 7);
  Rng rng(2);
  auto z = sample_normal(rng, 2, 12);
  NoGradGuard g;
  auto x1 = m.gen.forward(z, true);
  auto x2 = m.gen.forward(z, true);
  auto p = m.disc.forward(concat_channels(x1, x2), true);
  CHECK(p.shape() == std::vector<int>{2, 1});
  for (float v : p.value()) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }
}

TEST_CASE("encoder returns unbounded content codes of the right width") {
  CgmvModel m(tiny_cfg(), 7);
  Rng rng(3);
  auto z = sample_normal(rng, 3, 12);
  NoGradGuard g;
  auto img = m.gen.forward(z, true);
  auto code = m.enc.forward(img, true);
  CHECK(code.shape() == std::vector<int>{3, 8});
}

TEST_CASE("multi-head generator emits one image per head from a shared latent") {
  TupleGanModel m(tiny_cfg(), 4, 7);
  Rng rng(4);
  auto z = sample_normal(rng, 2, 12);
  NoGradGuard g;
  auto imgs = m.gen.forward(z, true);
  REQUIRE(imgs.size() == 4);
  for (auto& im : imgs) CHECK(im.shape() == std::vector<int>{2, 3, 32, 32});
  // heads start from different weights, so outputs differ
  CHECK(imgs[0].value() != imgs[1].value());
  auto stacked = concat_channels(concat_channels(imgs[0], imgs[1]),
                                 concat_channels(imgs[2], imgs[3]));
  auto p = m.disc.forward(stacked, true);
  CHECK(p.shape() == std::vector<int>{2, 1});
}

TEST_CASE("same seed rebuilds identical weights; different seed differs") {
  GmvModel a(tiny_cfg(), 99), b(tiny_cfg(), 99), c(tiny_cfg(), 100);
  REQUIRE(a.pg.entries().size() == b.pg.entries().size());
  for (size_t i = 0; i < a.pg.entries().size(); ++i)
    CHECK(a.pg.entries()[i].tensor.value() == b.pg.entries()[i].tensor.value());
  CHECK(a.pg.get("g.dense.w").value() != c.pg.get("g.dense.w").value());
  // generator and discriminator draw from distinct substreams
  CHECK(a.pg.get("g.dense.w").value()[0] != a.pd.get("d.down0.k").value()[0]);
}

TEST_CASE("batchnorm entries initialize to identity transform") {
  GmvModel m(tiny_cfg(), 5);
  auto g = m.pg.get("g.bn0.gamma");
  auto b = m.pg.get("g.bn0.beta");
  auto rv = m.pg.get("g.bn0.rvar");
  for (float v : g.value()) CHECK(v == 1.f);
  for (float v : b.value()) CHECK(v == 0.f);
  for (float v : rv.value()) CHECK(v == 1.f);
}

TEST_CASE("gradients reach every trainable generator and discriminator entry") {
  GmvModel m(tiny_cfg(), 11);
  Rng rng(6);
  auto z = sample_normal(rng, 4, 12);
  auto img = m.gen.forward(z, true);
  auto pair = concat_channels(img, img);
  auto p = m.disc.forward(pair, true);
  auto loss = bce_loss(p, 1.0f);
  loss.backward();
  for (auto& ps : {&m.pg, &m.pd})
    for (auto& e : ps->entries()) {
      if (!e.trainable) continue;
      INFO(e.name);
      REQUIRE(e.tensor.node()->grad.size() == e.tensor.numel());
      CHECK(any_nonzero(e.tensor.node()->grad));
    }
}

TEST_CASE("freezing the discriminator skips its weight gradients entirely") {
  GmvModel m(tiny_cfg(), 12);
  Rng rng(7);
  auto z = sample_normal(rng, 2, 12);
  m.pd.set_frozen(true);
  auto img = m.gen.forward(z, true);
  auto p = m.disc.forward(concat_channels(img, img), true);
  auto loss = bce_loss(p, 1.0f);
  loss.backward();
  for (auto& e : m.pd.entries())
    if (e.trainable) CHECK_FALSE(any_nonzero(e.tensor.node()->grad));
  bool g_has = false;
  for (auto& e : m.pg.entries())
    if (e.trainable && e.tensor.node()->grad.size() == e.tensor.numel() &&
        any_nonzero(e.tensor.node()->grad))
      g_has = true;
  CHECK(g_has);
  m.pd.set_frozen(false);
}

TEST_CASE("arch config roundtrips through json") {
  ArchConfig c = tiny_cfg(64);
  c.width = 48;
  nlohmann::json j = c;
  ArchConfig back = j.get<ArchConfig>();
  CHECK(back.image_size == 64);
  CHECK(back.width == 48);
  CHECK(back.content_dim == c.content_dim);
  CHECK(back.view_dim == c.view_dim);
}

TEST_CASE("model checkpoints restore through the registry") {
  auto path = (std::filesystem::temp_directory_path() / "mvgen_model_ckpt.bin").string();
  {
    GmvModel m(tiny_cfg(), 21);
    nlohmann::json meta = {{"arch", m.cfg}, {"model", "gmv"}};
    save_checkpoint(path, meta, m.pg);
  }
  auto meta = read_checkpoint_meta(path);
  ArchConfig cfg = meta.at("arch").get<ArchConfig>();
  GmvModel fresh(cfg, 999);  // different seed: weights differ until loaded
  GmvModel want(cfg, 21);
  CHECK(fresh.pg.get("g.dense.w").value() != want.pg.get("g.dense.w").value());
  load_checkpoint(path, fresh.pg);
  CHECK(fresh.pg.get("g.dense.w").value() == want.pg.get("g.dense.w").value());
  std::remove(path.c_str());
}

TEST_CASE("invalid configurations are rejected") {
  ArchConfig bad = tiny_cfg();
  bad.image_size = 48;
  CHECK_THROWS(GmvModel(bad, 1));
  CHECK_THROWS(TupleGanModel(tiny_cfg(), 1, 1));
  GmvModel m(tiny_cfg(), 1);
  Rng rng(1);
  auto wrong = sample_normal(rng, 2, 5);
  CHECK_THROWS(m.gen.forward(wrong, true));
}
