#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>

#include "mvgen/gradcheck.hpp"

using namespace mvgen;

TEST_CASE("battery covers every op and stays under the analytic tolerance") {
  auto entries = gradcheck_battery(1e-5);
  REQUIRE(entries.size() >= 20);

  std::set<std::string> names;
  for (const auto& e : entries) {
    INFO(e.name);
    CHECK(e.result.max_rel_err < 1e-4);
    names.insert(e.name);
  }
  CHECK(names.size() == entries.size());  // no duplicate labels
  for (const char* need : {"matmul_bias", "conv2d_s2p1", "conv_transpose2d", "batch_norm_train",
                           "softmax_cross_entropy", "composed_conv_net", "composed_generator_head"})
    CHECK(names.count(need) == 1);
}
