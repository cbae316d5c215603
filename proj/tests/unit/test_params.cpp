#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>

#include "ddi/errors.hpp"
#include "ddi/num/params.hpp"
#include "ddi/num/rng.hpp"

using namespace ddi;
using num::ParamSet;
using num::Tensor;

namespace {
std::string temp_path(const char *name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ParamSet<float> sample_params() {
  ParamSet<float> p;
  num::Prng rng = num::make_prng(99);
  auto rand_tensor = [&](int r, int c) {
    Tensor<float> t(r, c);
    for (auto &x : t.v)
      x = static_cast<float>(num::uniform_real(rng, -1.0, 1.0));
    return t;
  };
  p.add("encoder/l1/w", rand_tensor(4, 8));
  p.add("encoder/l1/bn_mean", rand_tensor(1, 8), false);
  p.add("heads/binary/w", rand_tensor(8, 1));
  return p;
}
}  // namespace

TEST_CASE("count_trainable respects prefixes and the trainable flag") {
  ParamSet<float> p = sample_params();
  CHECK(p.count_trainable() == 4 * 8 + 8 * 1);
  CHECK(p.count_trainable("encoder/") == 32);
  CHECK(p.count_trainable("heads/") == 8);
  CHECK(p.count_trainable("attn/") == 0);
  CHECK(p.find("encoder/l1/w") != nullptr);
  CHECK(p.find("nope") == nullptr);
}

TEST_CASE("checkpoints round-trip values, flags and metadata bit-exactly") {
  ParamSet<float> p = sample_params();
  std::map<std::string, std::string> meta{{"variant", "concat"},
                                          {"config", "{\"seed\":42}"}};
  std::string path = temp_path("ddi_ckpt_test.bin");
  num::save_checkpoint(path, p, meta);

  std::map<std::string, std::string> got_meta;
  ParamSet<float> q = num::load_checkpoint<float>(path, &got_meta);
  std::remove(path.c_str());

  CHECK(got_meta == meta);
  REQUIRE(q.entries.size() == p.entries.size());
  for (std::size_t i = 0; i < p.entries.size(); ++i) {
    CHECK(q.entries[i].name == p.entries[i].name);
    CHECK(q.entries[i].trainable == p.entries[i].trainable);
    CHECK(q.entries[i].tensor.n_rows == p.entries[i].tensor.n_rows);
    CHECK(q.entries[i].tensor.n_cols == p.entries[i].tensor.n_cols);
    CHECK(q.entries[i].tensor.v == p.entries[i].tensor.v);  // bit-exact
  }
}

TEST_CASE("scalar width and magic are validated on load") {
  ParamSet<float> p = sample_params();
  std::string path = temp_path("ddi_ckpt_width.bin");
  num::save_checkpoint(path, p);
  CHECK_THROWS_AS(num::load_checkpoint<double>(path), IoError);
  std::remove(path.c_str());

  std::string junk = temp_path("ddi_ckpt_junk.bin");
  {
    FILE *f = std::fopen(junk.c_str(), "wb");
    std::fputs("garbage", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(num::load_checkpoint<float>(junk), IoError);
  std::remove(junk.c_str());
  CHECK_THROWS_AS(num::load_checkpoint<float>("/no/such/file.bin"), IoError);
}
