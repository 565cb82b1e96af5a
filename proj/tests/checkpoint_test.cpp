#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mans/checkpoint.hpp"
#include "mans/errors.hpp"
#include "mans/gradcheck.hpp"

namespace mans {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mans_checkpoint_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

GridSplit tiny_split() {
  SynthSpec spec;
  spec.num_classes = 3;
  spec.samples_per_class = 5;
  spec.joints = 6;
  spec.frames_min = 12;
  spec.frames_max = 14;
  return synth_generate(spec, 10, 10);
}

TEST(CheckpointFormat, StreamRoundTrip) {
  NamedTensors<float> entries{{"a", Tensor<float>(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6})},
                              {"b.c", Tensor<float>(Shape{1}, std::vector<float>{-0.5f})}};
  std::stringstream buf;
  write_checkpoint(buf, entries);
  EXPECT_EQ(buf.str().substr(0, 4), "MANS");
  auto back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].first, "a");
  EXPECT_EQ(back[0].second.shape(), (Shape{2, 3}));
  EXPECT_EQ(std::vector<float>(back[0].second.data().begin(), back[0].second.data().end()),
            (std::vector<float>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(back[1].second.item(), -0.5f);
}

TEST(CheckpointFormat, RejectsBadMagicVersionAndTruncation) {
  NamedTensors<float> entries{{"w", Tensor<float>(Shape{4, 4}, 1.0f)}};
  std::stringstream buf;
  write_checkpoint(buf, entries);
  const std::string good = buf.str();

  std::string magic = good;
  magic[0] = 'X';
  std::istringstream m(magic);
  EXPECT_THROW(read_checkpoint(m), FormatError);

  std::string version = good;
  version[4] = 9;
  std::istringstream v(version);
  try {
    read_checkpoint(v);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 9"), std::string::npos) << e.what();
  }

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, good.size() - 1, good.size() - 40}) {
    std::istringstream t(good.substr(0, cut));
    EXPECT_THROW(read_checkpoint(t), FormatError) << cut;
  }
}

TEST(CheckpointModel, RoundTripPreservesEvaluationExactly) {
  auto config = reduced_config();
  config.variant = Variant::kNoAttention;
  config.epochs = 2;
  auto split = tiny_split();
  auto model = MansModel<float>::init(config);
  fit(model, split);
  const auto path = scratch("trained.ckpt");
  save_model(path, model);
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));

  auto loaded = load_model<float>(path);
  EXPECT_EQ(loaded.config.variant, Variant::kNoAttention);
  EXPECT_EQ(loaded.config.frames, config.frames);
  EXPECT_EQ(loaded.config.width2, config.width2);
  const auto a = model.parameters();
  const auto b = loaded.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(std::memcmp(a[i].second.raw(), b[i].second.raw(), a[i].second.numel() * sizeof(float)), 0);
  }
  auto ea = evaluate(model, std::span<const GridSample>(split.test));
  auto eb = evaluate(loaded, std::span<const GridSample>(split.test));
  EXPECT_EQ(ea.loss, eb.loss);
  EXPECT_EQ(ea.confusion, eb.confusion);

  save_model(scratch("again.ckpt"), loaded);
  EXPECT_EQ(bytes_of(path), bytes_of(scratch("again.ckpt")));
}

TEST(CheckpointModel, RejectsDamagedFiles) {
  auto model = MansModel<float>::init(reduced_config());
  const auto path = scratch("damaged_src.ckpt");
  save_model(path, model);
  const auto good = bytes_of(path);

  write_bytes(scratch("truncated.ckpt"), good.substr(0, good.size() / 2));
  EXPECT_THROW(load_model<float>(scratch("truncated.ckpt")), FormatError);
  EXPECT_THROW(load_model<float>(scratch("absent.ckpt")), IoError);

  // rewrite without the last entry
  std::istringstream in(good);
  auto entries = read_checkpoint(in);
  entries.pop_back();
  std::ofstream out(scratch("missing.ckpt"), std::ios::binary);
  write_checkpoint(out, entries);
  out.close();
  EXPECT_THROW(load_model<float>(scratch("missing.ckpt")), FormatError);

  std::istringstream in2(good);
  entries = read_checkpoint(in2);
  entries.emplace_back("stcm.extra", Tensor<float>(Shape{1}, 0.0f));
  std::ofstream out2(scratch("extra.ckpt"), std::ios::binary);
  write_checkpoint(out2, entries);
  out2.close();
  EXPECT_THROW(load_model<float>(scratch("extra.ckpt")), FormatError);

  std::istringstream in3(good);
  entries = read_checkpoint(in3);
  entries.back().second = Tensor<float>(Shape{entries.back().second.numel() + 1}, 0.0f);
  std::ofstream out3(scratch("shape.ckpt"), std::ios::binary);
  write_checkpoint(out3, entries);
  out3.close();
  EXPECT_THROW(load_model<float>(scratch("shape.ckpt")), FormatError);
}

}  // namespace
}  // namespace mans
