// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 2 4        run only the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mans/checkpoint.hpp"
#include "mans/cli.hpp"
#include "mans/gradcheck.hpp"
#include "mans/kernels.hpp"
#include "mans/model.hpp"
#include "mans/ops.hpp"
#include "mans/recurrent.hpp"
#include "mans/stcm.hpp"
#include "mans/tarm.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace mans {
namespace {

namespace fs = std::filesystem;
using testing::fd_max_rel_error;
using testing::leaf;
using testing::randn;

struct Outcome {
  bool passed = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mans_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. gradients

Tensor<double> probe(Tape<double>& tape, const Tensor<double>& y, const Tensor<double>& weights) {
  return ops::sum(tape, ops::mul(tape, y, weights));
}

using GradCase = std::function<double(std::mt19937_64&)>;

std::vector<std::pair<std::string, GradCase>> gradient_cases() {
  std::vector<std::pair<std::string, GradCase>> cases;
  const std::pair<const char*, ops::Elementwise> kinds[] = {
      {"add", ops::Elementwise::kAdd},         {"sub", ops::Elementwise::kSub},
      {"mul", ops::Elementwise::kMul},         {"sigmoid", ops::Elementwise::kSigmoid},
      {"tanh", ops::Elementwise::kTanh},       {"relu", ops::Elementwise::kRelu}};
  for (auto [name, kind] : kinds) {
    cases.emplace_back(name, [kind](std::mt19937_64& rng) {
      auto a = leaf({3, 4}, rng), b = leaf({3, 4}, rng);
      auto w = randn({3, 4}, rng);
      return fd_max_rel_error([&](Tape<double>& t) { return probe(t, ops::elementwise(t, kind, a, &b), w); },
                              {a, b});
    });
  }
  cases.emplace_back("matmul", [](std::mt19937_64& rng) {
    auto a = leaf({3, 5}, rng), b = leaf({5, 2}, rng);
    auto w = randn({3, 2}, rng);
    return fd_max_rel_error([&](Tape<double>& t) { return probe(t, ops::matmul(t, a, b), w); }, {a, b});
  });
  cases.emplace_back("affine", [](std::mt19937_64& rng) {
    auto x = leaf({4, 3}, rng), m = leaf({3, 5}, rng), bias = leaf({5}, rng);
    auto w = randn({4, 5}, rng);
    return fd_max_rel_error([&](Tape<double>& t) { return probe(t, ops::affine(t, x, m, bias), w); },
                            {x, m, bias});
  });
  cases.emplace_back("reduce_mean", [](std::mt19937_64& rng) {
    auto x = leaf({2, 3, 4}, rng);
    double worst = 0.0;
    for (std::size_t axis = 0; axis < 3; ++axis) {
      Shape out{2, 3, 4};
      out.erase(out.begin() + static_cast<long>(axis));
      auto w = randn(out, rng);
      worst = std::max(worst, fd_max_rel_error(
                                  [&](Tape<double>& t) { return probe(t, ops::reduce_mean(t, x, axis), w); }, {x}));
    }
    return worst;
  });
  cases.emplace_back("duplicate_cols", [](std::mt19937_64& rng) {
    auto x = leaf({4, 1}, rng);
    auto w = randn({4, 3}, rng);
    return fd_max_rel_error([&](Tape<double>& t) { return probe(t, ops::duplicate_cols(t, x, 3), w); }, {x});
  });
  cases.emplace_back("conv2d", [](std::mt19937_64& rng) {
    struct Geometry {
      Shape x, k, out;
      int stride, pad;
    };
    double worst = 0.0;
    for (const Geometry& g : {Geometry{{2, 2, 5, 5}, {3, 2, 3, 3}, {2, 3, 5, 5}, 1, 1},
                              Geometry{{1, 3, 7, 7}, {2, 3, 5, 5}, {1, 2, 4, 4}, 2, 2},
                              Geometry{{2, 2, 5, 5}, {3, 2, 1, 1}, {2, 3, 3, 3}, 2, 0}}) {
      auto x = leaf(g.x, rng), k = leaf(g.k, rng);
      auto w = randn(g.out, rng);
      worst = std::max(worst, fd_max_rel_error(
                                  [&](Tape<double>& t) { return probe(t, ops::conv2d(t, x, k, g.stride, g.pad), w); },
                                  {x, k}));
    }
    return worst;
  });
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    cases.emplace_back(mode == Mode::kTrain ? "batchnorm2d(train)" : "batchnorm2d(eval)",
                       [mode](std::mt19937_64& rng) {
                         auto x = leaf({3, 2, 3, 3}, rng), gamma = leaf({2}, rng), beta = leaf({2}, rng);
                         auto w = randn({3, 2, 3, 3}, rng);
                         ops::BatchNormState<double> state(2);
                         state.running_mean.data()[0] = 0.3;
                         state.running_var.data()[1] = 2.0;
                         return fd_max_rel_error(
                             [&](Tape<double>& t) {
                               auto saved = state;
                               saved.running_mean = state.running_mean.clone();
                               saved.running_var = state.running_var.clone();
                               return probe(t, ops::batchnorm2d(t, x, gamma, beta, saved, mode), w);
                             },
                             {x, gamma, beta});
                       });
  }
  cases.emplace_back("softmax_cross_entropy", [](std::mt19937_64& rng) {
    auto logits = leaf({4, 5}, rng);
    const std::vector<int> labels{0, 3, 4, 1};
    return fd_max_rel_error(
        [&](Tape<double>& t) { return ops::softmax_cross_entropy(t, logits, std::span<const int>(labels)).loss; },
        {logits});
  });
  cases.emplace_back("reshape/select/stack", [](std::mt19937_64& rng) {
    auto a = leaf({2, 3}, rng), b = leaf({2, 3}, rng);
    auto w = randn({3, 2}, rng);
    return fd_max_rel_error(
        [&](Tape<double>& t) {
          auto s = ops::stack(t, {a, b});
          auto r = ops::reshape(t, ops::select(t, s, 1), Shape{3, 2});
          return probe(t, r, w);
        },
        {a, b});
  });
  cases.emplace_back("gru_step", [](std::mt19937_64& rng) {
    const std::uint64_t seed = rng();
    Rng init(seed);
    auto p = GruParams<double>::uniform(3, init);
    auto x = leaf({2, 3}, rng), h = leaf({2, 3}, rng);
    auto w = randn({2, 3}, rng);
    std::vector<Tensor<double>> inputs{x, h, p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wh, p.uh, p.bh};
    for (auto& t : inputs) t.set_requires_grad(true);
    return fd_max_rel_error([&](Tape<double>& t) { return probe(t, gru_step(t, p, x, h), w); }, inputs);
  });
  cases.emplace_back("bigru", [](std::mt19937_64& rng) {
    Rng init(rng());
    auto p = BiGruParams<double>::uniform(2, init);
    auto x = leaf({4, 2}, rng);
    auto w = randn({4, 2}, rng);
    NamedTensors<double> named;
    p.collect("g", named);
    std::vector<Tensor<double>> inputs{x};
    for (auto& [n, t] : named) inputs.push_back(t);
    return fd_max_rel_error([&](Tape<double>& t) { return probe(t, bigru_forward(t, p, x), w); }, inputs);
  });
  cases.emplace_back("tarm", [](std::mt19937_64& rng) {
    Rng init(rng());
    auto p = TarmParams<double>::init(TarmShape{4, 3, 2, 2, true}, init);
    auto x = leaf({4, 3}, rng);
    auto w = randn({4, 3}, rng);
    NamedTensors<double> named;
    p.collect("t", named);
    std::vector<Tensor<double>> inputs{x};
    for (auto& [n, t] : named) inputs.push_back(t);
    return fd_max_rel_error(
        [&](Tape<double>& t) { return probe(t, tarm_forward(t, p, CoordMatrix<double>{x}).values, w); }, inputs);
  });
  cases.emplace_back("stcm", [](std::mt19937_64& rng) {
    StcmConfig config;
    config.width1 = 2;
    config.width2 = 3;
    config.num_classes = 3;
    Rng init(rng());
    auto p = StcmParams<double>::init(config, init);
    auto image = leaf({2, 3, 6, 6}, rng);
    NamedTensors<double> named;
    p.collect(named);
    std::vector<Tensor<double>> inputs{image};
    for (auto& [n, t] : named) inputs.push_back(t);
    const std::vector<int> labels{2, 0};
    return fd_max_rel_error(
        [&](Tape<double>& t) {
          auto logits = classify(t, p, stcm_forward(t, p, image, Mode::kTrain)).logits;
          return ops::softmax_cross_entropy(t, logits, std::span<const int>(labels)).loss;
        },
        inputs);
  });
  return cases;
}

Outcome criterion_gradients() {
  Outcome o;
  constexpr int kSeeds = 20;
  constexpr double kTol = 1e-4;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, run] : gradient_cases()) {
    double worst = 0.0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 104729 + 17);
      worst = std::max(worst, run(rng));
    }
    o.require(worst < kTol, fmt("%-22s max rel error %.2e over %d seeds", name.c_str(), worst, kSeeds));
  }
  const auto report = gradcheck();
  double worst = 0.0;
  for (const auto& g : report.groups) worst = std::max(worst, g.max_rel_error);
  o.require(report.passed(), fmt("reduced MANs-9 end-to-end gradcheck, worst group error %.2e", worst));
  const double elapsed = seconds_since(start);
  o.require(elapsed < 300.0, fmt("runtime %.1f s (limit 300 s)", elapsed));
  return o;
}

// ---------------------------------------------------------------------------
// 2. oracles

Outcome criterion_oracles() {
  Outcome o;
  std::mt19937_64 rng(2024);

  double conv = 0.0;
  struct Geometry {
    Shape x, k;
    int stride, pad;
  };
  for (const Geometry& g : {Geometry{{2, 3, 50, 50}, {8, 3, 5, 5}, 2, 2}, Geometry{{2, 4, 13, 13}, {5, 4, 3, 3}, 1, 1},
                            Geometry{{1, 4, 25, 25}, {6, 4, 3, 3}, 2, 1}, Geometry{{1, 4, 25, 25}, {6, 4, 1, 1}, 2, 0}}) {
    auto x = randn(g.x, rng), k = randn(g.k, rng);
    Tape<double> tape(false);
    auto y = ops::conv2d(tape, x, k, g.stride, g.pad);
    conv = std::max(conv, testing::max_abs_diff(y.data(), testing::conv_oracle(x, k, g.stride, g.pad)));
  }
  o.require(conv <= 1e-10, fmt("conv2d vs loop oracle: max abs diff %.2e (limit 1e-10)", conv));

  double gru = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng init(seed);
    auto p = GruParams<double>::uniform(4, init);
    auto x = randn({1, 4}, rng), h = randn({1, 4}, rng);
    Tape<double> tape(false);
    auto y = gru_step(tape, p, x, h);
    const auto expected = testing::gru_oracle(p, {x.data().begin(), x.data().end()}, {h.data().begin(), h.data().end()});
    gru = std::max(gru, testing::max_abs_diff(y.data(), expected));
  }
  o.require(gru <= 1e-12, fmt("GRU step vs scalar oracle: max abs diff %.2e (limit 1e-12)", gru));

  bool reversal = true;
  for (int seed = 0; seed < 20; ++seed) {
    Rng init(seed + 100);
    auto p = BiGruParams<double>::uniform(3, init);
    const BiGruParams<double> swapped{p.backward, p.forward};
    auto x = randn({6, 3}, rng);
    Tensor<double> reversed(Shape{6, 3});
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t k = 0; k < 3; ++k) reversed.raw()[t * 3 + k] = x.raw()[(5 - t) * 3 + k];
    Tape<double> tape(false);
    auto a = bigru_forward(tape, p, x);
    auto b = bigru_forward(tape, swapped, reversed);
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t k = 0; k < 3; ++k) reversal = reversal && a.raw()[t * 3 + k] == b.raw()[(5 - t) * 3 + k];
  }
  o.require(reversal, "BiGRU time reversal with swapped directions is bit-exact");

  double tarm = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng init(seed + 200);
    auto p = TarmParams<double>::init(TarmShape{4, 3, 2, 2, true}, init);
    auto x = randn({4, 3}, rng);
    Tape<double> tape(false);
    auto y = tarm_forward(tape, p, CoordMatrix<double>{x});
    const auto expected = testing::tarm_oracle(p, testing::to_matrix(x));
    const auto got = testing::to_matrix(y.values);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t n = 0; n < 3; ++n) tarm = std::max(tarm, std::abs(got[t][n] - expected[t][n]));
  }
  o.require(tarm <= 1e-12, fmt("TARM forward vs straight-line oracle (T=4, N=3, K=2): %.2e (limit 1e-12)", tarm));
  return o;
}

// ---------------------------------------------------------------------------
// 3. shapes

Outcome criterion_shapes() {
  Outcome o;
  struct Row {
    Depth depth;
    std::size_t convs;
  };
  for (const Row& row : {Row{Depth::kMans9, 9}, Row{Depth::kMans33, 33}, Row{Depth::kMans61, 61}}) {
    ExperimentConfig config;
    config.depth = row.depth;
    auto model = MansModel<float>::init(config);
    Tensor<float> batch(Shape{1, 50, 50, 3});
    std::mt19937_64 rng(5);
    std::normal_distribution<float> normal;
    for (float& v : batch.data()) v = normal(rng);
    std::vector<LayerTrace> trace;
    Tape<float> tape(false);
    auto logits = mans_forward(tape, model, batch, Mode::kEval, &trace);

    // one row per table entry: TARM output, stem, stage 1, stage 2, pooling;
    // every layer of a row must share its size
    auto row_of = [](const std::string& name) {
      if (name == "input") return 0;
      if (name == "stem.conv") return 1;
      if (name.rfind("s1.", 0) == 0) return 2;
      if (name.rfind("s2.", 0) == 0) return 3;
      return 4;
    };
    std::vector<std::pair<std::size_t, std::size_t>> sizes(5, {0, 0});
    bool consistent = true;
    std::size_t convs = 0;
    for (const auto& t : trace) {
      if (t.conv) ++convs;
      const std::pair<std::size_t, std::size_t> hw{t.shape[2], t.shape[3]};
      auto& slot = sizes[row_of(t.name)];
      if (slot.first != 0 && slot != hw) consistent = false;
      slot = hw;
    }
    o.require(consistent, depth_name(row.depth) + " every layer within a stage has one output size");
    const std::vector<std::pair<std::size_t, std::size_t>> table{{50, 50}, {25, 25}, {25, 25}, {13, 13}, {1, 1}};
    std::string got;
    for (auto [h, w] : sizes) got += (got.empty() ? "" : " -> ") + std::to_string(h) + "x" + std::to_string(w);
    o.require(sizes == table, depth_name(row.depth) + " sizes " + got);
    o.require(convs == row.convs && model.stcm.config.conv_layers() == row.convs,
              depth_name(row.depth) + fmt(" conv layers %zu (expected %zu)", convs, row.convs));
    o.require(logits.shape() == Shape{1, 4}, depth_name(row.depth) + " logits 1x4");
    if (row.depth == Depth::kMans9) {
      const auto n = parameter_count(model);
      o.require(n >= 600000 && n <= 1000000, fmt("MANs-9 parameters %zu (window 0.6M..1.0M)", n));
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 4. attention structure

Outcome criterion_attention() {
  Outcome o;
  bool bounded = true, columns_equal = true, identity = true;
  double lo = 1.0, hi = 0.0;
  std::mt19937_64 rng(77);
  for (int seed = 0; seed < 20; ++seed) {
    Rng init(seed + 300);
    TarmShape shape{50, 50, 64, static_cast<std::size_t>(4 << (seed % 4)), seed % 2 == 0};
    auto p = TarmParams<double>::init(shape, init);
    auto x = randn({50, 50}, rng, 3.0);
    Tape<double> tape(false);
    auto memory = tarm_memory(tape, p, CoordMatrix<double>{x});
    auto fa = tarm_attention(tape, p, memory.x_resized);
    for (std::size_t t = 0; t < 50; ++t) {
      const double* row = fa.raw() + t * 64;
      for (std::size_t k = 0; k < 64; ++k) {
        bounded = bounded && row[k] > 0.0 && row[k] < 1.0;
        columns_equal = columns_equal && row[k] == row[0];
        lo = std::min(lo, row[k]);
        hi = std::max(hi, row[k]);
      }
    }
    std::fill(p.fc_out_w.data().begin(), p.fc_out_w.data().end(), 0.0);
    std::fill(p.fc_out_b.data().begin(), p.fc_out_b.data().end(), 0.0);
    auto y = tarm_forward(tape, p, CoordMatrix<double>{x});
    identity = identity && std::equal(y.values.data().begin(), y.values.data().end(), x.data().begin());
  }
  o.require(bounded, fmt("F_A strictly inside (0,1); observed range [%.4f, %.4f]", lo, hi));
  o.require(columns_equal, "all K columns of F_A identical (exact)");
  o.require(identity, "zeroed output layer makes the TARM the exact identity");
  return o;
}

// ---------------------------------------------------------------------------
// 5. learning

Outcome criterion_learning() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  SynthSpec spec;  // 4 classes, 50 per class
  const auto split = synth_generate(spec, 50, 50);
  o.require(split.train.size() + split.test.size() == 200, fmt("corpus %zu train + %zu test samples",
                                                               split.train.size(), split.test.size()));
  int reached = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig config;
    config.seed = seed;
    config.epochs = 30;
    auto model = MansModel<float>::init(config);
    std::size_t epoch_hit = 0;
    double best = 0.0;
    FitOptions options;
    options.on_epoch = [&](const EpochMetrics& m) {
      best = std::max(best, m.test->accuracy);
      if (m.test->accuracy >= 0.9) {
        epoch_hit = m.epoch;
        return false;
      }
      return true;
    };
    fit(model, split, options);
    if (epoch_hit) ++reached;
    o.notes.push_back(epoch_hit ? fmt("     seed %llu: test accuracy %.3f at epoch %zu", (unsigned long long)seed, best,
                                      epoch_hit)
                                : fmt("     seed %llu: best test accuracy %.3f, never reached 0.9",
                                      (unsigned long long)seed, best));
  }
  o.require(reached >= 4, fmt("%d of 5 seeds reach >= 90%% test accuracy within 30 epochs", reached));

  ExperimentConfig config;
  config.seed = 1;
  auto model = MansModel<float>::init(config);
  SgdState<float> state;
  const auto sample = make_batch<float>(std::span<const GridSample>(split.train).first(1));
  double loss = std::numeric_limits<double>::infinity();
  std::size_t first_below = 0;
  for (std::size_t step = 1; step <= 200; ++step) {
    loss = train_step(model, state, sample).loss;
    if (loss < 0.01 && !first_below) first_below = step;
  }
  o.require(loss < 0.01, fmt("single-sample overfit: loss %.2e after 200 steps (first < 0.01 at step %zu)", loss,
                             first_below));
  const double elapsed = seconds_since(start);
  o.require(elapsed < 1200.0, fmt("runtime %.1f s (limit 1200 s)", elapsed));
  return o;
}

// ---------------------------------------------------------------------------
// 6. ablation

RunConfig ablation_config() {
  RunConfig c;
  c.experiment.width1 = 16;
  c.experiment.width2 = 32;
  c.experiment.epochs = 15;
  c.experiment.lr = 0.01;
  c.experiment.batch_size = 8;
  c.ablation_seeds = 5;
  c.alphas = {4, 8, 16, 32};
  c.synth.samples_per_class = 100;
  c.synth.train_fraction = 0.3;
  c.synth.speed_warp = 0.8;
  c.synth.class_offset = 0.0;
  c.synth.noise_sigma = 0.6;
  return c;
}

Outcome criterion_ablation() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const RunConfig config = ablation_config();
  const auto split = synth_generate(config.synth, config.experiment.frames, config.experiment.joints);
  std::vector<AblationCell> cells;
  bool ran = true;
  try {
    cells = run_ablation(config, split);
  } catch (const std::exception& e) {
    ran = false;
    o.notes.push_back(std::string("     ablation threw: ") + e.what());
  }
  std::map<std::string, AblationSummary> by_setting;
  for (const auto& s : summarize_ablation(cells)) by_setting[s.grid + "=" + s.setting] = s;
  for (const auto& [key, s] : by_setting) {
    std::string accs;
    for (double a : s.accuracies) accs += fmt(" %.3f", a);
    o.notes.push_back(fmt("     %-24s mean %.3f  std %.3f  [", key.c_str(), s.mean, s.stddev) + accs + " ]");
  }
  auto mean = [&](const std::string& key) { return by_setting.count(key) ? by_setting[key].mean : -1.0; };
  auto seeds = [&](const std::string& key) { return by_setting.count(key) ? by_setting[key].accuracies.size() : 0; };
  const double full = mean("variant=full"), no_att = mean("variant=no_attention"), stcm = mean("variant=stcm_only");
  o.require(ran && seeds("variant=full") >= 5 && seeds("variant=no_attention") >= 5 && seeds("variant=stcm_only") >= 5,
            "variant grid completed with >= 5 seeds per variant");
  o.require(full >= no_att, fmt("full %.3f >= no_attention %.3f", full, no_att));
  o.require(full >= stcm, fmt("full %.3f >= stcm_only %.3f", full, stcm));
  bool alphas = ran;
  for (std::size_t a : {4, 8, 16, 32}) alphas = alphas && seeds("alpha=" + std::to_string(a)) >= 5;
  o.require(alphas, "alpha sweep {4, 8, 16, 32} ran without error");
  o.notes.push_back(fmt("     runtime %.1f s", seconds_since(start)));
  return o;
}

// ---------------------------------------------------------------------------
// 7. reproducibility

Outcome criterion_reproducibility() {
  Outcome o;
  const std::vector<std::string> settings{"width1=8", "width2=16", "epochs=3", "synth.samples_per_class=20",
                                          "--threads", "1"};
  auto train = [&](const fs::path& dir) {
    std::vector<std::string> args{"train", "--out", dir.string(), "--seed", "9"};
    args.insert(args.end(), settings.begin(), settings.end());
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != kExitOk) std::cerr << err.str();
    return code;
  };
  const auto a = scratch("repro_a");
  const auto b = scratch("repro_b");
  const bool ran = train(a) == kExitOk && train(b) == kExitOk;
  o.require(ran, "two identical training runs finished");
  if (!ran) return o;
  const auto metrics = read_file(a / "metrics.csv");
  o.require(!metrics.empty() && metrics == read_file(b / "metrics.csv"), "metrics.csv bit-identical across runs");
  o.require(read_file(a / "last.ckpt") == read_file(b / "last.ckpt"), "last.ckpt bit-identical across runs");

  std::ostringstream out, err;
  const int code = run_cli({"eval", (a / "last.ckpt").string(), (a / "corpus").string(), "--out",
                            (a / "eval").string(), "--threads", "1"},
                           out, err);
  const auto result = read_file(a / "result.txt");
  const auto eval = read_file(a / "eval" / "eval_test.txt");
  auto value_of = [](const std::string& text, const std::string& key) {
    const auto at = text.find(key + " = ");
    if (at == std::string::npos) return std::string("<missing>");
    const auto from = at + key.size() + 3;
    return text.substr(from, text.find('\n', from) - from);
  };
  o.require(code == kExitOk && value_of(eval, "accuracy") == value_of(result, "test_accuracy") &&
                value_of(eval, "loss") == value_of(result, "test_loss"),
            "eval of the saved checkpoint reproduces the training run's test accuracy " +
                value_of(eval, "accuracy") + " and loss " + value_of(eval, "loss"));

  auto model = load_model<float>(a / "last.ckpt");
  const auto split = resize_split(load_corpus(a / "corpus"), 50, 50);
  const auto before = evaluate(model, std::span<const GridSample>(split.test));
  const auto copy = scratch("repro_copy.ckpt");
  save_model(copy, model);
  auto reloaded = load_model<float>(copy);
  const auto after = evaluate(reloaded, std::span<const GridSample>(split.test));
  o.require(before.loss == after.loss && before.confusion == after.confusion &&
                read_file(copy) == read_file(a / "last.ckpt"),
            "save/load round trip preserves evaluation output exactly");
  return o;
}

}  // namespace
}  // namespace mans

int main(int argc, char** argv) {
  using namespace mans;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", criterion_gradients},
      {"oracle equivalence", criterion_oracles},
      {"shape trace", criterion_shapes},
      {"attention structure", criterion_attention},
      {"desk-scale learning", criterion_learning},
      {"ablation ordering", criterion_ablation},
      {"reproducibility", criterion_reproducibility}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::cout << "threads: " << kernels::thread_count() << "\n";
  std::vector<std::string> summary;
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.require(false, std::string("threw: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    std::cout << "\ncriterion " << id << " (" << criteria[i].first << ")\n";
    for (const auto& n : outcome.notes) std::cout << "  " << n << "\n";
    std::cout.flush();
    summary.push_back(fmt("%s criterion %d: %s (%.1f s)", outcome.passed ? "PASS" : "FAIL", id,
                          criteria[i].first.c_str(), elapsed));
    all = all && outcome.passed;
  }
  std::cout << "\n";
  for (const auto& line : summary) std::cout << line << "\n";
  return all ? 0 : 1;
}
