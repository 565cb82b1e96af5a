#include "mans/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mans/checkpoint.hpp"
#include "mans/config.hpp"
#include "mans/errors.hpp"
#include "mans/gradcheck.hpp"
#include "mans/kernels.hpp"
#include "mans/model.hpp"
#include "mans/text.hpp"

namespace fs = std::filesystem;

namespace mans {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string real_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& default_out) {
  o.out_dir = default_out;
  cmd->add_option("--config", o.config_path, "Config file of key = value lines");
  cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Run seed (overrides the config)");
  cmd->add_option("--threads", o.threads, "Kernel threads (default: $MANS_THREADS)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("overrides", o.overrides, "key=value settings applied after the config");
}

int apply_threads(const std::optional<int>& requested) {
  if (requested) {
    kernels::set_thread_count(*requested);
  } else if (const char* env = std::getenv("MANS_THREADS"); env && *env) {
    std::size_t n = 0;
    try {
      n = parse_count("MANS_THREADS", env);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
    if (n == 0) throw UsageError("MANS_THREADS must be positive");
    kernels::set_thread_count(static_cast<int>(n));
  }
  return kernels::thread_count();
}

RunConfig resolve_config(const CommonOptions& o) {
  try {
    RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
    for (const auto& text : o.overrides) {
      const auto kv = split_assignment(text);
      apply_setting(config, kv.key, kv.value);
    }
    if (o.seed) config.experiment.seed = *o.seed;
    config.experiment.validate();
    config.synth.validate();
    return config;
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
}

struct Corpus {
  GridSplit split;
  std::string source;
};

Corpus load_data(const RunConfig& config, const fs::path& synthetic_dir) {
  const ExperimentConfig& e = config.experiment;
  SequenceSplit seqs;
  std::string source;
  if (config.corpus.empty()) {
    seqs = synth_sequences(config.synth);
    if (!synthetic_dir.empty()) {
      write_corpus(synthetic_dir, seqs);
      seqs = load_corpus(synthetic_dir);
    }
    source = "synthetic";
  } else {
    seqs = load_corpus(config.corpus);
    source = config.corpus;
  }
  if (seqs.train.empty()) throw DataError("corpus has no training samples");
  auto check = [&e](const std::vector<SkeletonSequence>& list) {
    for (const auto& s : list) {
      if (s.label < 0 || static_cast<std::size_t>(s.label) >= e.num_classes) {
        throw DataError("label " + std::to_string(s.label) + " outside [0, " +
                        std::to_string(e.num_classes) + "); set num_classes");
      }
    }
  };
  check(seqs.train);
  check(seqs.val);
  check(seqs.test);
  return {resize_split(seqs, e.frames, e.joints), source};
}

void write_manifest(const fs::path& path, const std::string& command, const RunConfig& config,
                    int threads, const Corpus& corpus, const std::vector<std::string>& files) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << kVersion << "\n";
  out << "# command: " << command << "\n";
  out << "# threads: " << threads << "\n";
  out << "# corpus_source: " << corpus.source << "\n";
  out << "# split_hash: " << hex64(split_hash(corpus.split)) << "\n";
  out << "# samples: train " << corpus.split.train.size() << ", val " << corpus.split.val.size()
      << ", test " << corpus.split.test.size() << "\n";
  out << "# files: " << join(files, " ") << "\n";
  for (const auto& [key, value] : config_values(config)) out << key << " = " << value << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

void write_confusion(const fs::path& path, const EvalResult& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t classes = r.confusion.size();
  out << "true\\predicted";
  for (std::size_t c = 0; c < classes; ++c) out << "," << c;
  out << "\n";
  for (std::size_t t = 0; t < classes; ++t) {
    out << t;
    for (std::size_t c = 0; c < classes; ++c) out << "," << r.confusion[t][c];
    out << "\n";
  }
}

std::string accuracy_line(const std::string& label, const EvalResult& r) {
  const auto correct = static_cast<std::size_t>(std::llround(r.accuracy * static_cast<double>(r.total)));
  return label + " accuracy " + real_text(r.accuracy) + " (" + std::to_string(correct) + "/" +
         std::to_string(r.total) + "), loss " + real_text(r.loss);
}

int cmd_train(const CommonOptions& o, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  const int threads = apply_threads(o.threads);
  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  const Corpus corpus = load_data(config, config.corpus.empty() ? dir / "corpus" : fs::path());
  write_manifest(dir / "manifest.txt", "train", config, threads, corpus,
                 {"metrics.csv", "best.ckpt", "last.ckpt", "result.txt"});

  std::ofstream metrics(dir / "metrics.csv");
  if (!metrics) throw IoError("cannot write " + (dir / "metrics.csv").string());
  metrics << "epoch,split,loss,accuracy\n";
  auto row = [&metrics](std::size_t epoch, const char* split, double loss, double acc) {
    metrics << epoch << "," << split << "," << real_text(loss) << "," << real_text(acc) << "\n";
  };

  auto model = MansModel<float>::init(config.experiment);
  const bool has_val = !corpus.split.val.empty();
  double best = -1.0;
  FitOptions options;
  options.on_epoch = [&](const EpochMetrics& m) {
    row(m.epoch, "train", m.train_loss, m.train_accuracy);
    if (m.val) row(m.epoch, "val", m.val->loss, m.val->accuracy);
    if (m.test) row(m.epoch, "test", m.test->loss, m.test->accuracy);
    metrics.flush();
    const auto& selection = has_val ? m.val : m.test;
    const double score = selection ? selection->accuracy : m.train_accuracy;
    if (score > best) {
      best = score;
      save_model(dir / "best.ckpt", model);
    }
    out << "epoch " << m.epoch << ": train loss " << real_text(m.train_loss) << ", train accuracy "
        << real_text(m.train_accuracy);
    if (m.test) out << ", test accuracy " << real_text(m.test->accuracy);
    out << "\n";
    return true;
  };
  fit(model, corpus.split, options);
  save_model(dir / "last.ckpt", model);

  std::ofstream result(dir / "result.txt");
  if (!corpus.split.test.empty()) {
    const auto test = evaluate(model, std::span<const GridSample>(corpus.split.test),
                               config.eval_batch);
    result << "test_accuracy = " << real_text(test.accuracy) << "\n";
    result << "test_loss = " << real_text(test.loss) << "\n";
    out << accuracy_line("final test", test) << "\n";
  } else {
    out << "no test split; skipped final evaluation\n";
  }
  return kExitOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string corpus;
  std::string out_dir;
  std::string split = "test";
  std::size_t batch = 32;
  std::optional<int> threads;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  apply_threads(o.threads);
  auto model = load_model<float>(o.checkpoint);
  SequenceSplit seqs = load_corpus(o.corpus);
  const auto* list = o.split == "train" ? &seqs.train : o.split == "val" ? &seqs.val : &seqs.test;
  if (list->empty()) throw DataError("corpus has no \"" + o.split + "\" samples");
  std::vector<GridSample> samples;
  for (const auto& s : *list) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= model.config.num_classes) {
      throw DataError("label " + std::to_string(s.label) + " outside the checkpoint's classes");
    }
    samples.push_back(resize_sequence(s, model.config.frames, model.config.joints));
  }
  const auto result = evaluate(model, std::span<const GridSample>(samples), o.batch);

  const fs::path dir = o.out_dir.empty() ? fs::path(o.checkpoint).parent_path() : fs::path(o.out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = "eval_" + o.split;
  write_confusion(dir / (stem + "_confusion.csv"), result);
  std::ofstream summary(dir / (stem + ".txt"));
  summary << "checkpoint = " << o.checkpoint << "\n";
  summary << "corpus = " << o.corpus << "\n";
  summary << "accuracy = " << real_text(result.accuracy) << "\n";
  summary << "loss = " << real_text(result.loss) << "\n";
  out << accuracy_line(o.split, result) << "\n";
  return kExitOk;
}

}  // namespace

std::vector<AblationCell> run_ablation(const RunConfig& config, const GridSplit& split,
                                       const std::function<void(const AblationCell&)>& on_cell) {
  if (split.test.empty()) throw DataError("ablation needs a test split");
  if (config.ablation_seeds == 0) throw ArgumentError("ablation_seeds must be positive");
  const std::uint64_t hash = split_hash(split);
  std::vector<AblationCell> cells;
  auto run = [&](const std::string& grid, const std::string& setting, ExperimentConfig e) {
    for (const auto& c : cells) {
      if (c.grid == "variant" && c.config_matches(e)) {
        AblationCell copy = c;
        copy.grid = grid;
        copy.setting = setting;
        cells.push_back(copy);
        if (on_cell) on_cell(cells.back());
        return;
      }
    }
    auto model = MansModel<float>::init(e);
    FitOptions options;
    options.evaluate_test = false;
    fit(model, split, options);
    const auto r = evaluate(model, std::span<const GridSample>(split.test), config.eval_batch);
    cells.push_back({grid, setting, e, hash, r.accuracy});
    if (on_cell) on_cell(cells.back());
  };
  const std::uint64_t base = config.experiment.seed;
  for (Variant v : {Variant::kStcmOnly, Variant::kNoAttention, Variant::kFull}) {
    for (std::size_t i = 0; i < config.ablation_seeds; ++i) {
      ExperimentConfig e = config.experiment;
      e.variant = v;
      e.seed = base + i;
      run("variant", variant_name(v), e);
    }
  }
  for (std::size_t alpha : config.alphas) {
    for (std::size_t i = 0; i < config.ablation_seeds; ++i) {
      ExperimentConfig e = config.experiment;
      e.variant = Variant::kFull;
      e.alpha = alpha;
      e.seed = base + i;
      e.validate();
      run("alpha", std::to_string(alpha), e);
    }
  }
  return cells;
}

bool AblationCell::config_matches(const ExperimentConfig& e) const {
  return config.variant == e.variant && config.alpha == e.alpha && config.seed == e.seed;
}

std::vector<AblationSummary> summarize_ablation(const std::vector<AblationCell>& cells) {
  std::vector<AblationSummary> out;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&c](const AblationSummary& s) {
      return s.grid == c.grid && s.setting == c.setting;
    });
    if (it == out.end()) {
      out.push_back({c.grid, c.setting, {}, 0.0, 0.0});
      it = out.end() - 1;
    }
    it->accuracies.push_back(c.test_accuracy);
  }
  for (auto& s : out) {
    const double n = static_cast<double>(s.accuracies.size());
    double mean = 0.0;
    for (double a : s.accuracies) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : s.accuracies) var += (a - mean) * (a - mean);
    s.mean = mean;
    s.stddev = s.accuracies.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  }
  return out;
}

namespace {

int cmd_ablate(const CommonOptions& o, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  for (std::size_t alpha : config.alphas) {
    if (alpha == 0 || alpha > config.experiment.frames) {
      throw UsageError("alphas: every value must lie in [1, T]");
    }
  }
  const int threads = apply_threads(o.threads);
  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  const Corpus corpus = load_data(config, config.corpus.empty() ? dir / "corpus" : fs::path());
  write_manifest(dir / "manifest.txt", "ablate", config, threads, corpus,
                 {"ablation.csv", "summary.csv"});

  std::ofstream table(dir / "ablation.csv");
  if (!table) throw IoError("cannot write " + (dir / "ablation.csv").string());
  table << "grid,setting,seed,split_hash,test_accuracy\n";
  const auto cells = run_ablation(config, corpus.split, [&](const AblationCell& c) {
    table << c.grid << "," << c.setting << "," << c.config.seed << "," << hex64(c.split_hash) << ","
          << real_text(c.test_accuracy) << "\n";
    table.flush();
    out << c.grid << "=" << c.setting << " seed " << c.config.seed << ": test accuracy "
        << real_text(c.test_accuracy) << "\n";
  });

  std::ofstream summary(dir / "summary.csv");
  summary << "grid,setting,mean,std,n\n";
  out << "\n";
  for (const auto& s : summarize_ablation(cells)) {
    summary << s.grid << "," << s.setting << "," << real_text(s.mean) << "," << real_text(s.stddev)
            << "," << s.accuracies.size() << "\n";
    char line[128];
    std::snprintf(line, sizeof line, "%-8s %-13s %.4f +- %.4f (n=%zu)\n", s.grid.c_str(),
                  s.setting.c_str(), s.mean, s.stddev, s.accuracies.size());
    out << line;
  }
  return kExitOk;
}

int cmd_gradcheck(double tolerance, std::uint64_t data_seed, const std::optional<int>& threads,
                  std::ostream& out) {
  apply_threads(threads);
  GradcheckOptions options;
  options.tolerance = tolerance;
  options.data_seed = data_seed;
  const auto report = gradcheck(options);
  out << report.format();
  return report.passed() ? kExitOk : kExitNumerical;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              const std::vector<std::string>& overrides, std::ostream& out) {
  SynthSpec spec;
  try {
    if (!spec_path.empty()) spec = load_synth_spec(spec_path);
    for (const auto& text : overrides) {
      const auto kv = split_assignment(text);
      apply_synth_setting(spec, kv.key, kv.value);
    }
    spec.validate();
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  const auto seqs = synth_sequences(spec);
  write_corpus(out_dir, seqs);
  out << "wrote " << seqs.train.size() + seqs.val.size() + seqs.test.size() << " sequences to "
      << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory attention networks for skeleton action recognition", "mans"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions train_opts;
  auto* train = app.add_subcommand("train", "Train a model and write a run directory");
  add_common(train, train_opts, "runs/train");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  eval->add_option("checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
  eval->add_option("corpus", eval_opts.corpus, "Corpus directory (with corpus.tsv)")->required();
  eval->add_option("--out", eval_opts.out_dir, "Output directory (default: the checkpoint's)");
  eval->add_option("--split", eval_opts.split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--batch", eval_opts.batch, "Evaluation batch size")->check(CLI::PositiveNumber);
  eval->add_option("--threads", eval_opts.threads, "Kernel threads")->check(CLI::PositiveNumber);

  CommonOptions ablate_opts;
  auto* ablate = app.add_subcommand("ablate", "Variant and alpha ablation grids");
  add_common(ablate, ablate_opts, "runs/ablate");

  double tolerance = 1e-4;
  std::uint64_t data_seed = 11;
  std::optional<int> gc_threads;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the reduced model");
  gc->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  gc->add_option("--seed", data_seed, "Seed of the random batch")->capture_default_str();
  gc->add_option("--threads", gc_threads, "Kernel threads")->check(CLI::PositiveNumber);

  std::string spec_path;
  std::string synth_out = "corpus";
  std::vector<std::string> synth_overrides;
  auto* synth = app.add_subcommand("synth", "Write a synthetic .skl corpus");
  synth->add_option("--spec", spec_path, "SynthSpec file of key = value lines");
  synth->add_option("--out", synth_out, "Corpus directory")->capture_default_str();
  synth->add_option("overrides", synth_overrides, "key=value spec settings");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_opts, out);
    if (*eval) return cmd_eval(eval_opts, out);
    if (*ablate) return cmd_ablate(ablate_opts, out);
    if (*gc) return cmd_gradcheck(tolerance, data_seed, gc_threads, out);
    if (*synth) return cmd_synth(spec_path, synth_out, synth_overrides, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mans
