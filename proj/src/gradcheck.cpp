#include "mans/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "mans/ops.hpp"

namespace mans {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<TensorCheck> check_gradients(const LossFn& loss,
                                         const std::vector<NamedTensor<double>>& inputs,
                                         const FdOptions& options) {
  for (auto [name, t] : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  {
    Tape<double> tape;
    if (options.fault) tape.inject_fault(*options.fault);
    auto root = loss(tape);
    tape.backward(root);
  }
  auto evaluate = [&loss]() {
    Tape<double> tape(false);
    return loss(tape).item();
  };

  std::vector<TensorCheck> out;
  for (auto [name, t] : inputs) {
    TensorCheck check{name};
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.data();
    const std::size_t n = values.size();
    const std::size_t stride =
        options.max_entries == 0 || n <= options.max_entries ? 1 : n / options.max_entries;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      values[i] = saved + options.h;
      const double up = evaluate();
      values[i] = saved - options.h;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      const double err = relative_error(analytic[i], numeric, options.floor);
      ++check.checked;
      if (err > check.max_rel_error || check.checked == 1) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.worst_analytic = analytic[i];
        check.worst_numeric = numeric;
      }
    }
    out.push_back(std::move(check));
  }
  return out;
}

ExperimentConfig reduced_config() {
  ExperimentConfig c;
  c.frames = 10;
  c.joints = 10;
  c.hidden = 4;
  c.alpha = 2;
  c.depth = Depth::kMans9;
  c.width1 = 4;
  c.width2 = 8;
  c.num_classes = 3;
  c.batch_size = 2;
  c.seed = 3;
  return c;
}

std::string gradcheck_group(const std::string& p) {
  auto has = [&p](const char* s) { return p.find(s) != std::string::npos; };
  if (p.rfind("tarm.", 0) == 0) {
    if (has(".fc_in.")) return "tarm.fc_in";
    if (has(".bigru.")) return "tarm.bigru";
    if (has(".w1.") || has(".w2.")) return "tarm.attention";
    if (has(".fc_out.")) return "tarm.fc_out";
    return "tarm.other";
  }
  if (has(".fc.")) return "stcm.fc";
  if (has(".bn")) return "stcm.bn";
  if (has(".conv") || has(".proj")) return "stcm.conv";
  return "stcm.other";
}

bool GradcheckReport::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.passed; });
}

std::vector<std::string> GradcheckReport::failed_groups() const {
  std::vector<std::string> out;
  for (const auto& g : groups) {
    if (!g.passed) out.push_back(g.name);
  }
  return out;
}

std::string GradcheckReport::format() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %8s %14s  %s\n", "group", "entries", "max_rel_err",
                "status");
  os << line;
  for (const auto& g : groups) {
    std::snprintf(line, sizeof line, "%-16s %8zu %14.3e  %s\n", g.name.c_str(), g.checked,
                  g.max_rel_error, g.passed ? "ok" : ("FAIL (" + g.worst_parameter + ")").c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "tolerance %.1e: %s\n", tolerance, passed() ? "PASS" : "FAIL");
  os << line;
  return os.str();
}

GradcheckReport gradcheck(const GradcheckOptions& options) {
  auto model = MansModel<double>::init(options.config);
  const auto& cfg = model.config;
  Tensor<double> inputs(Shape{options.batch, cfg.frames, cfg.joints, 3});
  std::vector<int> labels(options.batch);
  {
    Rng rng(options.data_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : inputs.data()) v = normal(rng);
    for (std::size_t b = 0; b < options.batch; ++b) {
      labels[b] = static_cast<int>(b % cfg.num_classes);
    }
  }
  LossFn loss = [&](Tape<double>& tape) {
    auto logits = mans_forward(tape, model, inputs, Mode::kTrain);
    return ops::softmax_cross_entropy(tape, logits, std::span<const int>(labels)).loss;
  };

  GradcheckReport report;
  report.tolerance = options.tolerance;
  report.tensors = check_gradients(loss, model.trainable(), options.fd);
  std::map<std::string, GradcheckGroup> groups;
  std::vector<std::string> order;
  for (const auto& t : report.tensors) {
    const auto name = gradcheck_group(t.name);
    auto [it, fresh] = groups.try_emplace(name, GradcheckGroup{name, 0, 0.0, "", true});
    if (fresh) order.push_back(name);
    GradcheckGroup& g = it->second;
    g.checked += t.checked;
    if (t.max_rel_error >= g.max_rel_error) {
      g.max_rel_error = t.max_rel_error;
      g.worst_parameter = t.name;
    }
  }
  for (const auto& name : order) {
    GradcheckGroup g = groups.at(name);
    g.passed = !(g.max_rel_error >= options.tolerance);
    report.groups.push_back(std::move(g));
  }
  return report;
}

}  // namespace mans
