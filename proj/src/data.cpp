#include "mans/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "mans/errors.hpp"
#include "mans/text.hpp"

namespace mans {

namespace {

template <typename Number>
bool parse_number(std::string_view token, Number& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

std::vector<SkeletonSequence> parse_skl(std::istream& in) {
  std::vector<SkeletonSequence> result;
  std::string line;
  long line_no = 0;
  SkeletonSequence current;
  std::size_t rows_left = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tokens = split_whitespace(body);
    if (rows_left == 0) {
      if (tokens.size() != 4) {
        throw ParseError("header must be \"F J label subject_id\", got " +
                             std::to_string(tokens.size()) + " fields",
                         line_no);
      }
      std::size_t frames = 0;
      std::size_t joints = 0;
      int label = 0;
      if (!parse_number(tokens[0], frames) || !parse_number(tokens[1], joints) ||
          !parse_number(tokens[2], label) || frames == 0 || joints == 0 || label < 0) {
        throw ParseError("malformed header \"" + std::string(body) + "\"", line_no);
      }
      current = SkeletonSequence{frames, joints, {}, label, std::string(tokens[3])};
      current.coords.reserve(frames * joints * 3);
      rows_left = frames;
      continue;
    }
    const std::size_t expected = current.joints * 3;
    if (tokens.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " values, got " +
                           std::to_string(tokens.size()),
                       line_no);
    }
    for (const auto& token : tokens) {
      double v = 0.0;
      if (!parse_number(token, v)) {
        throw ParseError("not a number: \"" + std::string(token) + "\"", line_no);
      }
      if (!std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) + ": non-finite coordinate");
      }
      current.coords.push_back(v);
    }
    if (--rows_left == 0) result.push_back(std::move(current));
  }
  if (rows_left != 0) {
    throw ParseError("file ended with " + std::to_string(rows_left) + " frame rows missing",
                     line_no);
  }
  return result;
}

std::vector<SkeletonSequence> load_skl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_skl(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_skl(std::ostream& out, const SkeletonSequence& seq) {
  out << seq.frames << ' ' << seq.joints << ' ' << seq.label << ' ' << seq.subject << '\n';
  char buf[32];
  for (std::size_t f = 0; f < seq.frames; ++f) {
    for (std::size_t i = 0; i < seq.joints * 3; ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", seq.coords[f * seq.joints * 3 + i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

void save_skl(const std::filesystem::path& path, std::span<const SkeletonSequence> seqs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : seqs) write_skl(out, s);
  if (!out) throw IoError("write failed for " + path.string());
}

GridSample resize_sequence(const SkeletonSequence& seq, std::size_t frames, std::size_t joints) {
  if (seq.frames < 2 || seq.joints < 2) {
    throw ArgumentError("resize_sequence: need at least 2 frames and 2 joints, got " +
                        std::to_string(seq.frames) + "x" + std::to_string(seq.joints));
  }
  if (frames == 0 || joints == 0) throw ArgumentError("resize_sequence: empty target grid");
  GridSample out{frames, joints, std::vector<double>(3 * frames * joints), seq.label};

  auto source_pos = [](std::size_t i, std::size_t target, std::size_t source) {
    if (target == 1) return 0.0;
    return static_cast<double>(i * (source - 1)) / static_cast<double>(target - 1);
  };

  for (std::size_t axis = 0; axis < 3; ++axis) {
    double* plane = out.planes.data() + axis * frames * joints;
    for (std::size_t t = 0; t < frames; ++t) {
      const double u = source_pos(t, frames, seq.frames);
      const auto f0 = std::min(static_cast<std::size_t>(u), seq.frames - 1);
      const auto f1 = std::min(f0 + 1, seq.frames - 1);
      const double wu = u - static_cast<double>(f0);
      for (std::size_t n = 0; n < joints; ++n) {
        const double v = source_pos(n, joints, seq.joints);
        const auto j0 = std::min(static_cast<std::size_t>(v), seq.joints - 1);
        const auto j1 = std::min(j0 + 1, seq.joints - 1);
        const double wv = v - static_cast<double>(j0);
        const double top = (1.0 - wv) * seq.at(f0, j0, axis) + wv * seq.at(f0, j1, axis);
        const double bottom = (1.0 - wv) * seq.at(f1, j0, axis) + wv * seq.at(f1, j1, axis);
        plane[t * joints + n] = (1.0 - wu) * top + wu * bottom;
      }
    }
    const std::size_t count = frames * joints;
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += plane[i];
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) var += (plane[i] - mean) * (plane[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(count));
    const double scale = sd < 1e-8 ? 1.0 : 1.0 / sd;
    for (std::size_t i = 0; i < count; ++i) plane[i] = (plane[i] - mean) * scale;
  }
  return out;
}

std::vector<double> SynthSpec::class_frequencies() const {
  if (!frequencies.empty()) return frequencies;
  std::vector<double> f(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) f[c] = 1.0 + 0.75 * static_cast<double>(c);
  return f;
}

void SynthSpec::validate() const {
  if (num_classes < 1 || samples_per_class < 1) {
    throw ArgumentError("synth: num_classes and samples_per_class must be positive");
  }
  if (frames_min < 2 || frames_max < frames_min) {
    throw ArgumentError("synth: need 2 <= frames_min <= frames_max");
  }
  if (joints < 2) throw ArgumentError("synth: joints must be at least 2");
  if (noise_sigma < 0 || speed_warp < 0 || rotation_jitter < 0 || amplitude < 0 ||
      class_offset < 0) {
    throw ArgumentError("synth: noise, warp, rotation, amplitude and offset must be >= 0");
  }
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ArgumentError("synth: train_fraction must lie in (0, 1]");
  }
  auto f = class_frequencies();
  if (f.size() != num_classes) {
    throw ArgumentError("synth: " + std::to_string(f.size()) + " frequencies for " +
                        std::to_string(num_classes) + " classes");
  }
  std::sort(f.begin(), f.end());
  if (std::adjacent_find(f.begin(), f.end()) != f.end()) {
    throw ArgumentError("synth: class frequencies must be distinct");
  }
}

std::vector<std::string> synth_keys() {
  return {"num_classes", "samples_per_class", "frames_min",      "frames_max",
          "joints",      "frequencies",       "amplitude",       "class_offset",
          "noise_sigma", "speed_warp",        "rotation_jitter", "seed",
          "train_fraction"};
}

void apply_synth_setting(SynthSpec& spec, const std::string& key, const std::string& value) {
  auto count = [&](std::size_t& field) { field = parse_count(key, value); };
  auto real = [&](double& field) { field = parse_real(key, value); };
  if (key == "num_classes") return count(spec.num_classes);
  if (key == "samples_per_class") return count(spec.samples_per_class);
  if (key == "frames_min") return count(spec.frames_min);
  if (key == "frames_max") return count(spec.frames_max);
  if (key == "joints") return count(spec.joints);
  if (key == "amplitude") return real(spec.amplitude);
  if (key == "class_offset") return real(spec.class_offset);
  if (key == "noise_sigma") return real(spec.noise_sigma);
  if (key == "speed_warp") return real(spec.speed_warp);
  if (key == "rotation_jitter") return real(spec.rotation_jitter);
  if (key == "train_fraction") return real(spec.train_fraction);
  if (key == "seed") {
    spec.seed = parse_u64(key, value);
    return;
  }
  if (key == "frequencies") {
    spec.frequencies.clear();
    for (auto part : split_char(value, ',')) {
      spec.frequencies.push_back(parse_real(key, std::string(trim(part))));
    }
    return;
  }
  throw ArgumentError("unknown synth key \"" + key + "\"; valid keys: " + join(synth_keys(), ", "));
}

SynthSpec parse_synth_spec(std::istream& in) {
  SynthSpec spec;
  for (const auto& setting : read_key_values(in)) {
    try {
      apply_synth_setting(spec, setting.key, setting.value);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), setting.line);
    }
  }
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_synth_spec(in);
}

SequenceSplit synth_sequences(const SynthSpec& spec) {
  spec.validate();
  const std::size_t J = spec.joints;
  const auto freq = spec.class_frequencies();
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  std::vector<double> base(J * 3);
  {
    std::seed_seq seq{spec.seed, std::uint64_t{0}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& b : base) b = u(rng);
  }

  SequenceSplit split;
  const auto train_count = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(spec.samples_per_class)));
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    std::vector<double> amp(J * 3);
    std::vector<double> phase(J * 3);
    std::vector<double> offset(J * 3);
    {
      std::seed_seq seq{spec.seed, std::uint64_t{1}, static_cast<std::uint64_t>(c)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> scale(0.5, 1.5);
      std::uniform_real_distribution<double> angle(0.0, kTwoPi);
      std::normal_distribution<double> shift(0.0, 1.0);
      for (std::size_t i = 0; i < J * 3; ++i) {
        amp[i] = spec.amplitude * scale(rng);
        phase[i] = angle(rng);
        offset[i] = spec.class_offset * shift(rng);
      }
    }
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      std::seed_seq seq{spec.seed, std::uint64_t{2}, static_cast<std::uint64_t>(c),
                        static_cast<std::uint64_t>(s)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> frame_dist(spec.frames_min, spec.frames_max);
      const std::size_t F = frame_dist(rng);
      double gamma = 1.0;
      if (spec.speed_warp > 0) {
        gamma = std::exp(std::uniform_real_distribution<double>(-spec.speed_warp, spec.speed_warp)(rng));
      }
      double theta = 0.0;
      if (spec.rotation_jitter > 0) {
        theta = std::uniform_real_distribution<double>(-spec.rotation_jitter, spec.rotation_jitter)(rng);
      }
      std::normal_distribution<double> noise(0.0, 1.0);
      const double ct = std::cos(theta);
      const double st = std::sin(theta);

      SkeletonSequence out{F, J, std::vector<double>(F * J * 3), static_cast<int>(c),
                           "s" + std::to_string(s % 10)};
      for (std::size_t t = 0; t < F; ++t) {
        const double progress = std::pow(static_cast<double>(t) / static_cast<double>(F - 1), gamma);
        for (std::size_t j = 0; j < J; ++j) {
          double p[3];
          for (std::size_t a = 0; a < 3; ++a) {
            const std::size_t i = j * 3 + a;
            p[a] = base[i] + offset[i] + amp[i] * std::sin(kTwoPi * freq[c] * progress + phase[i]);
          }
          const double x = ct * p[0] + st * p[2];
          const double z = -st * p[0] + ct * p[2];
          out.at(t, j, 0) = x;
          out.at(t, j, 1) = p[1];
          out.at(t, j, 2) = z;
          if (spec.noise_sigma > 0) {
            for (std::size_t a = 0; a < 3; ++a) out.at(t, j, a) += spec.noise_sigma * noise(rng);
          }
        }
      }
      (s < train_count ? split.train : split.test).push_back(std::move(out));
    }
  }
  return split;
}

GridSplit resize_split(const SequenceSplit& split, std::size_t frames, std::size_t joints) {
  auto convert = [&](const std::vector<SkeletonSequence>& in) {
    std::vector<GridSample> out;
    out.reserve(in.size());
    for (const auto& s : in) out.push_back(resize_sequence(s, frames, joints));
    return out;
  };
  return {convert(split.train), convert(split.val), convert(split.test)};
}

GridSplit synth_generate(const SynthSpec& spec, std::size_t frames, std::size_t joints) {
  return resize_split(synth_sequences(spec), frames, joints);
}

void write_corpus(const std::filesystem::path& dir, const SequenceSplit& split) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "corpus.tsv");
  if (!manifest) throw IoError("cannot write " + (dir / "corpus.tsv").string());
  manifest << "path\tsplit\n";
  std::vector<std::size_t> per_class;
  auto emit = [&](const std::vector<SkeletonSequence>& seqs, const char* name) {
    for (const auto& s : seqs) {
      const auto label = static_cast<std::size_t>(s.label);
      if (per_class.size() <= label) per_class.resize(label + 1, 0);
      char file[64];
      std::snprintf(file, sizeof file, "c%02zu_%04zu.skl", label, per_class[label]++);
      save_skl(dir / file, std::span<const SkeletonSequence>(&s, 1));
      manifest << file << '\t' << name << '\n';
    }
  };
  emit(split.train, "train");
  emit(split.val, "val");
  emit(split.test, "test");
  if (!manifest) throw IoError("write failed for corpus.tsv");
}

SequenceSplit load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "corpus.tsv";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("corpus manifest not found: " + manifest_path.string());
  SequenceSplit split;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_char(body, '\t');
    if (fields.size() != 2) throw ParseError("expected \"path<TAB>split\"", line_no);
    const auto path = trim(fields[0]);
    const auto name = trim(fields[1]);
    if (line_no == 1 && path == "path" && name == "split") continue;
    std::vector<SkeletonSequence>* target = nullptr;
    if (name == "train") target = &split.train;
    else if (name == "val") target = &split.val;
    else if (name == "test") target = &split.test;
    else throw ParseError("unknown split \"" + std::string(name) + "\"", line_no);
    for (auto& s : load_skl(dir / std::string(path))) target->push_back(std::move(s));
  }
  return split;
}

std::uint64_t split_hash(const GridSplit& split) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    const std::uint64_t count = part->size();
    mix(&count, sizeof count);
    for (const auto& s : *part) {
      mix(&s.label, sizeof s.label);
      mix(s.planes.data(), s.planes.size() * sizeof(double));
    }
  }
  return h;
}

}  // namespace mans
