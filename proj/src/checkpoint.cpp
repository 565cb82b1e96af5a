#include "mans/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "mans/errors.hpp"

namespace mans {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[4] = {'M', 'A', 'N', 'S'};
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxName = 4096;

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename U>
bool get(std::istream& in, U& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  return in.gcount() == static_cast<std::streamsize>(sizeof value);
}

[[noreturn]] void truncated(const std::string& what) {
  throw FormatError("truncated checkpoint: " + what);
}

NamedTensors<float> meta_entries(const ExperimentConfig& c) {
  auto scalar = [](double v) { return Tensor<float>::scalar(static_cast<float>(v)); };
  return {
      {"meta.frames", scalar(static_cast<double>(c.frames))},
      {"meta.joints", scalar(static_cast<double>(c.joints))},
      {"meta.hidden", scalar(static_cast<double>(c.hidden))},
      {"meta.alpha", scalar(static_cast<double>(c.alpha))},
      {"meta.depth", scalar(static_cast<double>(c.depth))},
      {"meta.width1", scalar(static_cast<double>(c.width1))},
      {"meta.width2", scalar(static_cast<double>(c.width2))},
      {"meta.num_classes", scalar(static_cast<double>(c.num_classes))},
      {"meta.variant", scalar(static_cast<double>(c.variant))},
      {"meta.use_shortcuts", scalar(c.use_shortcuts ? 1.0 : 0.0)},
      {"meta.attention_bias", scalar(c.attention_bias ? 1.0 : 0.0)},
  };
}

template <typename T>
NamedTensors<T> model_entries(const MansModel<T>& model) {
  auto out = model.parameters();
  for (auto& b : model.buffers()) out.push_back(std::move(b));
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const NamedTensors<float>& entries) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& [name, t] : entries) {
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, t.rank());
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.raw()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
}

NamedTensors<float> read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  std::uint32_t version = 0;
  if (!get(in, version)) truncated("missing version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  NamedTensors<float> entries;
  while (true) {
    std::uint64_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
    if (in.gcount() == 0) break;
    if (in.gcount() != sizeof name_len) truncated("entry header");
    if (name_len == 0 || name_len > kMaxName) throw FormatError("bad entry name length");
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (in.gcount() != static_cast<std::streamsize>(name_len)) truncated("entry name");
    std::uint64_t rank = 0;
    if (!get(in, rank)) truncated(name + " rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError(name + ": bad rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t dim = 0;
      if (!get(in, dim)) truncated(name + " dims");
      if (dim == 0 || dim > (std::uint64_t{1} << 32)) throw FormatError(name + ": bad dimension");
      d = dim;
    }
    Tensor<float> t(shape);
    const auto bytes = static_cast<std::streamsize>(t.numel() * sizeof(float));
    in.read(reinterpret_cast<char*>(t.raw()), bytes);
    if (in.gcount() != bytes) truncated(name + " payload");
    entries.emplace_back(std::move(name), std::move(t));
  }
  return entries;
}

template <typename T>
void save_model(const std::filesystem::path& path, const MansModel<T>& model) {
  NamedTensors<float> entries = meta_entries(model.config);
  for (const auto& [name, t] : model_entries(model)) {
    Tensor<float> f(t.shape());
    std::copy(t.data().begin(), t.data().end(), f.data().begin());
    entries.emplace_back(name, std::move(f));
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    write_checkpoint(out, entries);
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
MansModel<T> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::map<std::string, Tensor<float>> entries;
  for (auto& [name, t] : read_checkpoint(in)) {
    if (!entries.emplace(name, t).second) throw FormatError("duplicate entry " + name);
  }
  auto meta = [&](const std::string& key) -> std::size_t {
    auto it = entries.find("meta." + key);
    if (it == entries.end()) throw FormatError("checkpoint lacks meta." + key);
    const float v = it->second.raw()[0];
    if (!(v >= 0.0f) || v != static_cast<float>(static_cast<std::size_t>(v))) {
      throw FormatError("bad value for meta." + key);
    }
    entries.erase(it);
    return static_cast<std::size_t>(v);
  };
  ExperimentConfig config;
  config.frames = meta("frames");
  config.joints = meta("joints");
  config.hidden = meta("hidden");
  config.alpha = meta("alpha");
  const auto depth = meta("depth");
  const auto variant = meta("variant");
  if (depth > 2 || variant > 2) throw FormatError("bad depth or variant in checkpoint");
  config.depth = static_cast<Depth>(depth);
  config.variant = static_cast<Variant>(variant);
  config.width1 = meta("width1");
  config.width2 = meta("width2");
  config.num_classes = meta("num_classes");
  config.use_shortcuts = meta("use_shortcuts") != 0;
  config.attention_bias = meta("attention_bias") != 0;
  try {
    config.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("inconsistent checkpoint config: ") + e.what());
  }

  auto model = MansModel<T>::init(config);
  for (auto& [name, t] : model_entries(model)) {
    auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint lacks " + name);
    if (it->second.shape() != t.shape()) {
      throw FormatError(name + ": shape " + shape_string(it->second.shape()) + " does not match " +
                        shape_string(t.shape()));
    }
    std::copy(it->second.data().begin(), it->second.data().end(), t.data().begin());
    entries.erase(it);
  }
  if (!entries.empty()) throw FormatError("unexpected entry " + entries.begin()->first);
  return model;
}

template void save_model<float>(const std::filesystem::path&, const MansModel<float>&);
template void save_model<double>(const std::filesystem::path&, const MansModel<double>&);
template MansModel<float> load_model<float>(const std::filesystem::path&);
template MansModel<double> load_model<double>(const std::filesystem::path&);

}  // namespace mans
