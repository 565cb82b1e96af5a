#pragma once

// Skeleton sequences, the ".skl" text format, resampling onto the fixed
// frame x joint grid, and a synthetic action corpus.
//
// ".skl": one header line "F J label subject_id" followed by F rows of 3*J
// floats ordered x1 y1 z1 x2 y2 z2 ...; lines starting with '#' are comments.
// Several sequences may follow one another in a file.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mans {

struct SkeletonSequence {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::vector<double> coords;  // frames x joints x 3
  int label = 0;
  std::string subject = "-";

  double at(std::size_t frame, std::size_t joint, std::size_t axis) const {
    return coords[(frame * joints + joint) * 3 + axis];
  }
  double& at(std::size_t frame, std::size_t joint, std::size_t axis) {
    return coords[(frame * joints + joint) * 3 + axis];
  }
};

/// Three normalized T x N coordinate planes (x, y, z) and the class label.
struct GridSample {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::vector<double> planes;  // 3 x frames x joints
  int label = 0;

  std::span<const double> plane(std::size_t axis) const {
    return std::span<const double>(planes).subspan(axis * frames * joints, frames * joints);
  }
};

std::vector<SkeletonSequence> parse_skl(std::istream& in);
std::vector<SkeletonSequence> load_skl(const std::filesystem::path& path);
/// Writes coordinates with 9 significant digits.
void write_skl(std::ostream& out, const SkeletonSequence& seq);
void save_skl(const std::filesystem::path& path, std::span<const SkeletonSequence> seqs);

/// Bilinear resampling of each F x J plane onto T x N (corner-aligned), then
/// per-plane z-normalization; planes with std < 1e-8 are only centered.
GridSample resize_sequence(const SkeletonSequence& seq, std::size_t frames, std::size_t joints);

struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 50;
  std::size_t frames_min = 40;
  std::size_t frames_max = 80;
  std::size_t joints = 20;
  /// Cycles per sequence for each class; empty means 1 + 0.75 * class.
  std::vector<double> frequencies;
  double amplitude = 0.3;
  double class_offset = 0.1;
  double noise_sigma = 0.02;
  /// Time warp t -> F * (t / (F-1))^g with log g ~ uniform(-speed_warp, speed_warp).
  double speed_warp = 0.2;
  /// Rotation about the vertical axis, uniform in +-rotation_jitter radians.
  double rotation_jitter = 0.15;
  std::uint64_t seed = 7;
  double train_fraction = 0.8;

  std::vector<double> class_frequencies() const;
  void validate() const;
};

SynthSpec parse_synth_spec(std::istream& in);
SynthSpec load_synth_spec(const std::filesystem::path& path);
/// Applies one "key = value" setting; throws ArgumentError naming an unknown key.
void apply_synth_setting(SynthSpec& spec, const std::string& key, const std::string& value);
std::vector<std::string> synth_keys();

struct SequenceSplit {
  std::vector<SkeletonSequence> train;
  std::vector<SkeletonSequence> val;
  std::vector<SkeletonSequence> test;
};

struct GridSplit {
  std::vector<GridSample> train;
  std::vector<GridSample> val;
  std::vector<GridSample> test;
};

/// Raw synthetic sequences, split per class (first train_fraction of each class to train).
SequenceSplit synth_sequences(const SynthSpec& spec);
/// synth_sequences resampled onto the T x N grid.
GridSplit synth_generate(const SynthSpec& spec, std::size_t frames = 50, std::size_t joints = 50);

GridSplit resize_split(const SequenceSplit& split, std::size_t frames, std::size_t joints);

/// Writes one .skl file per sequence plus "corpus.tsv" (columns path, split).
void write_corpus(const std::filesystem::path& dir, const SequenceSplit& split);
/// Reads "corpus.tsv" from `dir`; split names are train, val and test.
SequenceSplit load_corpus(const std::filesystem::path& dir);

/// FNV-1a over labels and coordinate bytes of every sample, in order.
std::uint64_t split_hash(const GridSplit& split);

}  // namespace mans
