#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bfd {

struct FaultLabel {
  int id = 0;
  std::string_view name;
  std::string_view annotation;

  friend bool operator==(const FaultLabel& a, const FaultLabel& b) { return a.id == b.id; }
};

inline constexpr int kNumClasses = 10;

// Drive-end classes at 1797 rpm, ids in table order.
inline constexpr std::array<FaultLabel, kNumClasses> kFaultLabels = {{
    {0, "00-Normal", "Normal without fault"},
    {1, "07-Ball", "0.007 inch ball fault"},
    {2, "07-InnerRace", "0.007 inch inner race fault"},
    {3, "07-OuterRace6", "0.007 inch 6 o'clock race fault"},
    {4, "14-Ball", "0.014 inch ball fault"},
    {5, "14-InnerRace", "0.014 inch inner race fault"},
    {6, "14-OuterRace6", "0.014 inch 6 o'clock race fault"},
    {7, "21-Ball", "0.021 inch ball fault"},
    {8, "21-InnerRace", "0.021 inch inner race fault"},
    {9, "21-OuterRace6", "0.021 inch 6 o'clock race fault"},
}};

// Throws InvalidClass for ids outside 0..9.
const FaultLabel& fault_label(int id);
// Lookup by name ("21-Ball"); throws InvalidClass when unknown.
const FaultLabel& fault_label(std::string_view name);

inline constexpr int kDefaultSampleRateHz = 12000;
inline constexpr int kDefaultRpm = 1797;
inline constexpr int kFrameRows = 20;
inline constexpr int kFrameCols = 20;

struct Recording {
  std::vector<double> samples;
  int sample_rate_hz = kDefaultSampleRateHz;
  int rpm = kDefaultRpm;
  FaultLabel label = kFaultLabels[0];
  std::string source_name;
};

struct NormalizationParams {
  double min = 0.0;
  double max = 1.0;
};

struct Normalized {
  std::vector<double> values;
  NormalizationParams params;
};

// y = (x - min) / (max - min) over the whole input. Throws DegenerateSignal
// when fewer than two samples or when max - min < 1e-12.
Normalized normalize(std::span<const double> samples);
Normalized normalize(const Recording& recording);

// Recording with its samples replaced by their normalized values.
Recording normalized_copy(const Recording& recording);

struct Frame {
  int rows = kFrameRows;
  int cols = kFrameCols;
  // Row-major, oldest sample at [0][0].
  std::vector<float> values;
  std::optional<FaultLabel> label;

  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

// values[r][c] = samples[start + r * cols + c]. Throws OutOfRange when the
// window runs past the end.
Frame frame_direct(std::span<const double> samples, int rows, int cols, std::size_t start);

struct SampledFrame {
  std::size_t start = 0;
  Frame frame;
};

// count windows at distinct offsets drawn uniformly from
// [0, len - rows * cols], returned in draw order. Throws InsufficientData
// when fewer than count offsets exist.
std::vector<SampledFrame> sample_windows_with_offsets(const Recording& recording, std::size_t count, int rows,
                                                      int cols, std::uint64_t seed);
std::vector<Frame> sample_windows(const Recording& recording, std::size_t count, int rows, int cols,
                                  std::uint64_t seed);

// Per-class parameters of the synthetic vibration model.
struct SyntheticClassParams {
  double impulse_hz = 0.0;      // fault characteristic frequency; 0 for healthy
  double amplitude = 0.0;       // impulse peak relative to the shaft sinusoid
  double resonance_hz = 0.0;    // ring-down carrier
  double decay_ms = 0.0;        // ring-down time constant
  double modulation_hz = 0.0;   // amplitude modulation of the impulse train
  double modulation_depth = 0.0;
};

const SyntheticClassParams& synthetic_params(int class_id);

inline constexpr double kBaseAmplitude = 1.0;
inline constexpr double kNoiseSigma = 0.05 * kBaseAmplitude;

// Shaft sinusoid at rpm/60 Hz plus the class impulse train plus Gaussian
// noise; raw (not normalized). Deterministic in (class_id, length, seed).
Recording generate_synthetic(int class_id, std::size_t length, std::uint64_t seed);

// Only the deterministic impulse component, for energy checks.
std::vector<double> synthetic_impulse_component(int class_id, std::size_t length, std::uint64_t seed);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct Dataset {
  std::vector<Frame> frames;  // all labeled
  DatasetSplit split;
  std::uint64_t seed = 0;

  std::vector<Frame> subset(std::span<const std::size_t> indices) const;
};

// Stratified split: each class is shuffled with the seed and cut by the
// fractions, so every class lands in every split (needs >= 3 frames/class).
Dataset make_dataset(std::vector<Frame> frames, SplitFractions fractions, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t frames_per_class = 1000;
  std::size_t recording_length = 60000;
  std::uint64_t seed = 1;
  SplitFractions fractions{};
};

// One synthetic recording per class, normalized per recording, windowed
// into 20x20 frames and split.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

// Seed used for class_id's recording in a synthetic dataset with the given
// top-level seed. Held-out recordings use a different stream.
std::uint64_t synthetic_recording_seed(std::uint64_t dataset_seed, int class_id, bool held_out = false);

// CSV recordings: one float per line, optional first line
// "# label=<name> rate=<hz> rpm=<rpm>".
Recording read_csv_recording(const std::filesystem::path& path);
void write_csv_recording(const Recording& recording, const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;
  int class_id = 0;
};

// "<path>,<class-id>" per line; relative paths resolve against the
// manifest's directory. Blank lines and '#' comments are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path);

// Loads every manifest recording, normalizes it and samples
// frames_per_recording windows from each.
Dataset load_manifest_dataset(const std::filesystem::path& manifest, std::size_t frames_per_recording,
                              SplitFractions fractions, std::uint64_t seed);

}  // namespace bfd
