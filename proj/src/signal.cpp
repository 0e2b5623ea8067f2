#include "bfd/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "bfd/error.hpp"

namespace bfd {

const FaultLabel& fault_label(int id) {
  if (id < 0 || id >= kNumClasses) raise(ErrorCode::kInvalidClass, "class id " + std::to_string(id) + " not in 0..9");
  return kFaultLabels[static_cast<std::size_t>(id)];
}

const FaultLabel& fault_label(std::string_view name) {
  for (const auto& l : kFaultLabels) {
    if (l.name == name) return l;
  }
  raise(ErrorCode::kInvalidClass, "unknown fault label '" + std::string(name) + "'");
}

Normalized normalize(std::span<const double> samples) {
  if (samples.size() < 2) raise(ErrorCode::kDegenerateSignal, "need at least two samples to normalize");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double min = *lo;
  const double max = *hi;
  if (!(max - min >= 1e-12)) {
    raise(ErrorCode::kDegenerateSignal, "signal range " + std::to_string(max - min) + " is below 1e-12");
  }
  Normalized out;
  out.params = NormalizationParams{min, max};
  out.values.reserve(samples.size());
  const double range = max - min;
  for (double x : samples) out.values.push_back((x - min) / range);
  return out;
}

Normalized normalize(const Recording& recording) { return normalize(recording.samples); }

Recording normalized_copy(const Recording& recording) {
  Recording out = recording;
  out.samples = normalize(recording.samples).values;
  return out;
}

Frame frame_direct(std::span<const double> samples, int rows, int cols, std::size_t start) {
  if (rows < 1 || cols < 1) raise(ErrorCode::kInvalidArgument, "frame dims must be positive");
  const std::size_t area = static_cast<std::size_t>(rows) * cols;
  if (start > samples.size() || samples.size() - start < area) {
    raise(ErrorCode::kOutOfRange, "window [" + std::to_string(start) + ", " + std::to_string(start + area) +
                                      ") exceeds " + std::to_string(samples.size()) + " samples");
  }
  Frame f;
  f.rows = rows;
  f.cols = cols;
  f.values.resize(area);
  for (std::size_t i = 0; i < area; ++i) f.values[i] = static_cast<float>(samples[start + i]);
  return f;
}

std::vector<SampledFrame> sample_windows_with_offsets(const Recording& recording, std::size_t count, int rows,
                                                      int cols, std::uint64_t seed) {
  if (count < 1) raise(ErrorCode::kInvalidArgument, "window count must be at least 1");
  const std::size_t area = static_cast<std::size_t>(rows) * cols;
  const std::size_t len = recording.samples.size();
  if (len < area) {
    raise(ErrorCode::kInsufficientData, "recording of " + std::to_string(len) + " samples is shorter than a frame");
  }
  const std::size_t offsets = len - area + 1;
  if (count > offsets) {
    raise(ErrorCode::kInsufficientData, "requested " + std::to_string(count) + " windows but only " +
                                            std::to_string(offsets) + " distinct offsets exist");
  }
  // Partial Fisher-Yates over the offset range.
  std::vector<std::size_t> pool(offsets);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::vector<SampledFrame> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, offsets - 1);
    std::swap(pool[i], pool[pick(rng)]);
    SampledFrame s{pool[i], frame_direct(recording.samples, rows, cols, pool[i])};
    s.frame.label = recording.label;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Frame> sample_windows(const Recording& recording, std::size_t count, int rows, int cols,
                                  std::uint64_t seed) {
  std::vector<Frame> out;
  for (auto& s : sample_windows_with_offsets(recording, count, rows, cols, seed)) out.push_back(std::move(s.frame));
  return out;
}

namespace {

constexpr double kShaftHz = kDefaultRpm / 60.0;

// Ball faults strike at twice the ball spin frequency and are modulated by
// the cage; inner-race faults are modulated by the shaft; outer-race faults
// sit in the load zone and are unmodulated. Severity scales the amplitude.
constexpr double kBallHz = 2.0 * 2.357 * kShaftHz;
constexpr double kInnerHz = 5.415 * kShaftHz;
constexpr double kOuterHz = 3.585 * kShaftHz;
constexpr double kCageHz = 0.398 * kShaftHz;

constexpr std::array<double, 3> kSeverityAmplitude = {0.5, 1.0, 1.8};

constexpr SyntheticClassParams ball(int s) { return {kBallHz, kSeverityAmplitude[s], 2600.0, 0.8, kCageHz, 0.15}; }
constexpr SyntheticClassParams inner(int s) { return {kInnerHz, kSeverityAmplitude[s], 3500.0, 0.6, kShaftHz, 0.30}; }
constexpr SyntheticClassParams outer(int s) { return {kOuterHz, kSeverityAmplitude[s], 1800.0, 1.0, 0.0, 0.0}; }

constexpr std::array<SyntheticClassParams, kNumClasses> kSyntheticTable = {{
    {},
    ball(0), inner(0), outer(0),
    ball(1), inner(1), outer(1),
    ball(2), inner(2), outer(2),
}};

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void add_impulses(std::vector<double>& out, const SyntheticClassParams& p, std::uint64_t seed) {
  if (p.impulse_hz <= 0.0) return;
  const double fs = kDefaultSampleRateHz;
  const double period = fs / p.impulse_hz;
  const double tau = p.decay_ms * 1e-3 * fs;
  const auto ring = static_cast<std::size_t>(std::ceil(8.0 * tau));
  std::mt19937_64 rng(mix(seed ^ 0x1A2B3C4DULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double mod_phase = 2.0 * std::numbers::pi * unit(rng);
  double t = period * unit(rng);
  const double len = static_cast<double>(out.size());
  while (t < len) {
    const double mod = 1.0 + p.modulation_depth * std::cos(2.0 * std::numbers::pi * p.modulation_hz * t / fs + mod_phase);
    const double amp = p.amplitude * mod * (1.0 + 0.05 * gauss(rng));
    const auto first = static_cast<std::size_t>(std::ceil(t));
    for (std::size_t n = first; n < out.size() && n < first + ring; ++n) {
      const double dt = static_cast<double>(n) - t;
      out[n] += amp * std::exp(-dt / tau) * std::sin(2.0 * std::numbers::pi * p.resonance_hz * dt / fs);
    }
    t += period * (1.0 + 0.01 * gauss(rng));
  }
}

}  // namespace

const SyntheticClassParams& synthetic_params(int class_id) {
  (void)fault_label(class_id);
  return kSyntheticTable[static_cast<std::size_t>(class_id)];
}

std::vector<double> synthetic_impulse_component(int class_id, std::size_t length, std::uint64_t seed) {
  const auto& p = synthetic_params(class_id);
  std::vector<double> out(length, 0.0);
  add_impulses(out, p, seed);
  return out;
}

Recording generate_synthetic(int class_id, std::size_t length, std::uint64_t seed) {
  const auto& label = fault_label(class_id);
  if (length < static_cast<std::size_t>(kFrameRows) * kFrameCols) {
    raise(ErrorCode::kInvalidArgument, "synthetic length must be at least 400 samples");
  }
  Recording rec;
  rec.label = label;
  rec.source_name = "synthetic:" + std::string(label.name) + ":" + std::to_string(seed);
  rec.samples = synthetic_impulse_component(class_id, length, seed);

  std::mt19937_64 rng(mix(seed ^ 0x5EED0001ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double w = 2.0 * std::numbers::pi * kShaftHz / kDefaultSampleRateHz;
  for (std::size_t n = 0; n < length; ++n) {
    rec.samples[n] += kBaseAmplitude * std::sin(w * static_cast<double>(n) + phase) + noise(rng);
  }
  return rec;
}

std::vector<Frame> Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Frame> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(frames.at(i));
  return out;
}

Dataset make_dataset(std::vector<Frame> frames, SplitFractions fractions, std::uint64_t seed) {
  const double sum = fractions.train + fractions.val + fractions.test;
  if (std::abs(sum - 1.0) > 1e-9 || fractions.train <= 0 || fractions.val <= 0 || fractions.test <= 0) {
    raise(ErrorCode::kInvalidArgument, "split fractions must be positive and sum to 1");
  }
  Dataset ds;
  ds.seed = seed;
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].label) raise(ErrorCode::kInvalidArgument, "dataset frames must be labeled");
    by_class[static_cast<std::size_t>(frames[i].label->id)].push_back(i);
  }
  std::mt19937_64 rng(mix(seed ^ 0x5711700ULL));
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    if (idx.size() < 3) raise(ErrorCode::kEmptySplit, "a class needs at least 3 frames to appear in every split");
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n = idx.size();
    auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fractions.val * n)));
    auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fractions.test * n)));
    if (n_val + n_test >= n) n_val = n_test = 1;
    const std::size_t n_train = n - n_val - n_test;
    ds.split.train.insert(ds.split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.split.val.insert(ds.split.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    ds.split.test.insert(ds.split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  }
  std::sort(ds.split.train.begin(), ds.split.train.end());
  std::sort(ds.split.val.begin(), ds.split.val.end());
  std::sort(ds.split.test.begin(), ds.split.test.end());
  ds.frames = std::move(frames);
  return ds;
}

std::uint64_t synthetic_recording_seed(std::uint64_t dataset_seed, int class_id, bool held_out) {
  return mix(mix(dataset_seed) + static_cast<std::uint64_t>(class_id) * 0x100000001B3ULL + (held_out ? 0xABCDEFULL : 0));
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  std::vector<Frame> frames;
  frames.reserve(spec.frames_per_class * kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    const auto rec_seed = synthetic_recording_seed(spec.seed, c);
    const auto rec = normalized_copy(generate_synthetic(c, spec.recording_length, rec_seed));
    auto f = sample_windows(rec, spec.frames_per_class, kFrameRows, kFrameCols, mix(rec_seed ^ 0x77ULL));
    frames.insert(frames.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
  }
  return make_dataset(std::move(frames), spec.fractions, spec.seed);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) raise(ErrorCode::kParseError, "bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

Recording read_csv_recording(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIo, "cannot open " + path.string());
  Recording rec;
  rec.source_name = path.filename().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::istringstream fields(t.substr(1));
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "label") {
          rec.label = fault_label(std::string_view(value));
        } else if (key == "rate") {
          rec.sample_rate_hz = parse_int(value, "rate");
        } else if (key == "rpm") {
          rec.rpm = parse_int(value, "rpm");
        }
      }
      continue;
    }
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) {
      raise(ErrorCode::kParseError, path.string() + ":" + std::to_string(lineno) + ": not a number: '" + t + "'");
    }
    rec.samples.push_back(v);
  }
  if (rec.sample_rate_hz <= 0 || rec.rpm <= 0) raise(ErrorCode::kParseError, "rate and rpm must be positive");
  return rec;
}

void write_csv_recording(const Recording& recording, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot write " + path.string());
  out << "# label=" << recording.label.name << " rate=" << recording.sample_rate_hz << " rpm=" << recording.rpm
      << "\n";
  char buf[32];
  for (double v : recording.samples) {
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, p - buf);
    out.put('\n');
  }
  if (!out) raise(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIo, "cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = t.rfind(',');
    if (comma == std::string::npos) {
      raise(ErrorCode::kParseError, path.string() + ":" + std::to_string(lineno) + ": expected <path>,<class-id>");
    }
    ManifestEntry e;
    e.path = trim(std::string_view(t).substr(0, comma));
    e.class_id = parse_int(trim(std::string_view(t).substr(comma + 1)), "class id");
    (void)fault_label(e.class_id);
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& e : entries) out << e.path.string() << "," << e.class_id << "\n";
}

Dataset load_manifest_dataset(const std::filesystem::path& manifest, std::size_t frames_per_recording,
                              SplitFractions fractions, std::uint64_t seed) {
  std::vector<Frame> frames;
  std::uint64_t i = 0;
  for (const auto& entry : read_manifest(manifest)) {
    Recording rec = read_csv_recording(entry.path);
    rec.label = fault_label(entry.class_id);
    rec = normalized_copy(rec);
    auto f = sample_windows(rec, frames_per_recording, kFrameRows, kFrameCols, mix(seed + ++i));
    frames.insert(frames.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
  }
  if (frames.empty()) raise(ErrorCode::kEmptySplit, "manifest " + manifest.string() + " lists no recordings");
  return make_dataset(std::move(frames), fractions, seed);
}

}  // namespace bfd
