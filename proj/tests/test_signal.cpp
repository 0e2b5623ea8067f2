#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "bfd/error.hpp"
#include "bfd/signal.hpp"

using namespace bfd;
namespace fs = std::filesystem;

namespace {

std::vector<double> power_spectrum(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> p(n / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
    p[k] = std::norm(acc);
  }
  return p;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Labels, TableOrderAndLookup) {
  EXPECT_EQ(fault_label(0).name, "00-Normal");
  EXPECT_EQ(fault_label(7).name, "21-Ball");
  EXPECT_EQ(fault_label("21-OuterRace6").id, 9);
  EXPECT_THROW(fault_label(10), Error);
  EXPECT_THROW(fault_label("22-Ball"), Error);
  std::set<std::string_view> names;
  for (const auto& l : kFaultLabels) {
    EXPECT_EQ(l.name.find(' '), std::string_view::npos);
    names.insert(l.name);
  }
  EXPECT_EQ(names.size(), 10u);
}

TEST(Normalize, MapsOntoUnitInterval) {
  const std::vector<double> x = {-2, 0, 2, 6};
  const auto n = normalize(x);
  EXPECT_EQ(n.values, (std::vector<double>{0, 0.25, 0.5, 1}));
  EXPECT_EQ(n.params.min, -2);
  EXPECT_EQ(n.params.max, 6);
}

TEST(Normalize, RejectsDegenerateInput) {
  EXPECT_THROW(normalize(std::vector<double>{3, 3, 3}), Error);
  EXPECT_THROW(normalize(std::vector<double>{1}), Error);
  try {
    normalize(std::vector<double>{});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateSignal);
  }
}

TEST(Frames, DirectConversionIsRowMajor) {
  std::vector<double> s(450);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  const auto f = frame_direct(s, 20, 20, 0);
  EXPECT_EQ(f.at(0, 0), 0.0f);
  EXPECT_EQ(f.at(0, 19), 19.0f);
  EXPECT_EQ(f.at(1, 0), 20.0f);
  EXPECT_EQ(f.at(19, 19), 399.0f);
  EXPECT_EQ(frame_direct(s, 20, 20, 50).at(19, 19), 449.0f);
  EXPECT_THROW(frame_direct(s, 20, 20, 51), Error);
  const auto g = frame_direct(std::vector<double>{1, 2, 3, 4}, 2, 2, 0);
  EXPECT_EQ(g.values, (std::vector<float>{1, 2, 3, 4}));
}

TEST(Frames, SampledWindowsAreDistinctInRangeAndSeeded) {
  Recording rec;
  rec.samples.resize(1000);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) rec.samples[i] = static_cast<double>(i);
  const auto a = sample_windows_with_offsets(rec, 200, 20, 20, 4);
  const auto b = sample_windows_with_offsets(rec, 200, 20, 20, 4);
  std::set<std::size_t> starts;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].start, b[i].start);
    EXPECT_LE(a[i].start, 600u);
    EXPECT_EQ(a[i].frame.at(0, 0), static_cast<float>(a[i].start));
    starts.insert(a[i].start);
  }
  EXPECT_EQ(starts.size(), 200u);
  EXPECT_THROW(sample_windows(rec, 602, 20, 20, 1), Error);
  EXPECT_EQ(sample_windows(rec, 601, 20, 20, 1).size(), 601u);
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  const auto a = generate_synthetic(5, 2000, 9);
  const auto b = generate_synthetic(5, 2000, 9);
  const auto c = generate_synthetic(5, 2000, 10);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.label.id, 5);
  EXPECT_EQ(a.sample_rate_hz, 12000);
  EXPECT_THROW(generate_synthetic(0, 100, 1), Error);
  EXPECT_THROW(generate_synthetic(10, 1000, 1), Error);
}

TEST(Synthetic, HealthyClassHasNoImpulses) {
  for (double v : synthetic_impulse_component(0, 4000, 3)) EXPECT_EQ(v, 0.0);
}

TEST(Synthetic, ImpulseEnergySitsAroundResonance) {
  for (int c = 1; c < kNumClasses; ++c) {
    const auto x = synthetic_impulse_component(c, 2048, 17);
    const auto p = power_spectrum(x);
    const double hz_per_bin = 12000.0 / 2048.0;
    const double res = synthetic_params(c).resonance_hz;
    double band = 0, total = 0;
    for (std::size_t k = 1; k < p.size(); ++k) {
      total += p[k];
      if (std::abs(k * hz_per_bin - res) <= 600.0) band += p[k];
    }
    EXPECT_GT(band / total, 0.5) << "class " << c;
  }
}

TEST(Synthetic, SeverityScalesImpulseEnergy) {
  auto energy = [](int c) {
    double e = 0;
    for (double v : synthetic_impulse_component(c, 12000, 5)) e += v * v;
    return e;
  };
  // Ball 07 < 14 < 21, likewise for the races.
  for (int base : {1, 2, 3}) {
    EXPECT_LT(energy(base), energy(base + 3));
    EXPECT_LT(energy(base + 3), energy(base + 6));
  }
}

TEST(Synthetic, SpectraSeparateClassesByNearestCentroid) {
  SyntheticSpec spec;
  spec.frames_per_class = 60;
  spec.recording_length = 12000;
  spec.seed = 3;
  const auto ds = make_synthetic_dataset(spec);
  auto features = [](const Frame& f) {
    std::vector<double> x(f.values.begin(), f.values.end());
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double& v : x) v -= mean;
    auto p = power_spectrum(x);
    for (double& v : p) v = std::log1p(v);
    return p;
  };
  std::vector<std::vector<double>> centroid(kNumClasses);
  std::vector<int> count(kNumClasses, 0);
  for (auto i : ds.split.train) {
    const auto& f = ds.frames[i];
    const auto feat = features(f);
    auto& c = centroid[static_cast<std::size_t>(f.label->id)];
    if (c.empty()) c.assign(feat.size(), 0.0);
    for (std::size_t k = 0; k < feat.size(); ++k) c[k] += feat[k];
    ++count[static_cast<std::size_t>(f.label->id)];
  }
  for (int c = 0; c < kNumClasses; ++c)
    for (double& v : centroid[static_cast<std::size_t>(c)]) v /= count[static_cast<std::size_t>(c)];
  std::size_t correct = 0;
  for (auto i : ds.split.test) {
    const auto feat = features(ds.frames[i]);
    int best = -1;
    double best_d = INFINITY;
    for (int c = 0; c < kNumClasses; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < feat.size(); ++k) d += std::pow(feat[k] - centroid[static_cast<std::size_t>(c)][k], 2);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == ds.frames[i].label->id;
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(ds.split.test.size()), 0.5);
}

TEST(Dataset, StratifiedDisjointSplits) {
  std::vector<Frame> frames;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 20; ++i) {
      Frame f;
      f.values.assign(400, static_cast<float>(c * 100 + i));
      f.label = fault_label(c);
      frames.push_back(f);
    }
  const auto ds = make_dataset(frames, SplitFractions{}, 1);
  std::set<std::size_t> all;
  for (const auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) {
    std::vector<int> per(4, 0);
    for (auto i : *part) {
      EXPECT_TRUE(all.insert(i).second);
      ++per[static_cast<std::size_t>(ds.frames[i].label->id)];
    }
    for (int n : per) EXPECT_GT(n, 0);
  }
  EXPECT_EQ(all.size(), frames.size());
  EXPECT_EQ(ds.split.train.size(), 56u);
  EXPECT_THROW(make_dataset(std::vector<Frame>(frames.begin(), frames.begin() + 2), SplitFractions{}, 1), Error);
  EXPECT_THROW(make_dataset(frames, SplitFractions{0.5, 0.2, 0.2}, 1), Error);
}

TEST(Dataset, SyntheticDatasetShape) {
  SyntheticSpec spec;
  spec.frames_per_class = 30;
  spec.recording_length = 4000;
  const auto ds = make_synthetic_dataset(spec);
  EXPECT_EQ(ds.frames.size(), 300u);
  for (const auto& f : ds.frames) {
    ASSERT_TRUE(f.label.has_value());
    for (float v : f.values) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  EXPECT_NE(synthetic_recording_seed(1, 3, false), synthetic_recording_seed(1, 3, true));
  EXPECT_NE(synthetic_recording_seed(1, 3, false), synthetic_recording_seed(1, 4, false));
}

TEST(Csv, RoundTripKeepsSamplesAndMetadata) {
  const auto dir = temp_dir("bfd_csv_test");
  auto rec = generate_synthetic(4, 1000, 2);
  rec.rpm = 1750;
  write_csv_recording(rec, dir / "r.csv");
  const auto back = read_csv_recording(dir / "r.csv");
  EXPECT_EQ(back.samples, rec.samples);
  EXPECT_EQ(back.label.id, 4);
  EXPECT_EQ(back.rpm, 1750);

  std::ofstream(dir / "bad.csv") << "0.5\nnope\n";
  EXPECT_THROW(read_csv_recording(dir / "bad.csv"), Error);
  EXPECT_THROW(read_csv_recording(dir / "missing.csv"), Error);
}

TEST(Csv, ManifestResolvesRelativePaths) {
  const auto dir = temp_dir("bfd_manifest_test");
  std::vector<ManifestEntry> entries;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto name = "c" + std::to_string(c) + ".csv";
    write_csv_recording(generate_synthetic(c, 1500, 7), dir / name);
    entries.push_back({name, c});
  }
  write_manifest(entries, dir / "manifest.txt");
  const auto back = read_manifest(dir / "manifest.txt");
  ASSERT_EQ(back.size(), entries.size());
  EXPECT_EQ(back[3].class_id, 3);
  const auto ds = load_manifest_dataset(dir / "manifest.txt", 20, SplitFractions{}, 1);
  EXPECT_EQ(ds.frames.size(), 200u);
}
