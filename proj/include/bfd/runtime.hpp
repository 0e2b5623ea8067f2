#pragma once

// Device simulator, host streamer and the end-to-end runner.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bfd/model.hpp"
#include "bfd/network.hpp"
#include "bfd/protocol.hpp"
#include "bfd/signal.hpp"
#include "bfd/transport.hpp"

namespace bfd {

struct DiagnosisRecord {
  int class_id = 0;
  std::string label;
  double prob = 0.0;
  std::int64_t ticks = 0;
  std::chrono::system_clock::time_point timestamp{};
};

// Three lines: "Fault: <label>", "Prob : <prob %.6f>", "Time : <ticks> ticks".
std::string render_card(const msg::Result& result);
std::string render_card(const DiagnosisRecord& record);

// Label token for a class id: the fault table name when the model has ten
// outputs, "class-<id>" otherwise.
std::string class_label(int class_id, int num_classes);

struct DeviceConfig {
  std::filesystem::path model_path;
  Endpoint listen{"127.0.0.1", 5555};
  double tick_unit_ms = 1.0;
  // Stop after this many sessions; unset serves forever.
  std::optional<std::size_t> max_sessions;
};

class Device {
 public:
  Device(Architecture arch, ModelParams params, double tick_unit_ms = 1.0);
  // Throws CorruptModel / Io.
  static Device from_file(const std::filesystem::path& path, double tick_unit_ms = 1.0);

  // Forward pass + argmax, timed. ticks = max(1, round(ms / tick_unit)).
  msg::Result classify(const Frame& frame) const;

  // Runs one session until END or EOF. Returns the number of diagnoses.
  // Transport errors end the session and are swallowed.
  std::size_t serve_session(LineChannel& channel,
                            const std::function<void(const DiagnosisRecord&)>& on_diagnosis = {}) const;

  const Architecture& arch() const { return arch_; }
  const ModelParams& params() const { return params_; }

 private:
  Architecture arch_;
  ModelParams params_;
  double tick_unit_ms_;
};

// Loads the model, listens and serves sessions one at a time, printing a card
// per diagnosis to out. on_listening receives the bound port.
void device_serve(const DeviceConfig& cfg, std::ostream& out,
                  const std::function<void(std::uint16_t)>& on_listening = {});

struct HostOptions {
  int k = 1;
  // Samples per second; 0 streams as fast as the lockstep allows.
  double rate = 0.0;
};

struct StreamSummary {
  std::size_t samples_sent = 0;
  std::size_t predictions = 0;
  std::map<int, std::size_t> histogram;  // class id -> count
  double mean_ticks = 0.0;
  std::vector<DiagnosisRecord> records;

  std::string render() const;
};

// HELLO, lockstep DATA, END. Throws HandshakeFailed when the device does not
// answer HELLO with OK, PeerError when it replies ERR.
StreamSummary host_stream(LineChannel& channel, std::span<const double> samples, const HostOptions& opts,
                          const std::function<void(const DiagnosisRecord&)>& on_diagnosis = {});
// Connection failures surface as HandshakeFailed.
StreamSummary host_stream(const Endpoint& ep, std::span<const double> samples, const HostOptions& opts,
                          const std::function<void(const DiagnosisRecord&)>& on_diagnosis = {});

// Predictions a session produces for n samples with cadence k.
std::size_t expected_predictions(std::size_t n, int k, std::size_t capacity = kFrameRows * kFrameCols);

struct E2EConfig {
  std::size_t samples_per_class = 1000;
  int k = 10;
};

struct E2EClassResult {
  int class_id = 0;
  std::size_t predictions = 0;
  std::size_t scored = 0;  // predictions minus warm-up
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct E2ESummary {
  std::vector<E2EClassResult> per_class;
  std::size_t predictions = 0;
  std::size_t scored = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double mean_ticks = 0.0;

  std::string render() const;
};

// Held-out recordings for the synthetic dataset: one per class, from the
// held-out seed stream, normalized over the full length.
std::vector<Recording> held_out_synthetic(const SyntheticSpec& spec);

// One device/host session per recording over an in-process pipe, device on its
// own thread. The first prediction of each session is warm-up and unscored.
// Recordings must already be normalized.
E2ESummary e2e_run(const Device& device, std::span<const Recording> recordings, const E2EConfig& cfg);

}  // namespace bfd
