#include "bfd/runtime.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <thread>

#include "bfd/error.hpp"
#include "bfd/serialize.hpp"
#include "bfd/training.hpp"

namespace bfd {

std::string render_card(const msg::Result& result) {
  char prob[32];
  std::snprintf(prob, sizeof(prob), "%.6f", result.prob);
  return "Fault: " + result.label + "\nProb : " + prob + "\nTime : " + std::to_string(result.ticks) + " ticks\n";
}

std::string render_card(const DiagnosisRecord& record) {
  return render_card(msg::Result{record.class_id, record.label, record.prob, record.ticks});
}

std::string class_label(int class_id, int num_classes) {
  if (num_classes == kNumClasses && class_id >= 0 && class_id < kNumClasses) {
    return std::string(fault_label(class_id).name);
  }
  return "class-" + std::to_string(class_id);
}

Device::Device(Architecture arch, ModelParams params, double tick_unit_ms)
    : arch_(std::move(arch)), params_(std::move(params)), tick_unit_ms_(tick_unit_ms) {
  if (!(tick_unit_ms > 0.0)) raise(ErrorCode::kInvalidArgument, "tick unit must be positive");
  validate(arch_);
  check_params(arch_, params_);
}

Device Device::from_file(const std::filesystem::path& path, double tick_unit_ms) {
  auto loaded = load_model(path);
  return Device(std::move(loaded.arch), std::move(loaded.params), tick_unit_ms);
}

msg::Result Device::classify(const Frame& frame) const {
  if (frame.rows != arch_.input.rows || frame.cols != arch_.input.cols || arch_.input.channels != 1) {
    raise(ErrorCode::kShapeMismatch, "frame does not match model input " + to_string(arch_.input));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto probs = forward(arch_, params_, frame_to_tensor(frame));
  const int cls = argmax_class(probs);
  const auto t1 = std::chrono::steady_clock::now();
  const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  msg::Result r;
  r.class_id = cls;
  r.label = class_label(cls, arch_.num_classes());
  r.prob = static_cast<double>(probs[static_cast<std::size_t>(cls)]);
  r.ticks = std::max<std::int64_t>(1, std::llround(ms / tick_unit_ms_));
  return r;
}

std::size_t Device::serve_session(LineChannel& channel,
                                  const std::function<void(const DiagnosisRecord&)>& on_diagnosis) const {
  SessionLimits limits{arch_.input.rows, arch_.input.cols};
  DeviceSession session([this](const Frame& f) { return classify(f); }, limits);
  std::size_t diagnoses = 0;
  try {
    while (auto line = channel.read_line()) {
      const std::string reply = session.step_line(*line);
      channel.write_line(reply);
      if (reply.size() > 2 && reply[0] == 'R' && reply[1] == ' ') {
        ++diagnoses;
        if (on_diagnosis) {
          const auto r = std::get<msg::Result>(decode(reply));
          on_diagnosis(DiagnosisRecord{r.class_id, r.label, r.prob, r.ticks, std::chrono::system_clock::now()});
        }
      }
      if (session.state().phase == Phase::kClosed) break;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kIo) throw;
  }
  channel.close();
  return diagnoses;
}

void device_serve(const DeviceConfig& cfg, std::ostream& out, const std::function<void(std::uint16_t)>& on_listening) {
  const Device device = Device::from_file(cfg.model_path, cfg.tick_unit_ms);
  TcpListener listener(cfg.listen);
  out << "listening on " << cfg.listen.host << ":" << listener.port() << "\n" << std::flush;
  if (on_listening) on_listening(listener.port());
  for (std::size_t n = 0; !cfg.max_sessions || n < *cfg.max_sessions; ++n) {
    auto channel = listener.accept();
    device.serve_session(*channel, [&](const DiagnosisRecord& rec) { out << render_card(rec) << std::flush; });
  }
}

std::string StreamSummary::render() const {
  std::ostringstream os;
  os << "samples sent : " << samples_sent << "\n";
  os << "predictions  : " << predictions << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", mean_ticks);
  os << "mean ticks   : " << buf << "\n";
  os << "histogram    :\n";
  for (const auto& [cls, count] : histogram) {
    std::snprintf(buf, sizeof(buf), "  %3d %-14s %zu\n", cls, class_label(cls, kNumClasses).c_str(), count);
    os << buf;
  }
  return os.str();
}

namespace {

Message exchange(LineChannel& channel, const Message& m) {
  channel.write_line(encode(m));
  auto line = channel.read_line();
  if (!line) raise(ErrorCode::kPeerError, "device closed the connection after " + std::string(message_name(m)));
  return decode(*line);
}

[[noreturn]] void peer_error(const msg::Err& e) { raise(ErrorCode::kPeerError, "device replied ERR " + e.code + ": " + e.text); }

}  // namespace

StreamSummary host_stream(LineChannel& channel, std::span<const double> samples, const HostOptions& opts,
                          const std::function<void(const DiagnosisRecord&)>& on_diagnosis) {
  if (opts.k < 1) raise(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (opts.rate < 0.0) raise(ErrorCode::kInvalidArgument, "rate must be >= 0");

  Message reply;
  try {
    reply = exchange(channel, msg::Hello{kFrameRows, kFrameCols, opts.k});
  } catch (const Error& e) {
    raise(ErrorCode::kHandshakeFailed, e.what());
  }
  if (const auto* err = std::get_if<msg::Err>(&reply)) {
    raise(ErrorCode::kHandshakeFailed, "device replied ERR " + err->code + ": " + err->text);
  }
  if (!std::holds_alternative<msg::Ok>(reply)) {
    raise(ErrorCode::kHandshakeFailed, "expected OK, got " + std::string(message_name(reply)));
  }

  StreamSummary summary;
  double tick_sum = 0.0;
  const auto period = opts.rate > 0.0 ? std::chrono::duration<double>(1.0 / opts.rate) : std::chrono::duration<double>(0);
  auto next = std::chrono::steady_clock::now();
  for (const double s : samples) {
    if (opts.rate > 0.0) {
      std::this_thread::sleep_until(next);
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    }
    reply = exchange(channel, msg::Data{static_cast<float>(s)});
    ++summary.samples_sent;
    if (const auto* r = std::get_if<msg::Result>(&reply)) {
      DiagnosisRecord rec{r->class_id, r->label, r->prob, r->ticks, std::chrono::system_clock::now()};
      ++summary.predictions;
      ++summary.histogram[r->class_id];
      tick_sum += static_cast<double>(r->ticks);
      if (on_diagnosis) on_diagnosis(rec);
      summary.records.push_back(std::move(rec));
    } else if (const auto* err = std::get_if<msg::Err>(&reply)) {
      peer_error(*err);
    } else if (!std::holds_alternative<msg::Ack>(reply)) {
      raise(ErrorCode::kPeerError, "unexpected " + std::string(message_name(reply)) + " reply to D");
    }
  }
  reply = exchange(channel, msg::End{});
  if (const auto* err = std::get_if<msg::Err>(&reply)) peer_error(*err);
  if (!std::holds_alternative<msg::Bye>(reply)) {
    raise(ErrorCode::kPeerError, "expected BYE, got " + std::string(message_name(reply)));
  }
  channel.close();
  summary.mean_ticks = summary.predictions ? tick_sum / static_cast<double>(summary.predictions) : 0.0;
  return summary;
}

StreamSummary host_stream(const Endpoint& ep, std::span<const double> samples, const HostOptions& opts,
                          const std::function<void(const DiagnosisRecord&)>& on_diagnosis) {
  std::unique_ptr<LineChannel> channel;
  try {
    channel = tcp_connect(ep);
  } catch (const Error& e) {
    raise(ErrorCode::kHandshakeFailed, e.what());
  }
  return host_stream(*channel, samples, opts, on_diagnosis);
}

std::size_t expected_predictions(std::size_t n, int k, std::size_t capacity) {
  if (k < 1) raise(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (n < capacity) return 0;
  return (n - capacity) / static_cast<std::size_t>(k) + 1;
}

std::vector<Recording> held_out_synthetic(const SyntheticSpec& spec) {
  std::vector<Recording> out;
  for (int c = 0; c < kNumClasses; ++c) {
    out.push_back(normalized_copy(
        generate_synthetic(c, spec.recording_length, synthetic_recording_seed(spec.seed, c, true))));
  }
  return out;
}

std::string E2ESummary::render() const {
  std::ostringstream os;
  char buf[128];
  for (const auto& c : per_class) {
    std::snprintf(buf, sizeof(buf), "%3d %-14s predictions %4zu scored %4zu correct %4zu accuracy %.4f\n", c.class_id,
                  class_label(c.class_id, kNumClasses).c_str(), c.predictions, c.scored, c.correct, c.accuracy);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "streaming accuracy %.4f (%zu/%zu scored, %zu predictions, mean ticks %.2f)\n",
                accuracy, correct, scored, predictions, mean_ticks);
  os << buf;
  return os.str();
}

E2ESummary e2e_run(const Device& device, std::span<const Recording> recordings, const E2EConfig& cfg) {
  E2ESummary summary;
  double tick_sum = 0.0;
  for (const auto& rec : recordings) {
    const std::size_t n = std::min(cfg.samples_per_class, rec.samples.size());
    auto [host_end, device_end] = make_pipe();
    std::thread device_thread([&device, ch = std::move(device_end)] { device.serve_session(*ch); });
    StreamSummary s;
    try {
      s = host_stream(*host_end, std::span(rec.samples).first(n), HostOptions{cfg.k, 0.0});
    } catch (...) {
      host_end->close();
      device_thread.join();
      throw;
    }
    device_thread.join();

    E2EClassResult cls;
    cls.class_id = rec.label.id;
    cls.predictions = s.predictions;
    for (std::size_t i = 1; i < s.records.size(); ++i) {
      ++cls.scored;
      cls.correct += s.records[i].class_id == rec.label.id;
    }
    cls.accuracy = cls.scored ? static_cast<double>(cls.correct) / static_cast<double>(cls.scored) : 0.0;
    for (const auto& r : s.records) tick_sum += static_cast<double>(r.ticks);
    summary.predictions += cls.predictions;
    summary.scored += cls.scored;
    summary.correct += cls.correct;
    summary.per_class.push_back(cls);
  }
  summary.accuracy = summary.scored ? static_cast<double>(summary.correct) / static_cast<double>(summary.scored) : 0.0;
  summary.mean_ticks = summary.predictions ? tick_sum / static_cast<double>(summary.predictions) : 0.0;
  return summary;
}

}  // namespace bfd
