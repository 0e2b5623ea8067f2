#include "bfd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace bfd {

void validate(const TrainConfig& cfg) {
  auto bad = [](const std::string& m) { raise(ErrorCode::kInvalidArgument, m); };
  if (cfg.epochs < 1) bad("epochs must be >= 1");
  if (cfg.batch_size < 1) bad("batch_size must be >= 1");
  if (!(cfg.base_lr > 0)) bad("base_lr must be > 0");
  if (cfg.momentum < 0 || cfg.momentum >= 1) bad("momentum must be in [0, 1)");
  const auto& f = cfg.fractions;
  if (f.train <= 0 || f.val <= 0 || f.test <= 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    bad("split fractions must be positive and sum to 1");
  }
  if (cfg.frames_per_recording < 1) bad("frames_per_recording must be >= 1");
  if (cfg.schedule) {
    const auto& s = *cfg.schedule;
    if (!(s.factor > 0 && s.factor < 1)) bad("ReduceLR factor must be in (0, 1)");
    if (s.patience < 1) bad("ReduceLR patience must be >= 1");
    if (!(s.min_lr < cfg.base_lr)) bad("ReduceLR min_lr must be below base_lr");
    if (s.min_lr < 0) bad("ReduceLR min_lr must be non-negative");
  }
  if (cfg.activation_override && *cfg.activation_override == Activation::kNone) {
    bad("activation override must be tanh or relu");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    raise(ErrorCode::kParseError, "config key '" + key + "': not a number: '" + v + "'");
  }
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    raise(ErrorCode::kParseError, "config key '" + key + "': not an integer: '" + v + "'");
  }
  return i;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  ReduceLRConfig sched;
  bool schedule_on = cfg.schedule.has_value();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::kParseError, "config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "epochs") cfg.epochs = static_cast<int>(to_int(key, val));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_int(key, val));
    else if (key == "base_lr") cfg.base_lr = to_double(key, val);
    else if (key == "momentum") cfg.momentum = to_double(key, val);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, val));
    else if (key == "train_frac") cfg.fractions.train = to_double(key, val);
    else if (key == "val_frac") cfg.fractions.val = to_double(key, val);
    else if (key == "test_frac") cfg.fractions.test = to_double(key, val);
    else if (key == "frames_per_recording") cfg.frames_per_recording = static_cast<std::size_t>(to_int(key, val));
    else if (key == "factor") sched.factor = to_double(key, val);
    else if (key == "patience") sched.patience = static_cast<int>(to_int(key, val));
    else if (key == "min_lr") sched.min_lr = to_double(key, val);
    else if (key == "optimizer") {
      if (val == "adam") cfg.optimizer = OptimizerKind::kAdam;
      else if (val == "sgd-momentum") cfg.optimizer = OptimizerKind::kSgdMomentum;
      else raise(ErrorCode::kParseError, "optimizer must be adam or sgd-momentum");
    } else if (key == "schedule") {
      if (val == "on" || val == "reduce_lr") schedule_on = true;
      else if (val == "off" || val == "none") schedule_on = false;
      else raise(ErrorCode::kParseError, "schedule must be on or off");
    } else if (key == "monitor") {
      if (val == "val_loss") sched.monitor = Monitor::kValLoss;
      else if (val == "val_accuracy") sched.monitor = Monitor::kValAccuracy;
      else raise(ErrorCode::kParseError, "monitor must be val_loss or val_accuracy");
    } else if (key == "activation") {
      cfg.activation_override = parse_activation(val);
    } else {
      raise(ErrorCode::kParseError, "unknown config key '" + key + "'");
    }
  }
  if (schedule_on) cfg.schedule = sched;
  else cfg.schedule.reset();
  validate(cfg);
  return cfg;
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

ReduceLROnPlateau::ReduceLROnPlateau(const ReduceLRConfig& cfg, double lr)
    : cfg_(cfg),
      lr_(lr),
      best_(cfg.monitor == Monitor::kValLoss ? std::numeric_limits<double>::infinity()
                                             : -std::numeric_limits<double>::infinity()) {}

bool ReduceLROnPlateau::improved(double metric) const {
  if (cfg_.monitor == Monitor::kValLoss) return metric < best_ - cfg_.threshold;
  return metric > best_ + cfg_.threshold;
}

double ReduceLROnPlateau::step(double metric) {
  if (improved(metric)) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= cfg_.patience) {
    lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
    bad_epochs_ = 0;
  }
  return lr_;
}

Tensor frame_to_tensor(const Frame& frame) {
  return Tensor(Shape{frame.rows, frame.cols, 1}, frame.values);
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const Architecture& arch)
      : kind_(cfg.optimizer), momentum_(cfg.momentum), m_(zero_params<float>(arch)), v_(zero_params<float>(arch)) {}

  // grads already averaged over the batch.
  void step(ModelParams& params, const ModelParams& grads, double lr) {
    ++t_;
    if (kind_ == OptimizerKind::kAdam) {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-7;
      const double c1 = 1.0 - std::pow(b1, t_);
      const double c2 = 1.0 - std::pow(b2, t_);
      const auto alpha = static_cast<float>(lr * std::sqrt(c2) / c1);
      for_each(params, grads, [&](float& p, float g, float& m, float& v) {
        m = static_cast<float>(b1) * m + static_cast<float>(1 - b1) * g;
        v = static_cast<float>(b2) * v + static_cast<float>(1 - b2) * g * g;
        p -= alpha * m / (std::sqrt(v) + static_cast<float>(eps));
      });
    } else {
      const auto mu = static_cast<float>(momentum_);
      const auto rate = static_cast<float>(lr);
      for_each(params, grads, [&](float& p, float g, float& m, float&) {
        m = mu * m - rate * g;
        p += m;
      });
    }
  }

 private:
  template <typename F>
  void for_each(ModelParams& params, const ModelParams& grads, F&& f) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto apply = [&](std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m,
                       std::vector<float>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) f(p[i], g[i], m[i], v[i]);
      };
      apply(params.layers[l].weights, grads.layers[l].weights, m_.layers[l].weights, v_.layers[l].weights);
      apply(params.layers[l].bias, grads.layers[l].bias, m_.layers[l].bias, v_.layers[l].bias);
    }
  }

  OptimizerKind kind_;
  double momentum_;
  ModelParams m_;
  ModelParams v_;
  long long t_ = 0;
};

void scale(ModelParams& grads, float s) {
  for (auto& l : grads.layers) {
    for (auto& g : l.weights) g *= s;
    for (auto& g : l.bias) g *= s;
  }
}

}  // namespace

Evaluation evaluate(const ModelParams& params, const Architecture& arch, std::span<const Frame> frames) {
  if (frames.empty()) raise(ErrorCode::kEmptySplit, "cannot evaluate an empty frame set");
  const int classes = arch.num_classes();
  Evaluation ev;
  ev.confusion.assign(static_cast<std::size_t>(classes), std::vector<std::size_t>(static_cast<std::size_t>(classes), 0));
  std::size_t correct = 0;
  double loss_sum = 0;
  for (const auto& f : frames) {
    if (!f.label) raise(ErrorCode::kInvalidArgument, "evaluation frames must be labeled");
    const int truth = f.label->id;
    if (truth >= classes) raise(ErrorCode::kShapeMismatch, "label outside the model's classes");
    const auto probs = forward(arch, params, frame_to_tensor(f));
    const int pred = argmax_class(probs);
    loss_sum += static_cast<double>(cross_entropy(probs, truth).loss);
    correct += pred == truth;
    ++ev.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
  }
  ev.count = frames.size();
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(frames.size());
  ev.mean_loss = loss_sum / static_cast<double>(frames.size());
  return ev;
}

Evaluation evaluate(const ModelParams& params, const Architecture& arch, const Dataset& dataset,
                    std::span<const std::size_t> indices) {
  const auto frames = dataset.subset(indices);
  return evaluate(params, arch, frames);
}

TrainResult train(const Dataset& dataset, const Architecture& base_arch, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  validate(cfg);
  if (dataset.split.train.empty()) raise(ErrorCode::kEmptySplit, "training split is empty");
  if (dataset.split.val.empty()) raise(ErrorCode::kEmptySplit, "validation split is empty");

  TrainResult result;
  result.arch = cfg.activation_override ? with_activation(base_arch, *cfg.activation_override) : base_arch;
  const Architecture& arch = result.arch;
  validate(arch);

  ModelParams params = init_params<float>(arch, cfg.seed);
  ModelParams grads = zero_params<float>(arch);
  Optimizer opt(cfg, arch);
  std::optional<ReduceLROnPlateau> sched;
  if (cfg.schedule) sched.emplace(*cfg.schedule, cfg.base_lr);

  const auto val_frames = dataset.subset(dataset.split.val);
  std::vector<std::size_t> order = dataset.split.train;
  std::mt19937_64 rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
  ForwardTrace<float> trace;
  double lr = cfg.base_lr;
  double total_seconds = 0;
  result.report.best_val_accuracy = -1;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      grads.set_zero();
      for (std::size_t i = b; i < e; ++i) {
        const Frame& f = dataset.frames[order[i]];
        const int label = f.label->id;
        const auto probs = forward(arch, params, frame_to_tensor(f), &trace);
        correct += argmax_class(probs) == label;
        const float loss = backward(arch, params, trace, label, grads);
        if (!std::isfinite(loss)) {
          raise(ErrorCode::kDivergedLoss, "non-finite training loss at epoch " + std::to_string(epoch) +
                                              " (lr " + std::to_string(lr) + ")");
        }
        loss_sum += loss;
      }
      scale(grads, 1.0f / static_cast<float>(e - b));
      opt.step(params, grads, lr);
    }

    const auto val = evaluate(params, arch, val_frames);
    if (!std::isfinite(val.mean_loss)) {
      raise(ErrorCode::kDivergedLoss, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    EpochRecord rec{epoch,
                    lr,
                    loss_sum / static_cast<double>(order.size()),
                    static_cast<double>(correct) / static_cast<double>(order.size()),
                    val.mean_loss,
                    val.accuracy};
    result.report.epochs.push_back(rec);
    if (rec.val_acc > result.report.best_val_accuracy) {
      result.report.best_val_accuracy = rec.val_acc;
      result.report.best_epoch = epoch;
      result.params = params;
    }
    if (sched) lr = sched->step(cfg.schedule->monitor == Monitor::kValLoss ? val.mean_loss : val.accuracy);
    total_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_epoch) on_epoch(rec);
  }
  result.report.wall_seconds_per_epoch = total_seconds / cfg.epochs;
  return result;
}

double oscillation(const TrainReport& report) {
  if (report.epochs.size() < 3) return 0.0;
  std::vector<double> diffs;
  for (std::size_t i = 1; i < report.epochs.size(); ++i) {
    diffs.push_back(report.epochs[i].val_acc - report.epochs[i - 1].val_acc);
  }
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
  double ss = 0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  return std::sqrt(ss / static_cast<double>(diffs.size()));
}

const AblationRun& AblationReport::run(Activation act, bool schedule) const {
  for (const auto& r : runs) {
    if (r.activation == act && r.schedule == schedule) return r;
  }
  raise(ErrorCode::kInvalidArgument, "no such ablation run");
}

AblationReport ablation_suite(const Dataset& dataset, const TrainConfig& base, std::uint64_t seed,
                              const std::function<void(const std::string&, const EpochRecord&)>& on_epoch) {
  AblationReport out;
  out.split = dataset.split;
  const Architecture arch = canonical_architecture();
  struct Variant {
    const char* name;
    Activation act;
    bool schedule;
  };
  constexpr Variant kVariants[] = {
      {"relu", Activation::kRelu, false},
      {"tanh", Activation::kTanh, false},
      {"relu+ReduceLR", Activation::kRelu, true},
      {"tanh+ReduceLR", Activation::kTanh, true},
  };
  for (const auto& v : kVariants) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    cfg.activation_override = v.act;
    if (v.schedule) {
      if (!cfg.schedule) cfg.schedule = ReduceLRConfig{};
    } else {
      cfg.schedule.reset();
    }
    EpochCallback cb;
    if (on_epoch) cb = [&](const EpochRecord& r) { on_epoch(v.name, r); };
    auto res = train(dataset, arch, cfg, cb);
    AblationRun run{v.name, v.act, v.schedule, std::move(res.report), 0.0};
    run.oscillation = oscillation(run.report);
    out.runs.push_back(std::move(run));
  }
  return out;
}

std::string render_ablation(const AblationReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-15s %10s %10s %12s %12s\n", "config", "best_acc", "best_ep", "oscillation",
                "sec/epoch");
  os << line;
  for (const auto& r : report.runs) {
    std::snprintf(line, sizeof(line), "%-15s %10.4f %10d %12.5f %12.2f\n", r.name.c_str(), r.report.best_val_accuracy,
                  r.report.best_epoch, r.oscillation, r.report.wall_seconds_per_epoch);
    os << line;
  }
  return os.str();
}

std::string metrics_csv(const TrainReport& report) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
  char line[200];
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.lr, e.train_loss, e.train_acc,
                  e.val_loss, e.val_acc);
    os << line;
  }
  return os.str();
}

void write_metrics_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot write " + path.string());
  out << metrics_csv(report);
}

}  // namespace bfd
