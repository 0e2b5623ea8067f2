// bfd: data generation, training, reporting and the device/host simulators.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "bfd/error.hpp"
#include "bfd/mat.hpp"
#include "bfd/model.hpp"
#include "bfd/runtime.hpp"
#include "bfd/serialize.hpp"
#include "bfd/signal.hpp"
#include "bfd/training.hpp"

namespace fs = std::filesystem;
using namespace bfd;

namespace {

struct DataArgs {
  std::string manifest;
  std::size_t frames_per_class = 1000;
  std::size_t length = 60000;
  std::uint64_t seed = 1;
};

void add_data_flags(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.manifest, "Manifest of CSV recordings; synthetic data when omitted");
  cmd->add_option("--frames-per-class", d.frames_per_class, "Synthetic frames per class")->capture_default_str();
  cmd->add_option("--length", d.length, "Synthetic recording length in samples")->capture_default_str();
  cmd->add_option("--data-seed", d.seed, "Synthetic dataset seed")->capture_default_str();
}

Dataset load_data(const DataArgs& d, const TrainConfig& cfg) {
  if (!d.manifest.empty()) return load_manifest_dataset(d.manifest, cfg.frames_per_recording, cfg.fractions, cfg.seed);
  SyntheticSpec spec;
  spec.frames_per_class = d.frames_per_class;
  spec.recording_length = d.length;
  spec.seed = d.seed;
  spec.fractions = cfg.fractions;
  return make_synthetic_dataset(spec);
}

TrainConfig load_config(const std::string& path) { return path.empty() ? TrainConfig{} : read_train_config(path); }

void print_confusion(const Evaluation& ev) {
  std::printf("accuracy %.4f  mean loss %.4f  frames %zu\n", ev.accuracy, ev.mean_loss, ev.count);
  std::printf("confusion (rows true, columns predicted):\n");
  for (std::size_t t = 0; t < ev.confusion.size(); ++t) {
    std::printf("  %-14s", class_label(static_cast<int>(t), static_cast<int>(ev.confusion.size())).c_str());
    for (auto n : ev.confusion[t]) std::printf(" %5zu", n);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bearing fault diagnosis: data, training, reporting and device/host simulation"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write one synthetic CSV recording per class and a manifest");
  std::string gen_out;
  std::size_t gen_length = 60000;
  std::uint64_t gen_seed = 1;
  bool gen_held_out = false;
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  gen->add_option("--length", gen_length, "Samples per recording")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Dataset seed")->capture_default_str();
  gen->add_flag("--held-out", gen_held_out, "Use the held-out recording stream");

  // ingest-mat
  auto* ingest = app.add_subcommand("ingest-mat", "Extract one channel of a MAT file into a CSV recording");
  std::string mat_in, mat_channel = "_DE_time", mat_out;
  int mat_label = 0, mat_rate = kDefaultSampleRateHz, mat_rpm = kDefaultRpm;
  ingest->add_option("--in", mat_in, "MAT file")->required();
  ingest->add_option("--channel", mat_channel, "Array name suffix")->capture_default_str();
  ingest->add_option("--label", mat_label, "Class id 0-9")->required();
  ingest->add_option("--out", mat_out, "CSV output")->required();
  ingest->add_option("--rate", mat_rate, "Sample rate in Hz")->capture_default_str();
  ingest->add_option("--rpm", mat_rpm, "Shaft speed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the canonical model");
  std::string train_cfg, train_out, train_metrics;
  DataArgs train_data;
  train_cmd->add_option("--config", train_cfg, "key=value training config");
  add_data_flags(train_cmd, train_data);
  train_cmd->add_option("--out", train_out, "Model file")->required();
  train_cmd->add_option("--metrics", train_metrics, "Per-epoch metrics CSV");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on the test split");
  std::string eval_model, eval_cfg;
  DataArgs eval_data;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--config", eval_cfg, "Config used for the split");
  add_data_flags(eval_cmd, eval_data);

  // report
  auto* report_cmd = app.add_subcommand("report", "Print parameter, MACC, flash and RAM figures");
  std::string report_model;
  report_cmd->add_option("--model", report_model, "Model file; canonical architecture when omitted");

  // export-model
  auto* export_cmd = app.add_subcommand("export-model", "Write an initialized canonical model");
  std::string export_out, export_act = "tanh";
  std::uint64_t export_seed = 1;
  export_cmd->add_option("--out", export_out, "Model file")->required();
  export_cmd->add_option("--activation", export_act, "tanh or relu")->capture_default_str();
  export_cmd->add_option("--seed", export_seed, "Initialization seed")->capture_default_str();

  // device
  auto* device_cmd = app.add_subcommand("device", "Serve diagnoses over TCP");
  DeviceConfig dev_cfg;
  std::string dev_model, dev_listen = "127.0.0.1:5555";
  std::size_t dev_sessions = 0;
  device_cmd->add_option("--model", dev_model, "Model file")->required();
  device_cmd->add_option("--listen", dev_listen, "host:port")->capture_default_str();
  device_cmd->add_option("--tick-unit", dev_cfg.tick_unit_ms, "Milliseconds per tick")->capture_default_str();
  device_cmd->add_option("--sessions", dev_sessions, "Exit after this many sessions (0 = forever)");

  // host
  auto* host_cmd = app.add_subcommand("host", "Stream a CSV recording to a device");
  std::string host_connect = "127.0.0.1:5555", host_csv;
  HostOptions host_opts;
  std::size_t host_limit = 0;
  bool host_cards = false;
  host_cmd->add_option("--connect", host_connect, "host:port")->capture_default_str();
  host_cmd->add_option("--recording", host_csv, "CSV recording")->required();
  host_cmd->add_option("--k", host_opts.k, "Predict every k samples")->capture_default_str();
  host_cmd->add_option("--rate", host_opts.rate, "Samples per second, 0 = unthrottled")->capture_default_str();
  host_cmd->add_option("--limit", host_limit, "Send at most this many samples");
  host_cmd->add_flag("--cards", host_cards, "Print a card per diagnosis");

  // e2e
  auto* e2e_cmd = app.add_subcommand("e2e", "Stream held-out recordings through an in-process device");
  std::string e2e_model, e2e_manifest;
  SyntheticSpec e2e_spec;
  E2EConfig e2e_cfg;
  e2e_cmd->add_option("--model", e2e_model, "Model file")->required();
  e2e_cmd->add_option("--data", e2e_manifest, "Manifest of held-out CSV recordings; synthetic when omitted");
  e2e_cmd->add_option("--data-seed", e2e_spec.seed, "Synthetic dataset seed")->capture_default_str();
  e2e_cmd->add_option("--length", e2e_spec.recording_length, "Synthetic recording length")->capture_default_str();
  e2e_cmd->add_option("--samples", e2e_cfg.samples_per_class, "Samples streamed per class")->capture_default_str();
  e2e_cmd->add_option("--k", e2e_cfg.k, "Predict every k samples")->capture_default_str();

  // ablation
  auto* abl_cmd = app.add_subcommand("ablation", "Train relu/tanh with and without ReduceLR");
  std::string abl_cfg;
  DataArgs abl_data;
  abl_cmd->add_option("--config", abl_cfg, "Base training config");
  add_data_flags(abl_cmd, abl_data);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) {
      fs::create_directories(gen_out);
      std::vector<ManifestEntry> entries;
      SyntheticSpec spec;
      spec.seed = gen_seed;
      spec.recording_length = gen_length;
      for (int c = 0; c < kNumClasses; ++c) {
        auto rec = generate_synthetic(c, gen_length, synthetic_recording_seed(gen_seed, c, gen_held_out));
        const fs::path file = std::string(fault_label(c).name) + ".csv";
        write_csv_recording(rec, fs::path(gen_out) / file);
        entries.push_back({file, c});
      }
      write_manifest(entries, fs::path(gen_out) / "manifest.txt");
      std::printf("wrote %d recordings and %s\n", kNumClasses, (fs::path(gen_out) / "manifest.txt").c_str());
    } else if (*ingest) {
      const auto arrays = read_mat_file(mat_in);
      RecordingMeta meta{mat_rate, mat_rpm, fault_label(mat_label)};
      const auto rec = select_channel(arrays, mat_channel, meta);
      write_csv_recording(rec, mat_out);
      std::printf("%s: %zu samples -> %s\n", rec.source_name.c_str(), rec.samples.size(), mat_out.c_str());
    } else if (*train_cmd) {
      const auto cfg = load_config(train_cfg);
      const auto data = load_data(train_data, cfg);
      const auto result = train(data, canonical_architecture(), cfg, [](const EpochRecord& e) {
        std::printf("epoch %2d  lr %.2e  train loss %.4f acc %.4f  val loss %.4f acc %.4f\n", e.epoch, e.lr,
                    e.train_loss, e.train_acc, e.val_loss, e.val_acc);
        std::fflush(stdout);
      });
      save_model(result.params, result.arch, train_out);
      if (!train_metrics.empty()) write_metrics_csv(result.report, train_metrics);
      const auto test = evaluate(result.params, result.arch, data, data.split.test);
      std::printf("best val accuracy %.4f at epoch %d; test accuracy %.4f; %.2f s/epoch\n",
                  result.report.best_val_accuracy, result.report.best_epoch, test.accuracy,
                  result.report.wall_seconds_per_epoch);
    } else if (*eval_cmd) {
      const auto model = load_model(eval_model);
      const auto cfg = load_config(eval_cfg);
      const auto data = load_data(eval_data, cfg);
      print_confusion(evaluate(model.params, model.arch, data, data.split.test));
    } else if (*report_cmd) {
      const Architecture arch = report_model.empty() ? canonical_architecture() : load_model(report_model).arch;
      std::cout << render_report(plan_memory(arch));
    } else if (*export_cmd) {
      const auto arch = with_activation(canonical_architecture(), parse_activation(export_act));
      save_model(init_params<float>(arch, export_seed), arch, export_out);
      std::printf("wrote %s (%zu parameters)\n", export_out.c_str(), parameter_count(arch));
    } else if (*device_cmd) {
      dev_cfg.model_path = dev_model;
      dev_cfg.listen = parse_endpoint(dev_listen);
      if (dev_sessions > 0) dev_cfg.max_sessions = dev_sessions;
      device_serve(dev_cfg, std::cout);
    } else if (*host_cmd) {
      auto rec = normalized_copy(read_csv_recording(host_csv));
      std::span<const double> samples(rec.samples);
      if (host_limit > 0 && host_limit < samples.size()) samples = samples.first(host_limit);
      const auto summary = host_stream(parse_endpoint(host_connect), samples, host_opts, [&](const DiagnosisRecord& r) {
        if (host_cards) std::cout << render_card(r) << std::flush;
      });
      std::cout << summary.render();
    } else if (*e2e_cmd) {
      const Device device = Device::from_file(e2e_model);
      std::vector<Recording> recs;
      if (e2e_manifest.empty()) {
        recs = held_out_synthetic(e2e_spec);
      } else {
        for (const auto& entry : read_manifest(e2e_manifest)) {
          auto rec = read_csv_recording(entry.path);
          rec.label = fault_label(entry.class_id);
          recs.push_back(normalized_copy(rec));
        }
      }
      std::cout << e2e_run(device, recs, e2e_cfg).render();
    } else if (*abl_cmd) {
      const auto cfg = load_config(abl_cfg);
      const auto data = load_data(abl_data, cfg);
      const auto report = ablation_suite(data, cfg, cfg.seed, [](const std::string& name, const EpochRecord& e) {
        std::printf("%-14s epoch %2d val acc %.4f\n", name.c_str(), e.epoch, e.val_acc);
        std::fflush(stdout);
      });
      std::cout << render_ablation(report);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
