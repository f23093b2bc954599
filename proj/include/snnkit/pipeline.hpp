// Full training-and-converting pipeline. Stages run in the converting-flow
// order and each one leaves its artifact behind, named by stage, so sweeps
// and reports can reuse earlier outputs. Timestamps go to the run log only;
// every other artifact is byte-reproducible from config and seed.
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "snnkit/presets.hpp"
#include "snnkit/serialize.hpp"
#include "snnkit/svg.hpp"
#include "snnkit/transform.hpp"
#include "snnkit/verify.hpp"

namespace snnkit {

struct PipelineResult {
  bool ok = true;
  std::string failed_stage;
  std::string error;
  std::vector<std::string> artifacts;
};

namespace detail {

// Index of the first trainable layer after the last pooling layer, or 0 when
// the network has none. Everything before it is treated as a frozen feature
// extractor by the training stages, since pooling cannot be trained through.
inline std::size_t frozen_prefix_end(const NetworkGraph& net) {
  std::size_t split = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::MaxPool2D) split = i + 1;
  if (split == 0) return 0;
  while (split < net.layers.size() && !net.layers[split].has_weights()) ++split;
  return split;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  expect(out.good(), ErrorKind::Io, "cannot open " + path + " for writing");
  out << text;
  expect(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline std::string final_metric(const std::vector<EpochMetrics>& metrics, LossKind loss) {
  if (metrics.empty()) return "no epochs run";
  if (loss == LossKind::SoftmaxCrossEntropy)
    return num_str(metrics.back().accuracy) + " final train accuracy";
  return num_str(metrics.back().loss) + " final train loss";
}

class RunLog {
 public:
  explicit RunLog(const std::string& path) : out_(path, std::ios::binary | std::ios::app) {}

  void line(const std::string& msg) {
    if (!out_.good()) return;
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%d %H:%M:%S", std::gmtime(&t));
    out_ << stamp << " " << msg << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace detail

// SNN artifact: the prepared network plus its conversion settings, so the
// simulator can be reconstructed bit-exactly from the file.
inline void save_snn(const NetworkGraph& prepared, const ConvertOptions& opts,
                     const std::string& path) {
  Json j = network_to_json(prepared);
  Json meta;
  meta["v0"] = opts.v0;
  meta["v_th"] = opts.v_th;
  meta["readout"] = std::string(readout_name(opts.readout));
  meta["allow_max_pool"] = opts.allow_max_pool;
  j["snn"] = meta;
  detail::write_text_file(path, j.dump(2) + "\n");
}

struct LoadedSnn {
  NetworkGraph source;
  ConvertOptions options;
  SNNNetwork snn;
};

inline LoadedSnn load_snn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), ErrorKind::Io, "cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, path + ": " + e.what());
  }
  expect(j.contains("snn"), ErrorKind::Format, path + " is not a converted-network file");
  LoadedSnn loaded;
  loaded.options.v0 = j["snn"].at("v0").get<double>();
  loaded.options.v_th = j["snn"].at("v_th").get<double>();
  const auto readout = readout_from_name(j["snn"].at("readout").get<std::string>());
  expect(readout.has_value(), ErrorKind::Format, "unknown readout in " + path);
  loaded.options.readout = *readout;
  loaded.options.allow_max_pool = j["snn"].value("allow_max_pool", false);
  Json net_json = j;
  net_json.erase("snn");
  loaded.source = network_from_json(net_json);
  loaded.snn = convert(loaded.source, loaded.options);
  return loaded;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& console) {
  namespace fs = std::filesystem;
  PipelineResult result;
  if (!cfg.stages.any()) return result;  // nothing enabled, nothing written

  fs::create_directories(cfg.out_dir);
  detail::RunLog log(cfg.out_dir + "/run.log");
  auto artifact = [&](const std::string& name) {
    const std::string path = cfg.out_dir + "/" + name;
    result.artifacts.push_back(path);
    return path;
  };

  std::optional<NetworkGraph> net;
  std::optional<NetworkGraph> prepared;  // normalized network, ready to convert
  std::optional<SNNNetwork> snn;
  ConvertOptions convert_opts;
  std::vector<SweepRow> sweep_rows;
  std::string sweep_metric_name = "metric";
  std::optional<ErrorReport> report;

  const PipelineData data = build_pipeline_data(cfg);

  // The newest network artifact on disk, so a later-stage run can resume
  // from an earlier one without recomputing it.
  auto latest_network_artifact = [&]() -> std::optional<std::string> {
    static const char* names[] = {"04-normalize.network.json", "03-finetune.network.json",
                                  "02-fuse.network.json", "01-replace.network.json",
                                  "00-train.network.json"};
    for (const char* n : names) {
      const std::string p = cfg.out_dir + "/" + n;
      if (fs::exists(p)) return p;
    }
    return std::nullopt;
  };
  auto require_net = [&](const std::string& stage) -> NetworkGraph& {
    if (!net.has_value()) {
      if (!cfg.network_file.empty()) {
        net = load_network(cfg.network_file);
      } else if (auto p = latest_network_artifact()) {
        net = load_network(*p);
      } else {
        fail(ErrorKind::Config, "stage " + stage +
                                    " needs a network: enable earlier stages or set paths.network");
      }
    }
    return *net;
  };

  std::string stage;
  try {
    if (cfg.stages.train) {
      stage = "train";
      log.line("stage train: begin");
      NetworkGraph base = build_arch(cfg);
      Rng rng(cfg.seed);
      init_weights(base, rng);
      TrainConfig tc;
      tc.epochs = cfg.train_epochs;
      tc.learning_rate = cfg.train_lr;
      tc.momentum = cfg.train_momentum;
      tc.batch_size = cfg.train_batch;
      tc.loss = data.loss;
      tc.seed = cfg.seed;
      tc.threads = cfg.threads;

      // Pooling layers cannot be trained through; networks that contain them
      // keep their random convolutional prefix frozen and train only the head
      // behind the pool, on cached features. This stands in for importing a
      // pretrained network, which is where pooling architectures come from.
      const std::size_t split = detail::frozen_prefix_end(base);
      if (split > 0) {
        NetworkGraph prefix;
        prefix.input_shape = base.input_shape;
        prefix.layers.assign(base.layers.begin(), base.layers.begin() + static_cast<std::ptrdiff_t>(split));
        const NormalizeResult prefix_norm = normalize_weights(prefix, data.train.inputs, cfg.percentile);
        NetworkGraph head;
        head.input_shape = validate(prefix_norm.net).back();
        head.layers.assign(base.layers.begin() + static_cast<std::ptrdiff_t>(split), base.layers.end());
        Dataset features;
        features.num_classes = data.train.num_classes;
        features.labels = data.train.labels;
        features.targets = data.train.targets;
        for (const Tensor& x : data.train.inputs)
          features.inputs.push_back(forward_output(prefix_norm.net, x));
        const auto metrics = train_sgd(head, features, tc);
        base = prefix_norm.net;
        base.normalization.reset();
        for (const auto& layer : head.layers) base.layers.push_back(layer);
        validate(base);
        detail::write_text_file(artifact("00-train.metrics.csv"), metrics_to_csv(metrics));
        console << "train (frozen prefix): " << detail::final_metric(metrics, data.loss) << "\n";
      } else {
        const auto metrics = train_sgd(base, data.train, tc);
        detail::write_text_file(artifact("00-train.metrics.csv"), metrics_to_csv(metrics));
        console << "train: " << detail::final_metric(metrics, data.loss) << "\n";
      }
      if (cfg.batchnorm) base = insert_calibrated_batchnorm(base, data.train.inputs);
      save_network(base, artifact("00-train.network.json"));
      net = std::move(base);
      log.line("stage train: done");
    }

    if (cfg.stages.replace) {
      stage = "replace";
      log.line("stage replace: begin");
      ReplacementConfig rc;
      rc.seed = cfg.seed;
      net = replace_downsampling(require_net(stage), rc);
      save_network(*net, artifact("01-replace.network.json"));
      log.line("stage replace: done");
    }

    if (cfg.stages.fuse) {
      stage = "fuse";
      log.line("stage fuse: begin");
      net = fuse_batchnorm(require_net(stage));
      save_network(*net, artifact("02-fuse.network.json"));
      log.line("stage fuse: done");
    }

    if (cfg.stages.finetune) {
      stage = "finetune";
      log.line("stage finetune: begin");
      QuantConfig qc = cfg.quant;
      qc.loss = data.loss;
      if (qc.levels != static_cast<int>(cfg.T))
        console << "warning: quant.levels (" << qc.levels << ") differs from sim.T (" << cfg.T
                << "); training resolution will not match the simulation budget\n";
      // scale activations into [0,1] before swapping so the quantizer's clip
      // ceiling starts out non-binding; the normalize stage afterwards is
      // then a near-no-op that records the final scales
      const NormalizeResult prescale =
          normalize_weights(require_net(stage), data.train.inputs, cfg.percentile);
      NetworkGraph swapped = swap_activations(prescale.net, SwapDirection::ReluToQuant, qc);
      swapped.normalization.reset();

      // networks still carrying a pool only finetune the head behind it
      const std::size_t split = detail::frozen_prefix_end(swapped);
      FinetuneResult ft;
      if (split > 0) {
        NetworkGraph prefix;
        prefix.input_shape = swapped.input_shape;
        prefix.layers.assign(swapped.layers.begin(),
                             swapped.layers.begin() + static_cast<std::ptrdiff_t>(split));
        NetworkGraph head;
        head.input_shape = validate(prefix).back();
        head.layers.assign(swapped.layers.begin() + static_cast<std::ptrdiff_t>(split),
                           swapped.layers.end());
        Dataset features;
        features.num_classes = data.train.num_classes;
        features.labels = data.train.labels;
        features.targets = data.train.targets;
        for (const Tensor& x : data.train.inputs)
          features.inputs.push_back(forward_output(prefix, x));
        ft = finetune(head, features, qc);
        NetworkGraph merged = prefix;
        for (const auto& layer : ft.net.layers) merged.layers.push_back(layer);
        validate(merged);
        ft.net = std::move(merged);
        console << "finetune (frozen prefix): ";
      } else {
        ft = finetune(swapped, data.train, qc);
        console << "finetune: ";
      }
      detail::write_text_file(artifact("03-finetune.metrics.csv"), metrics_to_csv(ft.metrics));
      save_network(ft.net, artifact("03-finetune.network.json"));
      net = std::move(ft.net);
      console << detail::final_metric(ft.metrics, qc.loss) << "\n";
      log.line("stage finetune: done");
    }

    if (cfg.stages.normalize) {
      stage = "normalize";
      log.line("stage normalize: begin");
      NormalizeResult nr = normalize_weights(require_net(stage), data.train.inputs, cfg.percentile);
      net = std::move(nr.net);
      save_network(*net, artifact("04-normalize.network.json"));
      log.line("stage normalize: done");
    }

    if (cfg.stages.convert) {
      stage = "convert";
      log.line("stage convert: begin");
      NetworkGraph& src = require_net(stage);
      convert_opts.v0 = cfg.v0 * cfg.v_th;
      convert_opts.v_th = cfg.v_th;
      convert_opts.readout = resolve_readout(cfg, src);
      convert_opts.allow_max_pool = cfg.allow_max_pool;
      SNNNetwork converted = convert(src, convert_opts);
      for (const auto& w : converted.warnings) console << "warning: " << w << "\n";
      save_snn(src, convert_opts, artifact("05-convert.snn.json"));
      prepared = src;
      snn = std::move(converted);
      log.line("stage convert: done");
    }

    auto require_snn = [&](const std::string& st) -> SNNNetwork& {
      if (!snn.has_value()) {
        const std::string p = cfg.out_dir + "/05-convert.snn.json";
        expect(fs::exists(p), ErrorKind::Config,
               "stage " + st + " needs a converted network; enable the convert stage first");
        LoadedSnn loaded = load_snn(p);
        prepared = std::move(loaded.source);
        convert_opts = loaded.options;
        snn = std::move(loaded.snn);
      }
      return *snn;
    };

    if (cfg.stages.simulate) {
      stage = "simulate";
      log.line("stage simulate: begin");
      SNNNetwork& network = require_snn(stage);
      expect(!data.eval.inputs.empty(), ErrorKind::Config, "simulate stage has no evaluation data");
      RunOptions ro;
      ro.T = cfg.T;
      ro.encoding = cfg.encoder;
      ro.seed = cfg.seed;
      const SimTrace trace = run(network, data.eval.inputs.front(), ro);
      detail::write_text_file(artifact("06-simulate.trace.csv"), trace_to_csv(trace));
      write_trace(trace, artifact("06-simulate.trace.bin"));
      detail::write_text_file(artifact("06-simulate.profile.csv"),
                              profile_to_csv(firing_rate_profile(trace)));
      report = compare_ann_snn(*prepared, network, data.eval.inputs, cfg.T);
      detail::write_text_file(artifact("06-simulate.error_report.csv"),
                              error_report_to_csv(*report));
      detail::write_text_file(artifact("06-simulate.error_report.txt"),
                              error_report_to_text(*report));
      console << "simulate: mean output err " << report->mean_output_err << " at T=" << cfg.T
              << "\n";
      log.line("stage simulate: done");
    }

    if (cfg.stages.sweep) {
      stage = "sweep";
      log.line("stage sweep: begin");
      SNNNetwork& network = require_snn(stage);
      if (data.detection) {
        sweep_metric_name = "mean_iou";
        sweep_rows = sweep_detection(*prepared, network, data.det_eval, cfg.t_list, cfg.threads);
      } else {
        sweep_metric_name = "accuracy";
        sweep_rows = sweep_classification(*prepared, network, data.eval, cfg.t_list, cfg.threads);
      }
      detail::write_text_file(artifact("07-sweep.csv"), sweep_to_csv(sweep_rows, sweep_metric_name));
      for (const auto& row : sweep_rows)
        console << "sweep: T=" << row.T << " " << sweep_metric_name << "=" << row.task_metric
                << " mean_err=" << row.mean_output_err << "\n";
      log.line("stage sweep: done");
    }

    if (cfg.stages.report) {
      stage = "report";
      log.line("stage report: begin");
      std::string text = "pipeline report\n";
      if (net.has_value()) {
        text += "network: " + std::to_string(net->layers.size()) + " layers, input " +
                shape_str(net->input_shape) + "\n";
        if (net->normalization.has_value()) {
          text += "normalization: percentile " + num_str(net->normalization->percentile) +
                  ", scales";
          for (double l : net->normalization->lambdas) text += " " + num_str(l);
          text += "\n";
        }
      }
      if (report.has_value()) text += error_report_to_text(*report);
      if (!sweep_rows.empty()) {
        text += "sweep (" + sweep_metric_name + " by T):\n";
        for (const auto& row : sweep_rows)
          text += "  T=" + std::to_string(row.T) + ": " + num_str(row.task_metric) +
                  " (mean output err " + num_str(row.mean_output_err) + ")\n";
      }
      detail::write_text_file(artifact("08-report.txt"), text);

      // firing-rate transfer curves: analog drive vs output rate / activation
      LinePlot rate_plot;
      rate_plot.title = "IF rate vs constant drive (T=" + std::to_string(cfg.T) + ")";
      rate_plot.x_label = "drive z";
      rate_plot.y_label = "rate / activation";
      PlotSeries relu{"ReLU", "#555555", {}, false};
      PlotSeries v0_zero{"IF, V0=0", "#d62728", {}, true};
      PlotSeries v0_half{"IF, V0=0.5", "#2ca02c", {}, true};
      for (int i = 0; i <= 240; ++i) {
        const double z = -0.1 + 1.3 * i / 240.0;
        relu.points.push_back({z, std::min(1.0, std::max(0.0, z))});
        v0_zero.points.push_back({z, closed_form_rate(z, cfg.T, 0.0)});
        v0_half.points.push_back({z, closed_form_rate(z, cfg.T, 0.5)});
      }
      rate_plot.series = {relu, v0_zero, v0_half};
      detail::write_text_file(artifact("08-report.rate_curve.svg"), render_line_plot(rate_plot));

      if (!sweep_rows.empty()) {
        LinePlot sweep_plot;
        sweep_plot.title = sweep_metric_name + " vs time steps";
        sweep_plot.x_label = "T (log2)";
        sweep_plot.y_label = sweep_metric_name;
        sweep_plot.log2_x = true;
        PlotSeries metric{"SNN " + sweep_metric_name, "#1f77b4", {}, false};
        PlotSeries err{"mean output err", "#ff7f0e", {}, false};
        for (const auto& row : sweep_rows) {
          metric.points.push_back({static_cast<double>(row.T), row.task_metric});
          err.points.push_back({static_cast<double>(row.T), row.mean_output_err});
        }
        sweep_plot.series = {metric, err};
        detail::write_text_file(artifact("08-report.sweep.svg"), render_line_plot(sweep_plot));
      }
      log.line("stage report: done");
    }
  } catch (const Error& e) {
    result.ok = false;
    result.failed_stage = stage;
    result.error = e.what();
    log.line("stage " + stage + ": failed: " + e.what());
    return result;
  }
  return result;
}

}  // namespace snnkit
