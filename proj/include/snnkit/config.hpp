// Pipeline configuration: a small [section] key = value file format plus the
// typed, range-checked PipelineConfig. Unknown sections or keys are rejected
// so typos cannot silently fall back to defaults. Flag overrides win over
// file values.
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "snnkit/common.hpp"
#include "snnkit/quant.hpp"
#include "snnkit/snn.hpp"

namespace snnkit {

using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

inline RawConfig parse_config_text(const std::string& text) {
  RawConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      expect(line.back() == ']', ErrorKind::Config,
             "line " + std::to_string(line_no) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      expect(!section.empty(), ErrorKind::Config,
             "line " + std::to_string(line_no) + ": empty section name");
      cfg[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    expect(eq != std::string::npos, ErrorKind::Config,
           "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    expect(!key.empty(), ErrorKind::Config, "line " + std::to_string(line_no) + ": empty key");
    expect(!section.empty(), ErrorKind::Config,
           "line " + std::to_string(line_no) + ": key " + key + " outside any [section]");
    cfg[section][key] = value;
  }
  return cfg;
}

inline RawConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), ErrorKind::Io, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// "section.key=value" strings, e.g. from repeated --set flags
inline void apply_overrides(RawConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const std::size_t dot = o.find('.');
    const std::size_t eq = o.find('=');
    expect(dot != std::string::npos && eq != std::string::npos && dot < eq, ErrorKind::Config,
           "override must look like section.key=value, got " + o);
    cfg[detail::trim(o.substr(0, dot))][detail::trim(o.substr(dot + 1, eq - dot - 1))] =
        detail::trim(o.substr(eq + 1));
  }
}

enum class DatasetKind { Patterns, Blobs, Detection };
enum class ArchKind { Mlp, Conv, ConvPool, Detector };

struct PipelineStages {
  bool train = false;
  bool replace = false;
  bool fuse = false;
  bool finetune = false;
  bool normalize = false;
  bool convert = false;
  bool simulate = false;
  bool sweep = false;
  bool report = false;

  bool any() const {
    return train || replace || fuse || finetune || normalize || convert || simulate || sweep ||
           report;
  }
};

struct PipelineConfig {
  // [paths]
  std::string out_dir = "out";
  std::string network_file;  // starting network when the train stage is off
  // [stages]
  PipelineStages stages;
  // [network]
  ArchKind arch = ArchKind::Mlp;
  std::size_t hidden = 48;
  std::size_t channels = 4;
  bool batchnorm = false;
  // [dataset]
  DatasetKind dataset = DatasetKind::Patterns;
  std::size_t train_per_class = 40;
  std::size_t eval_per_class = 12;
  std::size_t train_count = 512;
  std::size_t eval_count = 128;
  float noise = 0.08f;
  // [train]
  int train_epochs = 15;
  double train_lr = 0.1;
  double train_momentum = 0.9;
  int train_batch = 16;
  // [quant]
  QuantConfig quant;
  // [normalize]
  double percentile = 99.9;
  // [sim]
  unsigned T = 64;
  double v0 = 0.5;
  double v_th = 1.0;
  std::string readout = "auto";  // auto | spike-count | membrane-accumulate
  InputEncoding encoder = InputEncoding::ConstantCurrent;
  bool allow_max_pool = false;   // keep MaxPool2D as a gated spiking unit
  // [sweep]
  std::vector<unsigned> t_list = {16, 32, 64, 128, 256};
  // [run]
  std::uint64_t seed = 1234;
  int threads = 1;
};

namespace detail {

struct ConfigReader {
  const RawConfig& raw;
  std::map<std::string, std::set<std::string>> known;

  bool has(const std::string& sec, const std::string& key) {
    known[sec].insert(key);
    const auto s = raw.find(sec);
    return s != raw.end() && s->second.count(key) > 0;
  }

  std::string str(const std::string& sec, const std::string& key, const std::string& fallback) {
    if (!has(sec, key)) return fallback;
    return raw.at(sec).at(key);
  }

  bool boolean(const std::string& sec, const std::string& key, bool fallback) {
    if (!has(sec, key)) return fallback;
    const std::string v = raw.at(sec).at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorKind::Config, sec + "." + key + ": expected a boolean, got " + v);
  }

  double number(const std::string& sec, const std::string& key, double fallback) {
    if (!has(sec, key)) return fallback;
    const std::string v = raw.at(sec).at(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      expect(used == v.size(), ErrorKind::Config, sec + "." + key + ": bad number " + v);
      return d;
    } catch (const std::exception&) {
      fail(ErrorKind::Config, sec + "." + key + ": bad number " + v);
    }
  }

  std::int64_t integer(const std::string& sec, const std::string& key, std::int64_t fallback) {
    const double d = number(sec, key, static_cast<double>(fallback));
    const std::int64_t i = static_cast<std::int64_t>(d);
    expect(static_cast<double>(i) == d, ErrorKind::Config,
           sec + "." + key + ": expected an integer");
    return i;
  }

  std::vector<unsigned> unsigned_list(const std::string& sec, const std::string& key,
                                      std::vector<unsigned> fallback) {
    if (!has(sec, key)) return fallback;
    std::vector<unsigned> out;
    std::istringstream ss(raw.at(sec).at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      expect(!item.empty(), ErrorKind::Config, sec + "." + key + ": empty list entry");
      try {
        const long v = std::stol(item);
        expect(v >= 1, ErrorKind::Config, sec + "." + key + ": entries must be >= 1");
        out.push_back(static_cast<unsigned>(v));
      } catch (const std::exception&) {
        fail(ErrorKind::Config, sec + "." + key + ": bad list entry " + item);
      }
    }
    expect(!out.empty(), ErrorKind::Config, sec + "." + key + ": empty list");
    return out;
  }

  void reject_unknown() const {
    for (const auto& [sec, keys] : raw) {
      const auto k = known.find(sec);
      expect(k != known.end(), ErrorKind::Config, "unknown config section [" + sec + "]");
      for (const auto& [key, value] : keys)
        expect(k->second.count(key) > 0, ErrorKind::Config,
               "unknown config key " + sec + "." + key);
    }
  }
};

}  // namespace detail

inline PipelineConfig make_pipeline_config(const RawConfig& raw) {
  detail::ConfigReader r{raw, {}};
  PipelineConfig c;

  c.out_dir = r.str("paths", "out", c.out_dir);
  c.network_file = r.str("paths", "network", c.network_file);

  c.stages.train = r.boolean("stages", "train", c.stages.train);
  c.stages.replace = r.boolean("stages", "replace", c.stages.replace);
  c.stages.fuse = r.boolean("stages", "fuse", c.stages.fuse);
  c.stages.finetune = r.boolean("stages", "finetune", c.stages.finetune);
  c.stages.normalize = r.boolean("stages", "normalize", c.stages.normalize);
  c.stages.convert = r.boolean("stages", "convert", c.stages.convert);
  c.stages.simulate = r.boolean("stages", "simulate", c.stages.simulate);
  c.stages.sweep = r.boolean("stages", "sweep", c.stages.sweep);
  c.stages.report = r.boolean("stages", "report", c.stages.report);

  const std::string arch = r.str("network", "arch", "mlp");
  if (arch == "mlp") c.arch = ArchKind::Mlp;
  else if (arch == "conv") c.arch = ArchKind::Conv;
  else if (arch == "conv-pool") c.arch = ArchKind::ConvPool;
  else if (arch == "detector") c.arch = ArchKind::Detector;
  else fail(ErrorKind::Config, "network.arch: unknown architecture " + arch);
  c.hidden = static_cast<std::size_t>(r.integer("network", "hidden", static_cast<std::int64_t>(c.hidden)));
  c.channels = static_cast<std::size_t>(r.integer("network", "channels", static_cast<std::int64_t>(c.channels)));
  c.batchnorm = r.boolean("network", "batchnorm", c.batchnorm);
  expect(c.hidden >= 1 && c.channels >= 1, ErrorKind::Config, "network sizes must be >= 1");

  const std::string ds = r.str("dataset", "kind", "patterns");
  if (ds == "patterns") c.dataset = DatasetKind::Patterns;
  else if (ds == "blobs") c.dataset = DatasetKind::Blobs;
  else if (ds == "detection") c.dataset = DatasetKind::Detection;
  else fail(ErrorKind::Config, "dataset.kind: unknown dataset " + ds);
  c.train_per_class = static_cast<std::size_t>(r.integer("dataset", "train_per_class", static_cast<std::int64_t>(c.train_per_class)));
  c.eval_per_class = static_cast<std::size_t>(r.integer("dataset", "eval_per_class", static_cast<std::int64_t>(c.eval_per_class)));
  c.train_count = static_cast<std::size_t>(r.integer("dataset", "count", static_cast<std::int64_t>(c.train_count)));
  c.eval_count = static_cast<std::size_t>(r.integer("dataset", "eval_count", static_cast<std::int64_t>(c.eval_count)));
  c.noise = static_cast<float>(r.number("dataset", "noise", c.noise));
  expect(c.noise >= 0.0f, ErrorKind::Config, "dataset.noise must be >= 0");

  c.train_epochs = static_cast<int>(r.integer("train", "epochs", c.train_epochs));
  c.train_lr = r.number("train", "lr", c.train_lr);
  c.train_momentum = r.number("train", "momentum", c.train_momentum);
  c.train_batch = static_cast<int>(r.integer("train", "batch", c.train_batch));
  expect(c.train_epochs >= 0 && c.train_lr > 0 && c.train_momentum >= 0 && c.train_momentum < 1 &&
             c.train_batch >= 1,
         ErrorKind::Config, "bad [train] hyperparameters");

  c.quant.levels = static_cast<int>(r.integer("quant", "levels", c.quant.levels));
  c.quant.offset = static_cast<float>(r.number("quant", "offset", c.quant.offset));
  c.quant.clip = static_cast<float>(r.number("quant", "clip", c.quant.clip));
  c.quant.epochs = static_cast<int>(r.integer("quant", "epochs", c.quant.epochs));
  c.quant.learning_rate = r.number("quant", "lr", c.quant.learning_rate);
  c.quant.momentum = r.number("quant", "momentum", c.quant.momentum);
  c.quant.batch_size = static_cast<int>(r.integer("quant", "batch", c.quant.batch_size));
  expect(c.quant.levels >= 1, ErrorKind::Config, "quant.levels must be >= 1");
  expect(c.quant.offset >= 0.0f && c.quant.offset < 1.0f, ErrorKind::Config,
         "quant.offset must be in [0,1)");
  expect(c.quant.clip > 0.0f, ErrorKind::Config, "quant.clip must be positive");
  expect(c.quant.epochs >= 0 && c.quant.learning_rate > 0 && c.quant.momentum >= 0 &&
             c.quant.momentum < 1 && c.quant.batch_size >= 1,
         ErrorKind::Config, "bad [quant] hyperparameters");

  c.percentile = r.number("normalize", "percentile", c.percentile);
  expect(c.percentile > 0.0 && c.percentile <= 100.0, ErrorKind::Config,
         "normalize.percentile must be in (0, 100]");

  c.T = static_cast<unsigned>(r.integer("sim", "T", static_cast<std::int64_t>(c.T)));
  expect(c.T >= 1, ErrorKind::Config, "sim.T must be >= 1");
  c.v0 = r.number("sim", "v0", c.v0);
  expect(c.v0 == 0.0 || c.v0 == 0.5, ErrorKind::Config, "sim.v0 must be 0 or 0.5");
  c.v_th = r.number("sim", "v_th", c.v_th);
  expect(c.v_th > 0.0, ErrorKind::Config, "sim.v_th must be positive");
  c.readout = r.str("sim", "readout", c.readout);
  expect(c.readout == "auto" || readout_from_name(c.readout).has_value(), ErrorKind::Config,
         "sim.readout must be auto, spike-count or membrane-accumulate");
  const std::string enc = r.str("sim", "encoder", "constant-current");
  if (enc == "constant-current") c.encoder = InputEncoding::ConstantCurrent;
  else if (enc == "bernoulli") c.encoder = InputEncoding::Bernoulli;
  else fail(ErrorKind::Config, "sim.encoder must be constant-current or bernoulli");
  c.allow_max_pool = r.boolean("sim", "allow_max_pool", c.allow_max_pool);

  c.t_list = r.unsigned_list("sweep", "t_list", c.t_list);
  for (std::size_t i = 1; i < c.t_list.size(); ++i)
    expect(c.t_list[i] > c.t_list[i - 1], ErrorKind::Config, "sweep.t_list must be ascending");

  c.seed = static_cast<std::uint64_t>(r.integer("run", "seed", static_cast<std::int64_t>(c.seed)));
  c.threads = static_cast<int>(r.integer("run", "threads", c.threads));
  expect(c.threads >= 0, ErrorKind::Config, "run.threads must be >= 0");
  if (c.threads == 0)
    c.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  c.quant.seed = c.seed;
  c.quant.threads = c.threads;

  r.reject_unknown();
  return c;
}

}  // namespace snnkit
