// snnkit command-line front end.
//
// Subcommands mirror the pipeline stages (train, replace, fuse, finetune,
// convert, simulate) plus spike-stream utilities (encode, reconstruct), the
// verification checks (verify) and the full orchestrated run (pipeline,
// report). Exit codes: 0 ok, 1 usage/config, 2 stage failure, 3 verification
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snnkit/config.hpp"
#include "snnkit/pipeline.hpp"
#include "snnkit/presets.hpp"
#include "snnkit/serialize.hpp"
#include "snnkit/spike_io.hpp"
#include "snnkit/transform.hpp"
#include "snnkit/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitStageFailure = 2;
constexpr int kExitVerificationFailure = 3;

struct GlobalOpts {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

snnkit::PipelineConfig load_config(const GlobalOpts& g) {
  snnkit::RawConfig raw;
  if (!g.config_file.empty()) raw = snnkit::parse_config_file(g.config_file);
  snnkit::apply_overrides(raw, g.overrides);
  if (g.seed.has_value()) raw["run"]["seed"] = std::to_string(*g.seed);
  if (g.out_dir.has_value()) raw["paths"]["out"] = *g.out_dir;
  return snnkit::make_pipeline_config(raw);
}

int exit_code_for(const snnkit::Error& e) {
  switch (e.kind()) {
    case snnkit::ErrorKind::Config:
      return kExitUsage;
    case snnkit::ErrorKind::Verification:
      return kExitVerificationFailure;
    default:
      return kExitStageFailure;
  }
}

int run_stages(const GlobalOpts& g, const snnkit::PipelineStages& stages,
               const std::string& network_file = "") {
  snnkit::PipelineConfig cfg = load_config(g);
  cfg.stages = stages;
  if (!network_file.empty()) cfg.network_file = network_file;
  const snnkit::PipelineResult res = snnkit::run_pipeline(cfg, std::cout);
  if (!res.ok) {
    std::cerr << "stage " << res.failed_stage << " failed: " << res.error << "\n";
    return kExitStageFailure;
  }
  return kExitOk;
}

snnkit::Tensor load_input_tensor(const std::string& pgm_path, const snnkit::Shape& want) {
  snnkit::Tensor img = snnkit::read_pgm(pgm_path);
  if (want.size() == 3 && want[0] == 1)
    return img.reshaped({1, img.shape()[0], img.shape()[1]});
  if (want.size() == 1) return img.reshaped({img.size()});
  return img;
}

int cmd_verify_rate_grid() {
  using namespace snnkit;
  std::size_t points = 0;
  for (unsigned T = 1; T <= 256; T *= 2) {
    for (double v0 : {0.0, 0.5}) {
      NetworkGraph net;
      net.input_shape = {1};
      net.layers.push_back(make_linear(1, 1, Tensor({1, 1}, {1.0f}), Tensor({1}, {0.0f})));
      net.layers.push_back(make_relu());
      ConvertOptions opts;
      opts.v0 = v0;
      opts.readout = Readout::SpikeCount;
      SNNNetwork snn = convert(net, opts);
      RunOptions ro;
      ro.T = T;
      for (int i = 0; i <= 100; ++i) {
        const float z = static_cast<float>(i) / 100.0f;
        const SimTrace trace = run(snn, Tensor::vec({z}), ro);
        const double want = closed_form_rate(static_cast<double>(z), T, v0);
        const double got = static_cast<double>(trace.sites[0].rates[0]);
        if (got != want) {
          std::cerr << "rate identity mismatch: z=" << z << " T=" << T << " v0=" << v0
                    << " simulated " << got << " closed-form " << want << "\n";
          return kExitVerificationFailure;
        }
        ++points;
      }
    }
  }
  std::cout << "firing-rate identity grid: " << points << " points match exactly\n";
  return kExitOk;
}

int cmd_verify_quant_ratio(int levels, std::size_t samples) {
  const auto stats = snnkit::quantization_error_stats(levels, 0.0f, samples);
  std::cout << "levels=" << levels << " samples=" << samples << "\n";
  std::cout << "mean |err| offset 0.0: " << stats.mean_abs_err_floor << "\n";
  std::cout << "mean |err| offset 0.5: " << stats.mean_abs_err_round << "\n";
  std::cout << "ratio: " << stats.floor_to_round_ratio << "\n";
  if (std::abs(stats.floor_to_round_ratio - 2.0) > 0.1) {
    std::cerr << "ratio deviates from 2.0 by more than 0.1\n";
    return kExitVerificationFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ANN-to-SNN conversion toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--config", g.config_file, "pipeline config file")->envname("SNNKIT_CONFIG");
  app.add_option("--set", g.overrides, "config override, section.key=value");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override run.seed");
  std::string out_flag;
  auto* out_opt = app.add_option("--out", out_flag, "override paths.out");

  // pipeline
  auto* sub_pipeline = app.add_subcommand("pipeline", "run the stages enabled in the config");

  // train
  auto* sub_train = app.add_subcommand("train", "train the base ANN from the config presets");

  // replace
  auto* sub_replace =
      app.add_subcommand("replace", "replace pooling/upsampling layers with trainable convolutions");
  std::string rep_in, rep_out, rep_init = "avg";
  std::uint64_t rep_seed = 0;
  sub_replace->add_option("--in", rep_in, "input network json")->required();
  sub_replace->add_option("--out-file", rep_out, "output network json")->required();
  sub_replace->add_option("--init", rep_init, "replacement init: avg or random");
  sub_replace->add_option("--init-seed", rep_seed, "seed for random init");

  // fuse
  auto* sub_fuse = app.add_subcommand("fuse", "fold BatchNorm layers into the preceding affine");
  std::string fuse_in, fuse_out;
  sub_fuse->add_option("--in", fuse_in, "input network json")->required();
  sub_fuse->add_option("--out-file", fuse_out, "output network json")->required();

  // finetune
  auto* sub_finetune =
      app.add_subcommand("finetune", "quantization-aware finetuning with Quant-ReLU");
  std::string ft_in;
  sub_finetune->add_option("--in", ft_in, "input network json (default: latest artifact)");

  // normalize (part of convert flow, exposed for inspection)
  auto* sub_normalize =
      app.add_subcommand("normalize", "data-based weight normalization on the config dataset");
  std::string norm_in;
  sub_normalize->add_option("--in", norm_in, "input network json (default: latest artifact)");

  // convert
  auto* sub_convert = app.add_subcommand("convert", "convert a prepared ANN into an IF network");
  std::string cv_in, cv_out, cv_readout = "auto";
  double cv_v0 = 0.5, cv_vth = 1.0;
  bool cv_strict = false, cv_allow_pool = false;
  sub_convert->add_option("--in", cv_in, "input network json")->required();
  sub_convert->add_option("--out-file", cv_out, "output snn json")->required();
  sub_convert->add_option("--v0", cv_v0, "initial membrane potential (fraction of V_th)");
  sub_convert->add_option("--vth", cv_vth, "firing threshold");
  sub_convert->add_option("--readout", cv_readout, "spike-count | membrane-accumulate | auto");
  sub_convert->add_flag("--strict", cv_strict, "fail if the network is not normalized");
  sub_convert->add_flag("--allow-max-pool", cv_allow_pool,
                        "keep MaxPool2D as a gated spiking unit (baseline studies)");

  // simulate
  auto* sub_simulate = app.add_subcommand("simulate", "run a converted network");
  std::string sim_in, sim_pgm, sim_spk, sim_prefix = "simulate";
  unsigned sim_T = 64;
  std::string sim_encoder = "constant-current";
  std::uint64_t sim_seed = 0;
  sub_simulate->add_option("--in", sim_in, "snn json artifact")->required();
  sub_simulate->add_option("--pgm", sim_pgm, "gray image input (PGM)");
  sub_simulate->add_option("--spk", sim_spk, "spike stream input (.spk)");
  sub_simulate->add_option("--steps", sim_T, "time steps (ignored for .spk input)");
  sub_simulate->add_option("--encoder", sim_encoder, "constant-current | bernoulli");
  sub_simulate->add_option("--encoder-seed", sim_seed, "bernoulli encoder seed");
  sub_simulate->add_option("--prefix", sim_prefix, "artifact name prefix");

  // encode
  auto* sub_encode = app.add_subcommand("encode", "encode a gray image into a spike stream");
  std::string enc_pgm, enc_out, enc_kind = "integrate";
  unsigned enc_steps = 64;
  double enc_threshold = 1.0;
  std::uint64_t enc_seed = 0;
  sub_encode->add_option("--pgm", enc_pgm, "input gray image (PGM)")->required();
  sub_encode->add_option("--out-file", enc_out, "output .spk path")->required();
  sub_encode->add_option("--steps", enc_steps, "number of time steps");
  sub_encode->add_option("--threshold", enc_threshold, "camera threshold in (0,1]");
  sub_encode->add_option("--encoder", enc_kind, "integrate | bernoulli");
  sub_encode->add_option("--encoder-seed", enc_seed, "bernoulli seed");

  // reconstruct
  auto* sub_reconstruct =
      app.add_subcommand("reconstruct", "reconstruct a gray image from a spike stream");
  std::string rec_in, rec_out;
  sub_reconstruct->add_option("--in", rec_in, "input .spk path")->required();
  sub_reconstruct->add_option("--out-file", rec_out, "output PGM path")->required();

  // verify
  auto* sub_verify = app.add_subcommand("verify", "consistency checks and agreement reports");
  bool vf_grid = false, vf_ratio = false, vf_sweep = false;
  std::vector<std::string> vf_compare;
  int vf_levels = 10;
  std::size_t vf_samples = 1000000;
  unsigned vf_T = 64;
  sub_verify->add_flag("--eq11-grid", vf_grid,
                       "check simulated rates against the closed-form floor identity");
  sub_verify->add_flag("--quant-ratio", vf_ratio, "quantization error of floor vs round offsets");
  sub_verify->add_option("--levels", vf_levels, "quantization level count for --quant-ratio");
  sub_verify->add_option("--samples", vf_samples, "Monte-Carlo sample count for --quant-ratio");
  sub_verify->add_option("--compare", vf_compare, "ANN json and SNN json to compare")
      ->expected(2);
  sub_verify->add_option("--steps", vf_T, "time steps for --compare");
  sub_verify->add_flag("--sweep", vf_sweep, "step-budget sweep on the config dataset artifacts");

  // report
  auto* sub_report = app.add_subcommand("report", "summarize run artifacts");
  std::string rpt_dir, rpt_baseline;
  sub_report->add_option("--dir", rpt_dir, "artifact directory")->required();
  sub_report->add_option("--baseline", rpt_baseline, "baseline artifact directory to diff against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (seed_opt->count() > 0) g.seed = seed_flag;
  if (out_opt->count() > 0) g.out_dir = out_flag;

  try {
    using namespace snnkit;

    if (sub_pipeline->parsed()) {
      const PipelineConfig cfg = load_config(g);
      const PipelineResult res = run_pipeline(cfg, std::cout);
      if (!res.ok) {
        std::cerr << "stage " << res.failed_stage << " failed: " << res.error << "\n";
        return kExitStageFailure;
      }
      return kExitOk;
    }

    if (sub_train->parsed()) {
      PipelineStages stages;
      stages.train = true;
      return run_stages(g, stages);
    }

    if (sub_replace->parsed()) {
      ReplacementConfig rc;
      if (rep_init == "avg") rc.init = ReplacementInit::AvgInit;
      else if (rep_init == "random") rc.init = ReplacementInit::RandomInit;
      else fail(ErrorKind::Config, "--init must be avg or random");
      rc.seed = rep_seed;
      save_network(replace_downsampling(load_network(rep_in), rc), rep_out);
      std::cout << "wrote " << rep_out << "\n";
      return kExitOk;
    }

    if (sub_fuse->parsed()) {
      save_network(fuse_batchnorm(load_network(fuse_in)), fuse_out);
      std::cout << "wrote " << fuse_out << "\n";
      return kExitOk;
    }

    if (sub_finetune->parsed()) {
      PipelineStages stages;
      stages.finetune = true;
      return run_stages(g, stages, ft_in);
    }

    if (sub_normalize->parsed()) {
      PipelineStages stages;
      stages.normalize = true;
      return run_stages(g, stages, norm_in);
    }

    if (sub_convert->parsed()) {
      const NetworkGraph net = load_network(cv_in);
      ConvertOptions opts;
      opts.v0 = cv_v0 * cv_vth;
      opts.v_th = cv_vth;
      opts.strict = cv_strict;
      opts.allow_max_pool = cv_allow_pool;
      if (cv_readout == "auto")
        opts.readout = !net.layers.empty() && net.layers.back().is_activation()
                           ? Readout::SpikeCount
                           : Readout::MembraneAccumulate;
      else {
        const auto r = readout_from_name(cv_readout);
        expect(r.has_value(), ErrorKind::Config, "--readout must be auto, spike-count or membrane-accumulate");
        opts.readout = *r;
      }
      const SNNNetwork snn = convert(net, opts);  // validates before writing
      for (const auto& w : snn.warnings) std::cerr << "warning: " << w << "\n";
      save_snn(net, opts, cv_out);
      std::cout << "wrote " << cv_out << " (" << snn.if_site_count() << " IF sites)\n";
      return kExitOk;
    }

    if (sub_simulate->parsed()) {
      LoadedSnn loaded = load_snn(sim_in);
      const PipelineConfig cfg = load_config(g);
      std::filesystem::create_directories(cfg.out_dir);
      SimTrace trace;
      if (!sim_spk.empty()) {
        const SpikeStream stream = read_spike_stream(sim_spk);
        trace = run_spike_frames(loaded.snn, stream.frames());
      } else {
        expect(!sim_pgm.empty(), ErrorKind::Config, "simulate needs --pgm or --spk input");
        const Tensor x = load_input_tensor(sim_pgm, loaded.snn.input_shape);
        RunOptions ro;
        ro.T = sim_T;
        ro.seed = sim_seed;
        if (sim_encoder == "constant-current") ro.encoding = InputEncoding::ConstantCurrent;
        else if (sim_encoder == "bernoulli") ro.encoding = InputEncoding::Bernoulli;
        else fail(ErrorKind::Config, "--encoder must be constant-current or bernoulli");
        trace = run(loaded.snn, x, ro);
      }
      const std::string base = cfg.out_dir + "/" + sim_prefix;
      detail::write_text_file(base + ".trace.csv", trace_to_csv(trace));
      write_trace(trace, base + ".trace.bin");
      detail::write_text_file(base + ".profile.csv", profile_to_csv(firing_rate_profile(trace)));
      std::cout << "T=" << trace.T << " output:";
      for (std::size_t i = 0; i < std::min<std::size_t>(trace.output.size(), 16); ++i)
        std::cout << " " << trace.output[i];
      if (trace.output.size() > 16) std::cout << " ...";
      std::cout << "\nwrote " << base << ".trace.csv, .trace.bin, .profile.csv\n";
      return kExitOk;
    }

    if (sub_encode->parsed()) {
      const Tensor img = read_pgm(enc_pgm);
      const auto frames = repeat_frame(img, enc_steps);
      SpikeStream stream;
      if (enc_kind == "integrate")
        stream = encode_integrate(frames, static_cast<float>(enc_threshold));
      else if (enc_kind == "bernoulli")
        stream = encode_bernoulli(frames, enc_seed);
      else
        fail(ErrorKind::Config, "--encoder must be integrate or bernoulli");
      write_spike_stream(stream, enc_out);
      std::cout << "wrote " << enc_out << " (" << stream.width << "x" << stream.height << ", T="
                << stream.steps << ")\n";
      return kExitOk;
    }

    if (sub_reconstruct->parsed()) {
      write_pgm(reconstruct_gray(read_spike_stream(rec_in)), rec_out);
      std::cout << "wrote " << rec_out << "\n";
      return kExitOk;
    }

    if (sub_verify->parsed()) {
      expect(vf_grid || vf_ratio || !vf_compare.empty() || vf_sweep, ErrorKind::Config,
             "verify needs one of --eq11-grid, --quant-ratio, --compare, --sweep");
      if (vf_grid) {
        const int rc = cmd_verify_rate_grid();
        if (rc != kExitOk) return rc;
      }
      if (vf_ratio) {
        const int rc = cmd_verify_quant_ratio(vf_levels, vf_samples);
        if (rc != kExitOk) return rc;
      }
      if (!vf_compare.empty()) {
        const NetworkGraph ann = load_network(vf_compare[0]);
        LoadedSnn loaded = load_snn(vf_compare[1]);
        const PipelineConfig cfg = load_config(g);
        const PipelineData data = build_pipeline_data(cfg);
        const ErrorReport report = compare_ann_snn(ann, loaded.snn, data.eval.inputs, vf_T);
        std::cout << error_report_to_text(report);
      }
      if (vf_sweep) {
        const PipelineConfig cfg = load_config(g);
        const PipelineData data = build_pipeline_data(cfg);
        const NetworkGraph ann = load_network(cfg.out_dir + "/04-normalize.network.json");
        LoadedSnn loaded = load_snn(cfg.out_dir + "/05-convert.snn.json");
        std::vector<SweepRow> rows;
        std::string metric;
        if (data.detection) {
          metric = "mean_iou";
          rows = sweep_detection(ann, loaded.snn, data.det_eval, cfg.t_list, cfg.threads);
        } else {
          metric = "accuracy";
          rows = sweep_classification(ann, loaded.snn, data.eval, cfg.t_list, cfg.threads);
        }
        detail::write_text_file(cfg.out_dir + "/07-sweep.csv", sweep_to_csv(rows, metric));
        for (const auto& row : rows)
          std::cout << "T=" << row.T << " " << metric << "=" << row.task_metric << " mean_err="
                    << row.mean_output_err << "\n";
      }
      return kExitOk;
    }

    if (sub_report->parsed()) {
      auto read_file = [](const std::string& path) -> std::optional<std::string> {
        std::ifstream in(path, std::ios::binary);
        if (!in.good()) return std::nullopt;
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
      };
      std::cout << "artifacts in " << rpt_dir << ":\n";
      for (const char* name :
           {"00-train.metrics.csv", "03-finetune.metrics.csv", "06-simulate.error_report.txt",
            "07-sweep.csv", "08-report.txt"}) {
        if (read_file(rpt_dir + "/" + std::string(name)).has_value())
          std::cout << "  " << name << "\n";
      }
      if (auto txt = read_file(rpt_dir + "/06-simulate.error_report.txt")) std::cout << *txt;
      if (auto sweep = read_file(rpt_dir + "/07-sweep.csv")) std::cout << *sweep;
      if (!rpt_baseline.empty()) {
        const auto ours = read_file(rpt_dir + "/06-simulate.profile.csv");
        const auto theirs = read_file(rpt_baseline + "/06-simulate.profile.csv");
        expect(ours.has_value() && theirs.has_value(), ErrorKind::Io,
               "both directories need a 06-simulate.profile.csv for a profile diff");
        auto parse_rows = [](const std::string& csv) {
          std::vector<std::pair<std::string, double>> rows;
          std::istringstream ss(csv);
          std::string line;
          std::getline(ss, line);  // header
          while (std::getline(ss, line)) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos) continue;
            rows.push_back({line.substr(0, c1), std::stod(line.substr(c1 + 1, c2 - c1 - 1))});
          }
          return rows;
        };
        const auto a = parse_rows(*ours), b = parse_rows(*theirs);
        std::cout << "firing-rate profile diff (this run vs baseline):\n";
        std::cout << "layer,mean_rate,baseline_mean_rate,delta\n";
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
          std::cout << a[i].first << "," << a[i].second << "," << b[i].second << ","
                    << (a[i].second - b[i].second) << "\n";
      }
      return kExitOk;
    }

    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const snnkit::Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
}
