// Analytical oracles and error instrumentation for the conversion math:
// closed-form firing rates, the firing-rate approximation and its floor
// identity, quantization-error statistics, ANN/SNN agreement reports, and
// step-budget sweeps.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "snnkit/datasets.hpp"
#include "snnkit/metrics.hpp"
#include "snnkit/snn.hpp"
#include "snnkit/train.hpp"

namespace snnkit {

// Spike rate of a single IF neuron driven by the constant input z for T
// steps: clip_[0,1]( floor(z*T/v_th + v0/v_th) / T ), and 0 for z < 0.
inline double closed_form_rate(double z, unsigned T, double v0, double v_th = 1.0) {
  if (z < 0.0) return 0.0;
  const double n = std::floor(z * static_cast<double>(T) / v_th + v0 / v_th);
  const double r = n / static_cast<double>(T);
  return std::min(1.0, std::max(0.0, r));
}

// Firing-rate approximation for one layer: the affine drive computed from the
// previous layer's rates minus the residual V(T)/T. The affine result goes
// through the same float32 path as the simulator, so for constant inputs the
// relationship below is exact.
inline std::vector<double> approx_rate(const LayerSpec& affine, const Tensor& prev_rates,
                                       const std::vector<double>& v_final, unsigned T) {
  expect(affine.has_weights() || affine.kind == LayerKind::Identity, ErrorKind::Verification,
         "approx_rate expects an affine (or identity) layer");
  const Tensor drive = eval_layer(affine, prev_rates);
  expect(drive.size() == v_final.size(), ErrorKind::Shape,
         "residual vector length does not match layer output");
  std::vector<double> r_tilde(drive.size());
  for (std::size_t i = 0; i < drive.size(); ++i)
    r_tilde[i] = static_cast<double>(drive[i]) - v_final[i] / static_cast<double>(T);
  return r_tilde;
}

// Floor identity between the approximation and the simulated rate, with the
// initial potential folded back in (the residual term already carries it):
//   r == clip_[0,1]( floor(r_tilde*T + v0) / T ).
// Returns the worst absolute deviation over the layer.
inline double rate_identity_max_dev(const std::vector<double>& r_tilde, const Tensor& simulated,
                                    unsigned T, double v0) {
  expect(r_tilde.size() == simulated.size(), ErrorKind::Shape,
         "rate identity check shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < r_tilde.size(); ++i) {
    const double n = std::floor(r_tilde[i] * static_cast<double>(T) + v0 + 1e-9);
    const double pred = std::min(1.0, std::max(0.0, n / static_cast<double>(T)));
    worst = std::max(worst, std::abs(pred - static_cast<double>(simulated[i])));
  }
  return worst;
}

// ---- quantization error statistics ----

struct QuantErrorStats {
  double mean_abs_err = 0.0;        // for the requested offset
  double mean_abs_err_floor = 0.0;  // offset 0
  double mean_abs_err_round = 0.0;  // offset 0.5
  double floor_to_round_ratio = 0.0;
};

// Monte-Carlo over u ~ Uniform[0,1): mean |quant(u) - u| for the requested
// offset, plus the floor(offset 0) / round(offset 0.5) pair on the same
// sample stream and their ratio.
inline QuantErrorStats quantization_error_stats(int levels, float offset, std::size_t n,
                                                std::uint64_t seed = 12345) {
  expect(n >= 10000, ErrorKind::Verification, "sample count must be at least 10^4");
  expect(levels >= 1, ErrorKind::Verification, "level count must be >= 1");
  const QuantReluParams asked{levels, offset, 1.0f};
  const QuantReluParams floor_q{levels, 0.0f, 1.0f};
  const QuantReluParams round_q{levels, 0.5f, 1.0f};
  Rng rng(seed);
  double sum_asked = 0.0, sum_floor = 0.0, sum_round = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float u = rng.uniformf();
    sum_asked += std::abs(static_cast<double>(quant_relu_value(u, asked)) - static_cast<double>(u));
    sum_floor += std::abs(static_cast<double>(quant_relu_value(u, floor_q)) - static_cast<double>(u));
    sum_round += std::abs(static_cast<double>(quant_relu_value(u, round_q)) - static_cast<double>(u));
  }
  QuantErrorStats s;
  s.mean_abs_err = sum_asked / static_cast<double>(n);
  s.mean_abs_err_floor = sum_floor / static_cast<double>(n);
  s.mean_abs_err_round = sum_round / static_cast<double>(n);
  s.floor_to_round_ratio = s.mean_abs_err_floor / s.mean_abs_err_round;
  return s;
}

// ---- ANN / SNN agreement ----

struct ErrorReportRow {
  std::size_t layer_index = 0;
  double mean_abs_err = 0.0;       // |r - x| between rates and ANN activations
  double max_abs_err = 0.0;
  double mean_abs_residual = 0.0;  // |V(T)/T|; inhibited neurons keep this at |drive|
  double max_abs_residual = 0.0;
  double mean_pos_residual = 0.0;  // max(V(T),0)/T, bounded by (V_th + max drive)/T
};

struct ErrorReport {
  unsigned T = 0;
  std::vector<ErrorReportRow> rows;  // one per IF site
  double mean_site_err = 0.0;        // |r - x| over every site neuron and input
  double mean_output_err = 0.0;      // |snn output - ann output|
  double max_output_err = 0.0;
  double task_metric = 0.0;          // filled by sweeps; 0 otherwise
  std::string task_metric_name;
};

namespace detail {

inline void check_matching_architecture(const NetworkGraph& ann, const SNNNetwork& snn) {
  expect(snn.units.size() == ann.layers.size(), ErrorKind::Verification,
         "mismatched architectures: " + std::to_string(ann.layers.size()) + " ANN layers vs " +
             std::to_string(snn.units.size()) + " SNN units");
  for (std::size_t i = 0; i < ann.layers.size(); ++i) {
    const bool ann_act = ann.layers[i].is_activation();
    expect(ann_act == snn.units[i].if_site, ErrorKind::Verification,
           "mismatched architectures at layer " + std::to_string(i));
    if (!ann_act)
      expect(ann.layers[i].kind == snn.units[i].layer.kind, ErrorKind::Verification,
             "mismatched architectures at layer " + std::to_string(i) + ": " +
                 std::string(layer_kind_name(ann.layers[i].kind)) + " vs " +
                 std::string(layer_kind_name(snn.units[i].layer.kind)));
  }
}

}  // namespace detail

// Per-site |rate - activation| statistics over a set of inputs, with the
// residual V(T)/T recorded per site. Activation kinds may differ between the
// two networks (quantized vs plain ReLU); everything else must match.
inline ErrorReport compare_ann_snn(const NetworkGraph& ann, SNNNetwork& snn,
                                   const std::vector<Tensor>& inputs, unsigned T) {
  expect(!inputs.empty(), ErrorKind::Verification, "no comparison inputs");
  detail::check_matching_architecture(ann, snn);

  ErrorReport report;
  report.T = T;
  const std::vector<std::size_t> sites = activation_sites(ann);
  report.rows.resize(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) report.rows[s].layer_index = sites[s];

  std::vector<double> err_sum(sites.size(), 0.0), res_sum(sites.size(), 0.0);
  std::vector<double> pos_res_sum(sites.size(), 0.0);
  std::vector<std::size_t> counts(sites.size(), 0);
  double out_err_sum = 0.0;
  std::size_t out_count = 0;

  RunOptions opts;
  opts.T = T;
  for (const Tensor& x : inputs) {
    const std::vector<Tensor> acts = forward(ann, x);
    const SimTrace trace = run(snn, x, opts);
    expect(trace.sites.size() == sites.size(), ErrorKind::Verification,
           "trace does not cover every activation site");
    for (std::size_t s = 0; s < sites.size(); ++s) {
      const Tensor& ann_act = acts[sites[s]];
      const SiteTrace& site = trace.sites[s];
      expect(ann_act.size() == site.rates.size(), ErrorKind::Verification,
             "mismatched architectures: activation layer " + std::to_string(sites[s]) + " has " +
                 std::to_string(ann_act.size()) + " neurons vs " +
                 std::to_string(site.rates.size()) + " IF neurons");
      for (std::size_t n = 0; n < site.rates.size(); ++n) {
        const double err = std::abs(static_cast<double>(site.rates[n]) -
                                    static_cast<double>(ann_act[n]));
        const double res = std::abs(site.v_final[n] / static_cast<double>(T));
        err_sum[s] += err;
        res_sum[s] += res;
        pos_res_sum[s] += std::max(0.0, site.v_final[n]) / static_cast<double>(T);
        report.rows[s].max_abs_err = std::max(report.rows[s].max_abs_err, err);
        report.rows[s].max_abs_residual = std::max(report.rows[s].max_abs_residual, res);
        ++counts[s];
      }
    }
    const Tensor& ann_out = acts.empty() ? x : acts.back();
    expect(ann_out.size() == trace.output.size(), ErrorKind::Verification,
           "output shapes differ between the networks");
    for (std::size_t n = 0; n < ann_out.size(); ++n) {
      const double err = std::abs(static_cast<double>(trace.output[n]) -
                                  static_cast<double>(ann_out[n]));
      out_err_sum += err;
      report.max_output_err = std::max(report.max_output_err, err);
      ++out_count;
    }
  }
  double total_err = 0.0;
  std::size_t total_count = 0;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    report.rows[s].mean_abs_err = err_sum[s] / static_cast<double>(counts[s]);
    report.rows[s].mean_abs_residual = res_sum[s] / static_cast<double>(counts[s]);
    report.rows[s].mean_pos_residual = pos_res_sum[s] / static_cast<double>(counts[s]);
    total_err += err_sum[s];
    total_count += counts[s];
  }
  report.mean_site_err = total_err / static_cast<double>(total_count);
  report.mean_output_err = out_err_sum / static_cast<double>(out_count);
  return report;
}

inline std::string error_report_to_csv(const ErrorReport& r) {
  std::string out = "layer,mean_abs_err,max_abs_err,mean_abs_residual,max_abs_residual,mean_pos_residual\n";
  for (const auto& row : r.rows)
    out += std::to_string(row.layer_index) + "," + num_str(row.mean_abs_err) + "," +
           num_str(row.max_abs_err) + "," + num_str(row.mean_abs_residual) + "," +
           num_str(row.max_abs_residual) + "," + num_str(row.mean_pos_residual) + "\n";
  return out;
}

inline std::string error_report_to_text(const ErrorReport& r) {
  std::string out = "ANN/SNN agreement at T=" + std::to_string(r.T) + "\n";
  for (const auto& row : r.rows)
    out += "  layer " + std::to_string(row.layer_index) + ": mean |r-x| " +
           num_str(row.mean_abs_err) + ", max " + num_str(row.max_abs_err) + ", mean |V(T)/T| " +
           num_str(row.mean_abs_residual) + "\n";
  out += "  output: mean err " + num_str(r.mean_output_err) + ", max err " +
         num_str(r.max_output_err) + "\n";
  if (!r.task_metric_name.empty())
    out += "  " + r.task_metric_name + ": " + num_str(r.task_metric) + "\n";
  return out;
}

// ---- step-budget sweeps ----

struct SweepRow {
  unsigned T = 0;
  double task_metric = 0.0;
  double mean_output_err = 0.0;
};

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows, const std::string& metric_name) {
  std::string out = "T," + metric_name + ",mean_output_err\n";
  for (const auto& r : rows)
    out += std::to_string(r.T) + "," + num_str(r.task_metric) + "," + num_str(r.mean_output_err) + "\n";
  return out;
}

namespace detail {

inline void check_t_list(const std::vector<unsigned>& t_list) {
  expect(!t_list.empty(), ErrorKind::Verification, "T list is empty");
  for (std::size_t i = 1; i < t_list.size(); ++i)
    expect(t_list[i] > t_list[i - 1], ErrorKind::Verification, "T list must be ascending");
}

}  // namespace detail

// One row per T: the task metric of the SNN plus its mean output deviation
// from the ANN. Each T gets its own simulator instance; rows may be computed
// in parallel.
inline std::vector<SweepRow> sweep_classification(const NetworkGraph& ann, const SNNNetwork& snn,
                                                  const Dataset& eval,
                                                  const std::vector<unsigned>& t_list,
                                                  int threads = 1) {
  detail::check_t_list(t_list);
  expect(eval.size() > 0, ErrorKind::Verification, "empty evaluation set");
  std::vector<SweepRow> rows(t_list.size());
  detail::indexed_parallel_for(t_list.size(), threads, [&](std::size_t k) {
    SNNNetwork instance = snn;
    const unsigned T = t_list[k];
    std::size_t correct = 0;
    double err_sum = 0.0;
    std::size_t err_count = 0;
    RunOptions opts;
    opts.T = T;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      const SimTrace trace = run(instance, eval.inputs[i], opts);
      if (static_cast<int>(argmax(trace.output)) == eval.labels[i]) ++correct;
      const Tensor ann_out = forward_output(ann, eval.inputs[i]);
      for (std::size_t n = 0; n < ann_out.size(); ++n) {
        err_sum += std::abs(static_cast<double>(trace.output[n]) - static_cast<double>(ann_out[n]));
        ++err_count;
      }
    }
    rows[k] = SweepRow{T, static_cast<double>(correct) / static_cast<double>(eval.size()),
                       err_sum / static_cast<double>(err_count)};
  });
  return rows;
}

inline std::vector<SweepRow> sweep_detection(const NetworkGraph& ann, const SNNNetwork& snn,
                                             const DetectionDataset& eval,
                                             const std::vector<unsigned>& t_list,
                                             int threads = 1) {
  detail::check_t_list(t_list);
  expect(eval.data.size() > 0, ErrorKind::Verification, "empty evaluation set");
  std::vector<SweepRow> rows(t_list.size());
  detail::indexed_parallel_for(t_list.size(), threads, [&](std::size_t k) {
    SNNNetwork instance = snn;
    const unsigned T = t_list[k];
    std::vector<BoxPrediction> preds;
    double err_sum = 0.0;
    std::size_t err_count = 0;
    RunOptions opts;
    opts.T = T;
    for (std::size_t i = 0; i < eval.data.size(); ++i) {
      const SimTrace trace = run(instance, eval.data.inputs[i], opts);
      BoxPrediction p;
      p.box = box_from_output(trace.output);
      p.confidence = trace.output.size() > 4 ? trace.output[4] : 1.0f;
      preds.push_back(p);
      const Tensor ann_out = forward_output(ann, eval.data.inputs[i]);
      for (std::size_t n = 0; n < ann_out.size(); ++n) {
        err_sum += std::abs(static_cast<double>(trace.output[n]) - static_cast<double>(ann_out[n]));
        ++err_count;
      }
    }
    rows[k] = SweepRow{T, mean_iou(preds, eval.boxes), err_sum / static_cast<double>(err_count)};
  });
  return rows;
}

}  // namespace snnkit
