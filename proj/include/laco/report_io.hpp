#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "laco/config.hpp"
#include "laco/cost_model.hpp"
#include "laco/error.hpp"
#include "laco/experiments.hpp"
#include "laco/tensor.hpp"

namespace laco {

inline constexpr const char* kShapeTraceSchema = "laco-shape-trace-v1";
inline constexpr const char* kCostReportSchema = "laco-cost-report-v1";
inline constexpr const char* kTrainLogSchema = "laco-train-log-v1";
inline constexpr const char* kSweepSchema = "laco-sweep-v1";
inline constexpr const char* kGradCheckSchema = "laco-gradcheck-v1";
inline constexpr const char* kParamsSchema = "laco-params-v1";

namespace detail {

// %.17g keeps doubles bit-exact through text and is locale independent.
inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string plot_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

// The measured fields are the one part of a report that varies between
// otherwise identical runs; the flag marks the block as exempt from
// byte-identity comparisons.
inline OrderedJson to_json(const LatencyStats& s) {
  return OrderedJson{{"nondeterministic", true},
                     {"median_s", s.median_s},
                     {"min_s", s.min_s},
                     {"max_s", s.max_s},
                     {"trials", s.trials},
                     {"warmup", s.warmup},
                     {"resolution_s", s.resolution_s},
                     {"resolution_warning", s.resolution_warning}};
}

inline LatencyStats latency_from_json(const OrderedJson& j) {
  LatencyStats s;
  s.median_s = j.at("median_s").get<double>();
  s.min_s = j.at("min_s").get<double>();
  s.max_s = j.at("max_s").get<double>();
  s.trials = j.at("trials").get<std::size_t>();
  s.warmup = j.at("warmup").get<std::size_t>();
  s.resolution_s = j.at("resolution_s").get<double>();
  s.resolution_warning = j.at("resolution_warning").get<bool>();
  return s;
}

inline OrderedJson to_json(const RunMeta& m) {
  OrderedJson j{{"mode", m.mode},
                {"L", m.enc.layers},
                {"d", m.enc.width},
                {"heads", m.enc.heads},
                {"mlp_width", m.enc.mlp_width},
                {"patch", m.enc.patch},
                {"image_edge", m.enc.image_edge},
                {"tokens", m.enc.tokens()},
                {"k", m.k},
                {"fraction", nullptr},
                {"r", m.r},
                {"variant", m.variant},
                {"hidden_width", m.hidden_width},
                {"seed", m.seed}};
  if (m.fraction) j["fraction"] = *m.fraction;
  return j;
}

inline RunMeta meta_from_json(const OrderedJson& j) {
  RunMeta m;
  m.mode = j.at("mode").get<std::string>();
  m.enc.layers = j.at("L").get<std::size_t>();
  m.enc.width = j.at("d").get<std::size_t>();
  m.enc.heads = j.at("heads").get<std::size_t>();
  m.enc.mlp_width = j.at("mlp_width").get<std::size_t>();
  m.enc.patch = j.at("patch").get<std::size_t>();
  m.enc.image_edge = j.at("image_edge").get<std::size_t>();
  m.k = j.at("k").get<std::size_t>();
  if (!j.at("fraction").is_null()) m.fraction = j.at("fraction").get<double>();
  m.r = j.at("r").get<std::size_t>();
  m.variant = j.at("variant").get<std::string>();
  m.hidden_width = j.at("hidden_width").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

inline OrderedJson to_json(const LayerCost& c) {
  return OrderedJson{{"layer", c.layer},
                     {"tokens", c.tokens},
                     {"attn_flops", c.attn_flops},
                     {"mlp_flops", c.mlp_flops},
                     {"merger_flops", c.merger_flops}};
}

inline LayerCost layer_cost_from_json(const OrderedJson& j) {
  LayerCost c;
  c.layer = j.at("layer").get<std::size_t>();
  c.tokens = j.at("tokens").get<std::size_t>();
  c.attn_flops = j.at("attn_flops").get<std::uint64_t>();
  c.mlp_flops = j.at("mlp_flops").get<std::uint64_t>();
  c.merger_flops = j.at("merger_flops").get<std::uint64_t>();
  return c;
}

inline OrderedJson cost_report_json(const CostReport& r) {
  OrderedJson layers = OrderedJson::array();
  for (const LayerCost& row : r.layers) layers.push_back(to_json(row));
  OrderedJson j{{"schema", kCostReportSchema},
                {"meta", to_json(r.meta)},
                {"layers", std::move(layers)},
                {"totals", OrderedJson{{"flops", r.flops_total}, {"tokens_out", r.tokens_out}}},
                {"latency", nullptr}};
  if (r.latency) j["latency"] = to_json(*r.latency);
  return j;
}

inline CostReport cost_report_from_json(const OrderedJson& j) {
  if (j.value("schema", "") != kCostReportSchema) {
    throw ConfigError("cost report: unexpected schema '" + j.value("schema", "") + "'");
  }
  CostReport r;
  r.meta = meta_from_json(j.at("meta"));
  for (const auto& row : j.at("layers")) r.layers.push_back(layer_cost_from_json(row));
  r.flops_total = j.at("totals").at("flops").get<std::uint64_t>();
  r.tokens_out = j.at("totals").at("tokens_out").get<std::size_t>();
  if (!j.at("latency").is_null()) r.latency = latency_from_json(j.at("latency"));
  return r;
}

inline OrderedJson shape_trace_json(const RunMeta& meta, const std::vector<std::size_t>& trace) {
  OrderedJson rows = OrderedJson::array();
  for (std::size_t l = 0; l < trace.size(); ++l) {
    rows.push_back(OrderedJson{{"layer", l + 1}, {"tokens", trace[l]}});
  }
  return OrderedJson{{"schema", kShapeTraceSchema}, {"meta", to_json(meta)}, {"trace", std::move(rows)}};
}

inline void write_shape_trace_csv(std::ostream& os, const std::vector<std::size_t>& trace) {
  os << "layer,tokens\n";
  for (std::size_t l = 0; l < trace.size(); ++l) os << l + 1 << ',' << trace[l] << '\n';
}

inline void write_cost_csv(std::ostream& os, const CostReport& r) {
  os << "layer,tokens,attn_flops,mlp_flops,merger_flops\n";
  for (const LayerCost& row : r.layers) {
    os << row.layer << ',' << row.tokens << ',' << row.attn_flops << ',' << row.mlp_flops << ','
       << row.merger_flops << '\n';
  }
}

inline OrderedJson tensor_json(const Tensor& t) {
  return OrderedJson{{"shape", t.shape()}, {"values", t.values()}};
}

inline OrderedJson params_json(const PmlParams& pml, const ProjectorParams* projector) {
  OrderedJson j{{"schema", kParamsSchema},
                {"merger", OrderedJson{{"w1", tensor_json(pml.w1)},
                                       {"b1", tensor_json(pml.b1)},
                                       {"w2", tensor_json(pml.w2)},
                                       {"b2", tensor_json(pml.b2)}}}};
  if (projector != nullptr) {
    j["projector"] = OrderedJson{{"w", tensor_json(projector->w)}, {"b", tensor_json(projector->b)}};
  }
  return j;
}

inline OrderedJson train_log_json(const RunMeta& meta, const TrainConfig& tc, const TrainLog& log,
                                  const std::string& params_ref) {
  OrderedJson trace = OrderedJson::array();
  for (std::size_t s = 0; s < log.losses.size(); ++s) {
    trace.push_back(OrderedJson{{"step", s}, {"loss", log.losses[s]}, {"pml_grad_norm", log.pml_grad_norms[s]}});
  }
  OrderedJson j{{"schema", kTrainLogSchema},
                {"meta", to_json(meta)},
                {"train", OrderedJson{{"steps", tc.steps}, {"lr", tc.lr}, {"batch", tc.batch}}},
                {"trace", std::move(trace)},
                {"final_loss", log.losses.back()},
                {"params", nullptr}};
  if (params_ref.empty()) {
    j["params"] = params_json(log.final_pml, &log.final_projector);
  } else {
    j["params"] = params_ref;
  }
  return j;
}

inline void write_train_csv(std::ostream& os, const TrainLog& log) {
  os << "step,loss,pml_grad_norm\n";
  for (std::size_t s = 0; s < log.losses.size(); ++s) {
    os << s << ',' << detail::csv_double(log.losses[s]) << ',' << detail::csv_double(log.pml_grad_norms[s]) << '\n';
  }
}

inline OrderedJson sweep_json(const RunMeta& meta, const std::vector<SweepPoint>& points) {
  OrderedJson rows = OrderedJson::array();
  for (const SweepPoint& pt : points) {
    OrderedJson row{{"fraction", pt.fraction}, {"k", pt.k},       {"variant", pt.variant},
                    {"ok", pt.ok},             {"error", nullptr}, {"flops_total", nullptr},
                    {"tokens_out", nullptr},   {"median_s", nullptr}};
    if (!pt.ok) {
      row["error"] = pt.error;
    } else {
      row["flops_total"] = pt.report.flops_total;
      row["tokens_out"] = pt.report.tokens_out;
      if (pt.report.latency) row["median_s"] = pt.report.latency->median_s;
    }
    rows.push_back(std::move(row));
  }
  return OrderedJson{{"schema", kSweepSchema}, {"meta", to_json(meta)}, {"points", std::move(rows)}};
}

// Whitespace table for gnuplot: one row per successful sweep point, failures
// preserved as comments. Missing latency prints as nan.
inline void write_plot_data(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << "# fraction  k  variant  flops_total  median_s\n";
  for (const SweepPoint& pt : points) {
    if (!pt.ok) {
      os << "# skipped fraction=" << detail::plot_double(pt.fraction) << " variant=" << pt.variant << ": "
         << pt.error << '\n';
      continue;
    }
    os << detail::plot_double(pt.fraction) << "  " << pt.k << "  " << pt.variant << "  " << pt.report.flops_total
       << "  " << (pt.report.latency ? detail::plot_double(pt.report.latency->median_s) : "nan") << '\n';
  }
}

inline void write_plot_script(std::ostream& os, const std::string& dat_name, const std::string& svg_name) {
  os << "set terminal svg size 840,520\n"
     << "set output '" << svg_name << "'\n"
     << "set datafile missing 'nan'\n"
     << "set xlabel 'insertion fraction k / L'\n"
     << "set ylabel 'total FLOPs'\n"
     << "set y2label 'median latency (s)'\n"
     << "set ytics nomirror\n"
     << "set y2tics\n"
     << "set key top left\n"
     << "plot '" << dat_name << "' using 1:4 with linespoints title 'FLOPs', \\\n"
     << "     '" << dat_name << "' using 1:5 axes x1y2 with linespoints title 'median latency'\n";
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw IoError("cannot write output file '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read file '" + path + "'");
  return buffer.str();
}

}  // namespace laco
