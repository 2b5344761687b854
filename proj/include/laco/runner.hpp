#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "laco/config.hpp"
#include "laco/cost_model.hpp"
#include "laco/encoder.hpp"
#include "laco/error.hpp"
#include "laco/experiments.hpp"
#include "laco/gradcheck.hpp"
#include "laco/report_io.hpp"

namespace laco {

namespace detail {

inline std::string path_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

inline std::string json_text(const OrderedJson& j) { return j.dump(2) + "\n"; }

// Main artifact goes to cfg.out when set, stdout otherwise.
inline void emit_main(const RunConfig& cfg, std::ostream& os, const std::string& content) {
  if (cfg.out.empty()) {
    os << content;
  } else {
    write_file(cfg.out, content);
  }
}

inline RunMeta make_meta(const RunConfig& cfg) {
  RunMeta m;
  m.mode = to_string(cfg.mode);
  m.enc = cfg.enc;
  m.k = cfg.mode == RunMode::Sweep ? 0 : cfg.resolved_k();
  m.fraction = cfg.fraction;
  m.r = cfg.r;
  m.variant = to_string(cfg.variant);
  m.hidden_width = cfg.resolved_hidden_width();
  m.seed = cfg.seed;
  return m;
}

inline void run_shapes(const RunConfig& cfg, std::ostream& os) {
  const std::size_t k = cfg.variant == MergerVariant::External ? cfg.enc.layers : cfg.resolved_k();
  const std::vector<std::size_t> trace = shape_trace(cfg.enc, InsertionPoint{k}, CompressionRatio(cfg.r));
  if (cfg.format == ReportFormat::Json) {
    emit_main(cfg, os, json_text(shape_trace_json(make_meta(cfg), trace)));
  } else {
    std::ostringstream csv;
    write_shape_trace_csv(csv, trace);
    emit_main(cfg, os, csv.str());
  }
}

inline CostReport build_cost_report(const RunConfig& cfg) {
  CostReport report = estimate_flops(cfg.enc, InsertionPoint{cfg.resolved_k()}, CompressionRatio(cfg.r), cfg.variant,
                                     cfg.resolved_hidden_width(), cfg.seed);
  report.meta.mode = to_string(cfg.mode);
  report.meta.fraction = cfg.fraction;
  return report;
}

inline void emit_cost_report(const RunConfig& cfg, std::ostream& os, const CostReport& report) {
  if (cfg.format == ReportFormat::Json) {
    emit_main(cfg, os, json_text(cost_report_json(report)));
    return;
  }
  std::ostringstream csv;
  write_cost_csv(csv, report);
  emit_main(cfg, os, csv.str());
  if (!cfg.out.empty()) {
    // The pinned CSV table has no totals row; they ride in a sidecar file.
    OrderedJson totals{{"schema", kCostReportSchema},
                       {"meta", to_json(report.meta)},
                       {"totals", OrderedJson{{"flops", report.flops_total}, {"tokens_out", report.tokens_out}}},
                       {"latency", nullptr}};
    if (report.latency) totals["latency"] = to_json(*report.latency);
    write_file(path_stem(cfg.out) + ".totals.json", json_text(totals));
  }
}

inline void run_flops(const RunConfig& cfg, std::ostream& os) { emit_cost_report(cfg, os, build_cost_report(cfg)); }

inline void run_bench(const RunConfig& cfg, std::ostream& os) {
  CostReport report = build_cost_report(cfg);
  report.latency = measure_latency(cfg.enc, InsertionPoint{cfg.resolved_k()}, CompressionRatio(cfg.r), cfg.variant,
                                   cfg.trials, cfg.warmup, cfg.seed, cfg.resolved_hidden_width());
  emit_cost_report(cfg, os, report);
}

struct GradCheckOutcome {
  std::string name;
  std::size_t coords = 0;
  double tolerance = 0.0;
  double max_rel_gap = 0.0;
  bool pass = false;
};

// Checks the merger's analytic gradients in isolation (input grid plus all
// four parameter tensors), at a random point so no branch is degenerate.
inline GradCheckOutcome check_merger_gradients(const RunConfig& cfg) {
  const CompressionRatio r(cfg.r);
  const std::size_t c = cfg.enc.width;
  const std::size_t edge = 2 * r.value;
  const std::size_t hidden = cfg.resolved_hidden_width();
  std::mt19937_64 rng(cfg.seed + 17);
  PmlParams params = init_params(c, r, hidden, cfg.seed);
  params.b1 = uniform_tensor({hidden}, -0.3, 0.3, rng);
  params.w2 = uniform_tensor({hidden, c}, -0.3, 0.3, rng);
  params.b2 = uniform_tensor({c}, -0.3, 0.3, rng);
  Tensor grid_values = uniform_tensor({edge, edge, c}, -1.0, 1.0, rng);

  std::vector<Tensor*> coords{&grid_values, &params.w1, &params.b1, &params.w2, &params.b2};
  auto objective = [&](GradTape* tape) {
    const TokenGrid grid(edge, edge, c, grid_values);
    const TokenGrid out = merge_forward(grid, params, r, MergerVariant::PmlWithResidual, tape);
    return sum(mul(out.values(), out.values(), tape), tape);
  };

  GradTape tape;
  for (Tensor* t : coords) tape.watch(*t);
  const Gradients grads = tape.backward(objective(&tape));
  std::vector<const Tensor*> grad_list;
  for (Tensor* t : coords) grad_list.push_back(&grads.wrt(*t));
  const std::vector<double> analytic = flatten_values(grad_list);
  const std::vector<double> point =
      flatten_values(std::vector<const Tensor*>(coords.begin(), coords.end()));

  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.max_coords = 64;
  opts.seed = cfg.seed;
  GradCheckOutcome outcome;
  outcome.name = "merger";
  outcome.coords = std::min<std::size_t>(opts.max_coords, point.size());
  outcome.tolerance = 1e-5;
  outcome.max_rel_gap = gradient_check(
      [&](const std::vector<double>& p) {
        assign_values(p, coords);
        return objective(nullptr)[0];
      },
      point, analytic, opts);
  assign_values(point, coords);
  outcome.pass = outcome.max_rel_gap <= outcome.tolerance;
  return outcome;
}

// End-to-end check through the full encoder: image and merger parameters,
// objective is the squared norm of the output tokens.
inline GradCheckOutcome check_encoder_gradients(const RunConfig& cfg) {
  const CompressionRatio r(cfg.r);
  const std::size_t hidden = cfg.resolved_hidden_width();
  const InsertionPoint at{cfg.resolved_k()};
  std::mt19937_64 rng(cfg.seed + 29);
  EncoderParams params = init_encoder_params(cfg.enc, r, hidden, cfg.seed);
  params.pml.b1 = uniform_tensor({hidden}, -0.2, 0.2, rng);
  params.pml.w2 = uniform_tensor({hidden, cfg.enc.width}, -0.2, 0.2, rng);
  params.pml.b2 = uniform_tensor({cfg.enc.width}, -0.2, 0.2, rng);
  Tensor image = uniform_tensor({cfg.enc.image_edge, cfg.enc.image_edge, 3}, 0.0, 1.0, rng);

  std::vector<Tensor*> coords{&image, &params.pml.w1, &params.pml.b1, &params.pml.w2, &params.pml.b2};
  auto objective = [&](GradTape* tape) {
    const TokenGrid out = encode(image, params, cfg.enc, at, r, cfg.variant, tape);
    return sum(mul(out.to_tokens(tape), out.to_tokens(tape), tape), tape);
  };

  GradTape tape;
  for (Tensor* t : coords) tape.watch(*t);
  const Gradients grads = tape.backward(objective(&tape));
  std::vector<const Tensor*> grad_list;
  for (Tensor* t : coords) grad_list.push_back(&grads.wrt(*t));
  const std::vector<double> analytic = flatten_values(grad_list);
  const std::vector<double> point =
      flatten_values(std::vector<const Tensor*>(coords.begin(), coords.end()));

  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.max_coords = 24;
  opts.seed = cfg.seed;
  GradCheckOutcome outcome;
  outcome.name = "encoder";
  outcome.coords = std::min<std::size_t>(opts.max_coords, point.size());
  outcome.tolerance = 1e-4;
  outcome.max_rel_gap = gradient_check(
      [&](const std::vector<double>& p) {
        assign_values(p, coords);
        return objective(nullptr)[0];
      },
      point, analytic, opts);
  assign_values(point, coords);
  outcome.pass = outcome.max_rel_gap <= outcome.tolerance;
  return outcome;
}

inline void run_gradcheck(const RunConfig& cfg, std::ostream& os) {
  const GradCheckOutcome merger = check_merger_gradients(cfg);
  const GradCheckOutcome encoder = check_encoder_gradients(cfg);
  OrderedJson checks = OrderedJson::array();
  for (const GradCheckOutcome* o : {&merger, &encoder}) {
    checks.push_back(OrderedJson{{"name", o->name},
                                 {"coords", o->coords},
                                 {"step", 1e-5},
                                 {"tolerance", o->tolerance},
                                 {"max_rel_gap", o->max_rel_gap},
                                 {"pass", o->pass}});
  }
  const bool pass = merger.pass && encoder.pass;
  const OrderedJson report{
      {"schema", kGradCheckSchema}, {"meta", to_json(make_meta(cfg))}, {"checks", std::move(checks)}, {"pass", pass}};
  emit_main(cfg, os, json_text(report));
  if (!pass) {
    throw ContractError("gradient check failed: worst relative gap " +
                        std::to_string(std::max(merger.max_rel_gap, encoder.max_rel_gap)));
  }
}

inline void run_train(const RunConfig& cfg, std::ostream& os) {
  EncoderParams params =
      init_encoder_params(cfg.enc, CompressionRatio(cfg.r), cfg.resolved_hidden_width(), cfg.seed);
  const TrainConfig tc{cfg.steps, cfg.lr, cfg.batch, cfg.seed};
  const TrainLog log = train_stage1(params, tc, cfg.enc, InsertionPoint{cfg.resolved_k()}, CompressionRatio(cfg.r),
                                    cfg.variant);
  std::string params_ref;
  if (!cfg.out.empty()) {
    const std::string params_path = path_stem(cfg.out) + ".params.json";
    write_file(params_path, json_text(params_json(log.final_pml, &log.final_projector)));
    params_ref = params_path;
  }
  if (cfg.format == ReportFormat::Json) {
    emit_main(cfg, os, json_text(train_log_json(make_meta(cfg), tc, log, params_ref)));
  } else {
    std::ostringstream csv;
    write_train_csv(csv, log);
    emit_main(cfg, os, csv.str());
  }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << "fraction,k,variant,ok,flops_total,tokens_out,median_s\n";
  for (const SweepPoint& pt : points) {
    os << csv_double(pt.fraction) << ',' << pt.k << ',' << pt.variant << ',' << (pt.ok ? 1 : 0) << ',';
    if (pt.ok) {
      os << pt.report.flops_total << ',' << pt.report.tokens_out << ','
         << (pt.report.latency ? csv_double(pt.report.latency->median_s) : "nan");
    } else {
      os << ",,";
    }
    os << '\n';
  }
}

inline void run_sweep(const RunConfig& cfg, std::ostream& os) {
  std::vector<SweepPoint> points = sweep(cfg.enc, cfg.fractions, CompressionRatio(cfg.r), {cfg.variant},
                                         cfg.resolved_hidden_width(), cfg.seed);
  if (cfg.sweep_bench) {
    // Timing shares one core on purpose; concurrent points would disturb it.
    for (SweepPoint& pt : points) {
      if (!pt.ok) continue;
      pt.report.latency = measure_latency(cfg.enc, InsertionPoint{pt.k}, CompressionRatio(cfg.r), cfg.variant,
                                          cfg.trials, cfg.warmup, cfg.seed, cfg.resolved_hidden_width());
    }
  }
  if (cfg.format == ReportFormat::Json) {
    emit_main(cfg, os, json_text(sweep_json(make_meta(cfg), points)));
  } else {
    std::ostringstream csv;
    write_sweep_csv(csv, points);
    emit_main(cfg, os, csv.str());
  }
  if (!cfg.out.empty()) {
    const std::string stem = path_stem(cfg.out);
    const std::size_t slash = stem.find_last_of("/\\");
    const std::string base = slash == std::string::npos ? stem : stem.substr(slash + 1);
    std::ostringstream dat;
    write_plot_data(dat, points);
    write_file(stem + ".dat", dat.str());
    std::ostringstream gp;
    write_plot_script(gp, base + ".dat", base + ".svg");
    write_file(stem + ".gp", gp.str());
  }
}

inline void dispatch(const RunConfig& cfg, std::ostream& os) {
  switch (cfg.mode) {
    case RunMode::Shapes: run_shapes(cfg, os); return;
    case RunMode::Flops: run_flops(cfg, os); return;
    case RunMode::Bench: run_bench(cfg, os); return;
    case RunMode::GradCheck: run_gradcheck(cfg, os); return;
    case RunMode::Train: run_train(cfg, os); return;
    case RunMode::Sweep: run_sweep(cfg, os); return;
  }
  throw ContractError("dispatch: unknown run mode");
}

}  // namespace detail

// Validates and executes one run. Exit codes: 0 success, 1 invalid
// configuration, 2 runtime assertion failure, 3 I/O failure.
inline int run_cli(const RunConfig& cfg, std::ostream& os, std::ostream& err) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  try {
    detail::dispatch(cfg, os);
    return 0;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace laco
