#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "laco/laco.hpp"

namespace {

// Splits "1/12,0.25,1" into fraction values.
std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (piece.empty()) throw laco::ConfigError("cannot parse fractions list '" + text + "'");
    out.push_back(laco::parse_fraction(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"token compression workbench: merge layer, cost model and training probes for a toy encoder"};
  app.require_subcommand(0, 1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its keys");

  std::size_t layers = 12, width = 64, heads = 4, mlp_width = 256, patch = 4, image_edge = 64;
  std::size_t r = 2, hidden_width = 0, k = 0;
  std::string fraction_text, variant = "pml_residual", out_path, format = "json", fractions_text;
  std::uint64_t seed = 0;
  std::size_t trials = 7, warmup = 2, steps = 200, batch = 4;
  double lr = 0.03;
  bool sweep_bench = false;

  auto* opt_layers = app.add_option("--L", layers, "encoder depth")->capture_default_str();
  auto* opt_width = app.add_option("--d", width, "token width")->capture_default_str();
  auto* opt_heads = app.add_option("--heads", heads, "attention heads")->capture_default_str();
  auto* opt_mlp = app.add_option("--mlp_width", mlp_width, "block MLP hidden width")->capture_default_str();
  auto* opt_patch = app.add_option("--patch", patch, "patch edge in pixels")->capture_default_str();
  auto* opt_edge = app.add_option("--image_edge", image_edge, "image edge in pixels")->capture_default_str();
  auto* opt_r = app.add_option("--r", r, "compression ratio per grid axis")->capture_default_str();
  auto* opt_hidden = app.add_option("--hidden_width", hidden_width, "merger hidden width (0 = r^2 * d)")
                         ->capture_default_str();
  auto* opt_k = app.add_option("--k", k, "absolute insertion layer (after block k; 0 = before block 1)");
  auto* opt_fraction = app.add_option("--fraction", fraction_text, "insertion depth fraction, e.g. 0.25 or 1/4");
  auto* opt_variant =
      app.add_option("--variant", variant, "pml_residual | pml_only | residual_only | avg_pool | external")
          ->capture_default_str();
  auto* opt_seed = app.add_option("--seed", seed, "RNG seed")->capture_default_str();
  auto* opt_out = app.add_option("--out", out_path, "output path (empty = stdout)");
  auto* opt_format = app.add_option("--format", format, "json | csv")->capture_default_str();
  auto* opt_trials = app.add_option("--trials", trials, "timed runs per latency measurement")->capture_default_str();
  auto* opt_warmup = app.add_option("--warmup", warmup, "untimed runs before timing")->capture_default_str();
  auto* opt_steps = app.add_option("--steps", steps, "training steps")->capture_default_str();
  auto* opt_lr = app.add_option("--lr", lr, "learning rate")->capture_default_str();
  auto* opt_batch = app.add_option("--batch", batch, "synthetic batch size")->capture_default_str();
  auto* opt_fractions =
      app.add_option("--fractions", fractions_text, "comma-separated sweep fractions, e.g. 1/12,1/6,1/4,1/2,1");
  auto* opt_bench = app.add_flag("--bench", sweep_bench, "also measure latency at each sweep point");

  // The mode subcommands carry no options of their own; flags placed after
  // them must fall through to the main app.
  app.add_subcommand("shapes", "print the per-layer token counts")->fallthrough();
  app.add_subcommand("flops", "per-layer FLOP table for one insertion choice")->fallthrough();
  app.add_subcommand("bench", "FLOP table plus measured forward latency")->fallthrough();
  app.add_subcommand("gradcheck", "verify analytic gradients against finite differences")->fallthrough();
  app.add_subcommand("train", "fit merger and projector to pooled stem targets")->fallthrough();
  app.add_subcommand("sweep", "FLOP estimates across insertion fractions")->fallthrough();

  CLI11_PARSE(app, argc, argv);

  laco::OrderedJson overrides = laco::OrderedJson::object();
  try {
    if (opt_layers->count() > 0) overrides["L"] = layers;
    if (opt_width->count() > 0) overrides["d"] = width;
    if (opt_heads->count() > 0) overrides["heads"] = heads;
    if (opt_mlp->count() > 0) overrides["mlp_width"] = mlp_width;
    if (opt_patch->count() > 0) overrides["patch"] = patch;
    if (opt_edge->count() > 0) overrides["image_edge"] = image_edge;
    if (opt_r->count() > 0) overrides["r"] = r;
    if (opt_hidden->count() > 0) overrides["hidden_width"] = hidden_width;
    if (opt_k->count() > 0) overrides["k"] = k;
    if (opt_fraction->count() > 0) overrides["fraction"] = laco::parse_fraction(fraction_text);
    if (opt_variant->count() > 0) overrides["variant"] = variant;
    if (opt_seed->count() > 0) overrides["seed"] = seed;
    if (opt_out->count() > 0) overrides["out"] = out_path;
    if (opt_format->count() > 0) overrides["format"] = format;
    if (opt_trials->count() > 0) overrides["trials"] = trials;
    if (opt_warmup->count() > 0) overrides["warmup"] = warmup;
    if (opt_steps->count() > 0) overrides["steps"] = steps;
    if (opt_lr->count() > 0) overrides["lr"] = lr;
    if (opt_batch->count() > 0) overrides["batch"] = batch;
    if (opt_fractions->count() > 0) overrides["fractions"] = parse_fraction_list(fractions_text);
    if (opt_bench->count() > 0) overrides["bench"] = sweep_bench;
    for (const CLI::App* sub : app.get_subcommands()) overrides["mode"] = sub->get_name();

    const laco::RunConfig cfg = laco::load_run_config(config_path, overrides);
    return laco::run_cli(cfg, std::cout, std::cerr);
  } catch (const laco::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
