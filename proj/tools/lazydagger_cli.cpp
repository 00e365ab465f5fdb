#include "lazydagger/lazydagger.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

// Exit codes: 0 success, 1 run-level failure, 2 configuration, 3 schema,
// 4 I/O, 5 supervisor unavailable, 64 usage.
int exit_code(ldg_status s) {
  switch (s) {
    case LDG_OK: return 0;
    case LDG_ERR_CONFIG: return 2;
    case LDG_ERR_SCHEMA: return 3;
    case LDG_ERR_IO: return 4;
    case LDG_ERR_SUPERVISOR_UNAVAILABLE: return 5;
    default: return 1;
  }
}

int report(ldg_status s) {
  std::cerr << "error (" << ldg_status_name(s) << "): " << ldg_last_error() << "\n";
  return exit_code(s);
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << "\n";
    return true;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text << "\n";
  return static_cast<bool>(out);
}

std::optional<std::vector<double>> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || v < 0.0) return std::nullopt;
      grid.push_back(v);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (grid.empty()) return std::nullopt;
  return grid;
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { ldg_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot-gated interactive imitation learning experiments"};
  app.set_version_flag("--version", std::string(ldg_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::string grid_text;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  double target = 0.2;
  std::string run_a;
  std::string run_b;

  auto* run = app.add_subcommand("run", "Pretrain and run every configured algorithm and seed");
  run->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  run->add_option("--seed", seed, "Run this single seed instead of the configured list");
  run->add_option("--out", out, "Output directory (overrides output_dir)");
  run->add_option("--latency-grid", grid_text, "Comma-separated latencies for burden columns");
  run->add_flag("--resume", resume, "Continue an interrupted run from its last checkpoints");

  auto* cmp = app.add_subcommand("compare", "Burden table and cutoff latency of two runs");
  cmp->add_option("run_a", run_a, "Candidate run directory")->required();
  cmp->add_option("run_b", run_b, "Baseline run directory")->required();
  cmp->add_option("--latency-grid", grid_text, "Comma-separated latencies");
  cmp->add_option("--out", out, "Write the comparison JSON here instead of stdout");

  auto* val = app.add_subcommand("validate", "Check a configuration and print it resolved");
  val->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  val->add_option("--out", out, "Write the resolved configuration here instead of stdout");

  auto* cal = app.add_subcommand("calibrate", "Pretrain and report the calibrated tau_sup");
  cal->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  cal->add_option("--seed", seed, "Seed for pretraining (default: first configured seed)");
  cal->add_option("--target", target, "Fraction of offline data to label unsafe")
      ->check(CLI::Range(0.0, 1.0));
  cal->add_option("--out", out, "Write the result JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  std::optional<std::vector<double>> grid;
  if (!grid_text.empty()) {
    grid = parse_grid(grid_text);
    if (!grid) {
      std::cerr << "error: --latency-grid expects comma-separated nonnegative numbers\n";
      return 64;
    }
  }

  if (cmp->parsed()) {
    const std::vector<double> g = grid.value_or(std::vector<double>{0, 1, 2, 5, 10});
    Owned result;
    const auto s = ldg_compare(run_a.c_str(), run_b.c_str(), g.data(), g.size(), &result.p);
    if (s != LDG_OK) return report(s);
    return write_output(out, result.str()) ? 0 : 4;
  }

  const auto text = read_file(config_path);
  if (!text) {
    std::cerr << "error (io): cannot read " << config_path << "\n";
    return 4;
  }

  if (val->parsed()) {
    Owned result;
    const auto s = ldg_validate_config(text->c_str(), &result.p);
    if (s != LDG_OK) return report(s);
    return write_output(out, result.str()) ? 0 : 4;
  }

  if (cal->parsed()) {
    std::uint64_t use_seed = 0;
    if (seed) {
      use_seed = *seed;
    } else {
      Owned resolved;
      const auto s = ldg_validate_config(text->c_str(), &resolved.p);
      if (s != LDG_OK) return report(s);
      use_seed = nlohmann::json::parse(resolved.str()).at("seeds").at(0).get<std::uint64_t>();
    }
    Owned result;
    const auto s = ldg_calibrate(text->c_str(), use_seed, target, &result.p);
    if (s != LDG_OK) return report(s);
    return write_output(out, result.str()) ? 0 : 4;
  }

  // run: command-line overrides are applied to the document before validation.
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(*text);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "error (config): (root): invalid JSON: " << e.what() << "\n";
    return 2;
  }
  if (!doc.is_object()) {
    std::cerr << "error (config): (root): expected a JSON object\n";
    return 2;
  }
  if (seed) doc["seeds"] = {*seed};
  if (grid) doc["latency_grid"] = *grid;
  Owned manifest;
  const auto s = ldg_run(doc.dump().c_str(), out.empty() ? nullptr : out.c_str(), resume ? 1 : 0,
                         &manifest.p);
  if (s != LDG_OK) return report(s);
  const auto m = nlohmann::json::parse(manifest.str());
  bool pure = true;
  for (const auto& r : m.at("runs")) pure = pure && r.at("test_purity").get<bool>();
  std::cout << manifest.str() << "\n";
  if (!pure) {
    std::cerr << "error: a test rollout recorded supervisor involvement\n";
    return 1;
  }
  return 0;
}
