#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "banker/harness.hpp"
#include "banker/verify.hpp"

namespace {

using banker::format_double;
using nlohmann::json;

// Sweep values are JSON literals when they parse, plain strings otherwise.
json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
  }
  return s;
}

void print_summary(const banker::ExperimentResult& result,
                   const banker::ExperimentConfig& config,
                   const std::filesystem::path& dir) {
  double investment = 0.0;
  double skips = 0.0;
  for (const auto& r : result.records) {
    investment += r.total_investment;
    skips += static_cast<double>(r.skip_count);
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, result.records.size()));
  std::cout << config.algorithm.name << "  runs=" << config.runs
            << "  T=" << config.algorithm.horizon
            << "  final_regret=" << format_double(result.curve.final_mean())
            << " +- " << format_double(result.curve.final_stderr())
            << "  mean_B_T=" << format_double(investment / n)
            << "  mean_skips=" << format_double(skips / n) << "  -> "
            << dir.string() << '\n';
}

int run_experiment(json doc, const std::filesystem::path& base_dir,
                   const std::filesystem::path& out_dir) {
  const banker::ExperimentConfig config = banker::parse_config(doc, base_dir);
  const banker::ExperimentResult result = banker::run_monte_carlo(config);
  banker::emit_outputs(result, config, out_dir);
  print_summary(result, config, out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed-feedback bandit experiments with Banker mirror descent"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  std::string out_dir;
  bool dump_actions = false;
  bool ledger_trace = false;

  auto* run = app.add_subcommand("run", "Run a Monte-Carlo experiment");
  run->add_option("-c,--config", config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override master_seed");
  auto* runs_opt =
      run->add_option("--runs", runs, "Override runs")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run->add_flag("--dump-actions", dump_actions, "Also write full x_t vectors");
  run->add_flag("--ledger-trace", ledger_trace, "Also write the ledger trace");

  std::string sweep_config;
  std::string param;
  std::vector<std::string> values;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per parameter value");
  sweep->add_option("-c,--config", sweep_config, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Dotted config path, e.g. algorithm.horizon")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out", sweep_out, "Parent output directory");

  std::string filter;
  bool list = false;
  std::string mutation;
  auto* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_option("--filter", filter, "Only properties whose name contains this");
  verify->add_flag("--list", list, "List property names and exit");
  verify->add_option("--mutation", mutation, "Inject a known defect (suite self-test)")
      ->check(CLI::IsMember({"spend-skipped", "drop-clamp"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      json doc = banker::read_json_file(config_path);
      if (*seed_opt) banker::set_json_path(doc, "master_seed", seed);
      if (*runs_opt) banker::set_json_path(doc, "runs", runs);
      if (dump_actions) banker::set_json_path(doc, "output.dump_actions", true);
      if (ledger_trace) banker::set_json_path(doc, "output.ledger_trace", true);
      if (!out_dir.empty()) banker::set_json_path(doc, "output.dir", out_dir);
      const std::filesystem::path base = std::filesystem::path(config_path).parent_path();
      const std::string dir =
          doc.contains("output") && doc["output"].contains("dir")
              ? doc["output"]["dir"].get<std::string>()
              : std::string("out");
      return run_experiment(std::move(doc), base, dir);
    }
    if (*sweep) {
      const json original = banker::read_json_file(sweep_config);
      const std::filesystem::path base =
          std::filesystem::path(sweep_config).parent_path();
      std::filesystem::path parent = sweep_out;
      if (parent.empty()) {
        parent = original.contains("output") && original["output"].contains("dir")
                     ? original["output"]["dir"].get<std::string>()
                     : std::string("out");
      }
      for (const std::string& v : values) {
        json doc = original;
        banker::set_json_path(doc, param, parse_value(v));
        run_experiment(std::move(doc), base, parent / sanitize(param + "=" + v));
      }
      return 0;
    }
    if (*verify) {
      if (list) {
        for (const std::string& n : banker::property_names()) std::cout << n << '\n';
        return 0;
      }
      banker::VerifyOptions options;
      options.filter = filter;
      options.spend_skipped_savings = mutation == "spend-skipped";
      options.drop_bolo_clamp = mutation == "drop-clamp";
      const auto results = banker::run_verify(options);
      return banker::write_report(results, std::cout) ? 0 : 1;
    }
  } catch (const banker::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const banker::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
