#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "qtherm/errors.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kModelError = 3;
constexpr int kInternalError = 4;

const char* kUnits =
    "Units: hbar = k_B = 1. Energies, frequencies and temperatures share one user-chosen energy unit; "
    "times are in its inverse.";

int report(const std::vector<std::string>& diags) {
  for (const auto& d : diags) std::cerr << "error: " << d << "\n";
  return kConfigError;
}

std::string type_name(const qtherm::cli::ParamSpec& p) {
  using qtherm::cli::ParamType;
  switch (p.type) {
    case ParamType::Number: return "number";
    case ParamType::Integer: return "integer";
    case ParamType::Boolean: return "bool";
    case ParamType::List: return "list";
    case ParamType::Choice: {
      std::string s;
      for (const auto& c : p.choices) s += (s.empty() ? "" : "|") + c;
      return s;
    }
  }
  return "";
}

void print_catalog() {
  for (const auto& e : qtherm::cli::catalog()) {
    std::cout << e.name << "  " << e.summary << "\n";
    for (const auto& p : e.params) {
      std::cout << "    " << p.name << " (" << type_name(p) << ")";
      if (p.fallback)
        std::cout << " = " << *p.fallback;
      else
        std::cout << " [required]";
      std::cout << "  " << p.help << "\n";
    }
  }
}

int thread_count(int requested) {
  if (const char* env = std::getenv("QTHERM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring QTHERM_THREADS='" << env << "'\n";
  }
  return requested > 0 ? requested : 1;
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = qtherm::cli;
  CLI::App app{"qtherm: quantum thermal machines, metrology and batteries"};
  app.footer(std::string(kUnits) +
             "\n\nUsage:\n  qtherm <experiment> [--config <path>] [--set key=value]... [--out <path>] "
             "[--format csv|json] [--threads N] [--seed S]\n  qtherm validate <path>\n  qtherm list\n\n"
             "Exit codes: 0 success, 2 config error, 3 numeric or model error, 4 internal invariant breach.");
  std::string command, path, config, out, format;
  std::vector<std::string> sets;
  int threads = 1;
  long long seed = -1;
  app.add_option("command", command, "experiment name, 'validate' or 'list'")->required();
  app.add_option("path", path, "config path for 'validate'");
  app.add_option("--config,-c", config, "config file");
  app.add_option("--set,-s", sets, "override key=value (sweep.x and output.x address those sections)");
  app.add_option("--out,-o", out, "output path (default stdout)");
  app.add_option("--format,-f", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads,-j", threads, "worker threads for sweeps (QTHERM_THREADS overrides)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (command == "list") {
    print_catalog();
    return kOk;
  }

  try {
    cli::RawConfig raw;
    if (command == "validate") {
      if (path.empty()) return report({"validate needs a config path"});
      raw = cli::read_config(path);
      auto diags = cli::validate(raw);
      if (!diags.empty()) {
        for (const auto& d : diags) std::cout << d << "\n";
        return kConfigError;
      }
      return kOk;
    }
    if (!path.empty()) return report({"unexpected argument '" + path + "'"});
    if (!config.empty()) raw = cli::read_config(config);
    if (!raw.experiment.empty() && raw.experiment != command)
      return report({"config is for experiment '" + raw.experiment + "' but '" + command + "' was requested"});
    raw.experiment = command;
    for (const auto& s : sets) cli::apply_override(raw, s);
    if (!out.empty()) raw.output["path"] = out;
    if (!format.empty()) raw.output["format"] = format;
    if (seed >= 0) raw.seed = std::to_string(seed);

    cli::RunConfig cfg;
    auto diags = cli::validate(raw, &cfg);
    if (!diags.empty()) return report(diags);

    cli::Result result = cli::run(cfg, thread_count(threads));
    const std::string text = cfg.format == cli::OutputFormat::Json ? cli::to_json(result) : cli::to_csv(result);
    if (cfg.output_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(cfg.output_path, std::ios::binary);
      if (!f) return report({"cannot write output file '" + cfg.output_path + "'"});
      f << text;
    }
    return kOk;
  } catch (const cli::ConfigError& e) {
    std::vector<std::string> diags{e.what()};
    diags.insert(diags.end(), e.diagnostics.begin(), e.diagnostics.end());
    return report(diags);
  } catch (const qtherm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == qtherm::ErrorKind::InvariantBreach ? kInternalError : kModelError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}
