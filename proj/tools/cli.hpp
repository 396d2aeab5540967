#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qtherm::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class ParamType { Number, Integer, Boolean, Choice, List };

using Value = std::variant<double, long, bool, std::string, std::vector<double>>;

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::Number;
  std::optional<std::string> fallback;  // empty means required
  double min = -1e300;
  double max = 1e300;
  bool min_open = false;  // strict lower bound
  std::vector<std::string> choices;
  std::string help;
};

class Params {
 public:
  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const std::vector<double>& list(const std::string& key) const;

  std::map<std::string, Value> values;
};

using Cell = std::variant<double, long, bool, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

struct Experiment {
  std::string name;
  std::string summary;
  std::vector<ParamSpec> params;
  std::function<Table(const Params&, std::uint64_t seed)> run;
};

const std::vector<Experiment>& catalog();
const Experiment* find_experiment(const std::string& name);

enum class SweepScale { Linear, Log };

struct Sweep {
  std::string key;
  double from = 0.0;
  double to = 0.0;
  long steps = 1;
  SweepScale scale = SweepScale::Linear;

  std::vector<double> points() const;
};

enum class OutputFormat { Csv, Json };

// Raw configuration as read from file and command line; strings until validated.
struct RawConfig {
  std::string experiment;
  std::map<std::string, std::string> parameters;
  std::map<std::string, std::string> sweep;
  std::map<std::string, std::string> output;
  std::optional<std::string> seed;
};

// Reads the key = value file with [parameters], [sweep] and [output] sections.
// Throws ConfigError when the file cannot be read or parsed.
RawConfig read_config(const std::string& path);

// Applies "key=value" overrides; "sweep.x" and "output.x" address those sections.
void apply_override(RawConfig& cfg, const std::string& assignment);

struct RunConfig {
  const Experiment* experiment = nullptr;
  Params params;
  std::optional<Sweep> sweep;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  std::uint64_t seed = 0;
};

// Full static validation; an empty diagnostics list means runnable.
std::vector<std::string> validate(const RawConfig& raw, RunConfig* resolved = nullptr);

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
  std::vector<std::string> diagnostics;
};

// Hex SHA-256 of the resolved experiment, parameters, sweep and seed.
std::string config_hash(const RunConfig& cfg);

struct Result {
  Table table;
  std::string hash;
  double wall_time = 0.0;
};

// Runs every sweep point on a pool of `threads` workers; rows keep sweep order.
Result run(const RunConfig& cfg, int threads);

std::string format_number(double x);
std::string to_csv(const Result& r);
std::string to_json(const Result& r);

}  // namespace qtherm::cli
