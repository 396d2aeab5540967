#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <oneapi/tbb/global_control.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>
#include <openssl/sha.h>

#include "json.hpp"

namespace qtherm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(const std::string& s) {
  const std::string t = trim(s);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return x;
}

std::optional<long> parse_long(const std::string& s) {
  const std::string t = trim(s);
  long x = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return x;
}

std::optional<bool> parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  return std::nullopt;
}

std::optional<std::vector<double>> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto x = parse_double(item);
    if (!x) return std::nullopt;
    out.push_back(*x);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::string describe_range(const ParamSpec& p) {
  std::ostringstream os;
  os << (p.min_open ? "(" : "[") << format_number(p.min) << ", " << format_number(p.max) << "]";
  return os.str();
}

bool in_range(const ParamSpec& p, double x) {
  if (!std::isfinite(x)) return false;
  return (p.min_open ? x > p.min : x >= p.min) && x <= p.max;
}

// Parses and range-checks one value; appends diagnostics on failure.
std::optional<Value> parse_value(const ParamSpec& p, const std::string& raw, std::vector<std::string>& diags) {
  const std::string where = "parameter '" + p.name + "'";
  switch (p.type) {
    case ParamType::Number: {
      auto x = parse_double(raw);
      if (!x) {
        diags.push_back(where + " expects a number, got '" + raw + "'");
        return std::nullopt;
      }
      if (!in_range(p, *x)) {
        diags.push_back(where + " = " + trim(raw) + " is outside the allowed range " + describe_range(p));
        return std::nullopt;
      }
      return Value(*x);
    }
    case ParamType::Integer: {
      auto x = parse_long(raw);
      if (!x) {
        diags.push_back(where + " expects an integer, got '" + raw + "'");
        return std::nullopt;
      }
      if (!in_range(p, static_cast<double>(*x))) {
        diags.push_back(where + " = " + trim(raw) + " is outside the allowed range " + describe_range(p));
        return std::nullopt;
      }
      return Value(*x);
    }
    case ParamType::Boolean: {
      auto x = parse_bool(raw);
      if (!x) {
        diags.push_back(where + " expects true or false, got '" + raw + "'");
        return std::nullopt;
      }
      return Value(*x);
    }
    case ParamType::Choice: {
      const std::string t = trim(raw);
      if (std::find(p.choices.begin(), p.choices.end(), t) == p.choices.end()) {
        std::string options;
        for (const auto& c : p.choices) options += (options.empty() ? "" : "|") + c;
        diags.push_back(where + " must be one of " + options + ", got '" + t + "'");
        return std::nullopt;
      }
      return Value(t);
    }
    case ParamType::List: {
      auto x = parse_list(raw);
      if (!x) {
        diags.push_back(where + " expects a comma-separated list of numbers, got '" + raw + "'");
        return std::nullopt;
      }
      for (double v : *x)
        if (!in_range(p, v)) {
          diags.push_back(where + " entry " + format_number(v) + " is outside the allowed range " + describe_range(p));
          return std::nullopt;
        }
      return Value(*x);
    }
  }
  return std::nullopt;
}

std::string canonical(const Value& v) {
  struct {
    std::string operator()(double x) const { return format_number(x); }
    std::string operator()(long x) const { return std::to_string(x); }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& x) const { return x; }
    std::string operator()(const std::vector<double>& x) const {
      std::string out;
      for (double e : x) out += (out.empty() ? "" : ",") + format_number(e);
      return out;
    }
  } visitor;
  return std::visit(visitor, v);
}

template <class T>
const T& get_as(const std::map<std::string, Value>& values, const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw std::logic_error("experiment reads undeclared parameter '" + key + "'");
  return std::get<T>(it->second);
}

std::string csv_cell(const Cell& c) {
  struct {
    std::string operator()(double x) const { return std::isnan(x) ? "" : format_number(x); }
    std::string operator()(long x) const { return std::to_string(x); }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& x) const {
      if (x.find_first_of(",\"\n") == std::string::npos) return x;
      std::string out = "\"";
      for (char ch : x) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return out + "\"";
    }
  } visitor;
  return std::visit(visitor, c);
}

}  // namespace

double Params::number(const std::string& key) const { return get_as<double>(values, key); }
long Params::integer(const std::string& key) const { return get_as<long>(values, key); }
bool Params::boolean(const std::string& key) const { return get_as<bool>(values, key); }
const std::string& Params::text(const std::string& key) const { return get_as<std::string>(values, key); }
const std::vector<double>& Params::list(const std::string& key) const {
  return get_as<std::vector<double>>(values, key);
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::logic_error("row length differs from the column count");
  rows.push_back(std::move(row));
}

const Experiment* find_experiment(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<double> Sweep::points() const {
  std::vector<double> out;
  if (steps == 1) return {from};
  for (long k = 0; k < steps; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(steps - 1);
    out.push_back(scale == SweepScale::Linear ? from + f * (to - from)
                                              : std::exp(std::log(from) + f * (std::log(to) - std::log(from))));
  }
  out.back() = to;
  return out;
}

RawConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("malformed config '" + path + "': " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RawConfig cfg;
  std::vector<std::string> unknown;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      const std::string value = trim(node.data());
      if (key == "experiment")
        cfg.experiment = value;
      else if (key == "seed")
        cfg.seed = value;
      else
        unknown.push_back("unknown top-level key '" + key + "'");
      continue;
    }
    std::map<std::string, std::string>* section = nullptr;
    if (key == "parameters")
      section = &cfg.parameters;
    else if (key == "sweep")
      section = &cfg.sweep;
    else if (key == "output")
      section = &cfg.output;
    else {
      unknown.push_back("unknown section [" + key + "]");
      continue;
    }
    for (const auto& [k, v] : node) (*section)[k] = trim(v.data());
  }
  if (!unknown.empty()) {
    ConfigError err("invalid config '" + path + "'");
    err.diagnostics = unknown;
    throw err;
  }
  return cfg;
}

void apply_override(RawConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq)), value = trim(assignment.substr(eq + 1));
  if (key.rfind("sweep.", 0) == 0)
    cfg.sweep[key.substr(6)] = value;
  else if (key.rfind("output.", 0) == 0)
    cfg.output[key.substr(7)] = value;
  else if (key == "seed")
    cfg.seed = value;
  else
    cfg.parameters[key] = value;
}

std::vector<std::string> validate(const RawConfig& raw, RunConfig* resolved) {
  std::vector<std::string> diags;
  RunConfig out;
  if (raw.experiment.empty()) {
    diags.push_back("no experiment given");
    return diags;
  }
  out.experiment = find_experiment(raw.experiment);
  if (!out.experiment) {
    diags.push_back("unknown experiment '" + raw.experiment + "'; see 'qtherm list'");
    return diags;
  }
  const Experiment& exp = *out.experiment;

  for (const auto& [key, value] : raw.parameters) {
    (void)value;
    auto it = std::find_if(exp.params.begin(), exp.params.end(), [&](const ParamSpec& p) { return p.name == key; });
    if (it == exp.params.end()) diags.push_back("unknown parameter '" + key + "' for experiment " + exp.name);
  }

  const bool has_sweep = !raw.sweep.empty();
  const std::string sweep_key = has_sweep && raw.sweep.count("key") ? raw.sweep.at("key") : "";
  for (const ParamSpec& p : exp.params) {
    auto it = raw.parameters.find(p.name);
    if (it != raw.parameters.end()) {
      if (auto v = parse_value(p, it->second, diags)) out.params.values[p.name] = *v;
    } else if (p.fallback) {
      if (auto v = parse_value(p, *p.fallback, diags)) out.params.values[p.name] = *v;
    } else if (p.name != sweep_key) {
      diags.push_back("missing required parameter '" + p.name + "' for experiment " + exp.name);
    }
  }

  if (has_sweep) {
    for (const auto& [key, value] : raw.sweep) {
      (void)value;
      if (key != "key" && key != "from" && key != "to" && key != "steps" && key != "scale")
        diags.push_back("unknown sweep field '" + key + "'");
    }
    Sweep s;
    s.key = sweep_key;
    auto spec = std::find_if(exp.params.begin(), exp.params.end(), [&](const ParamSpec& p) { return p.name == s.key; });
    if (s.key.empty())
      diags.push_back("sweep needs a key");
    else if (spec == exp.params.end())
      diags.push_back("sweep key '" + s.key + "' is not a parameter of experiment " + exp.name);
    else if (spec->type != ParamType::Number && spec->type != ParamType::Integer)
      diags.push_back("sweep key '" + s.key + "' is not a numeric parameter");
    auto bound = [&](const char* field, double& target) {
      auto it = raw.sweep.find(field);
      if (it == raw.sweep.end()) {
        diags.push_back(std::string("sweep needs '") + field + "'");
        return false;
      }
      auto x = parse_double(it->second);
      if (!x) {
        diags.push_back(std::string("sweep '") + field + "' expects a number, got '" + it->second + "'");
        return false;
      }
      target = *x;
      return true;
    };
    const bool have_from = bound("from", s.from), have_to = bound("to", s.to);
    if (auto it = raw.sweep.find("steps"); it != raw.sweep.end()) {
      auto n = parse_long(it->second);
      if (!n || *n < 1)
        diags.push_back("sweep 'steps' must be a positive integer, got '" + it->second + "'");
      else
        s.steps = *n;
    } else {
      diags.push_back("sweep needs 'steps'");
    }
    if (auto it = raw.sweep.find("scale"); it != raw.sweep.end()) {
      if (it->second == "log")
        s.scale = SweepScale::Log;
      else if (it->second != "linear")
        diags.push_back("sweep 'scale' must be linear or log, got '" + it->second + "'");
    }
    if (have_from && have_to && s.scale == SweepScale::Log && (s.from <= 0 || s.to <= 0))
      diags.push_back("log sweep bounds must be positive");
    if (spec != exp.params.end() && have_from && have_to &&
        (spec->type == ParamType::Number || spec->type == ParamType::Integer)) {
      for (double x : {s.from, s.to})
        if (!in_range(*spec, x))
          diags.push_back("sweep of '" + s.key + "' reaches " + format_number(x) + ", outside the allowed range " +
                          describe_range(*spec));
      if (spec->type == ParamType::Integer)
        for (double x : s.points())
          if (x != std::round(x)) {
            diags.push_back("sweep of integer parameter '" + s.key + "' hits non-integer value " + format_number(x));
            break;
          }
    }
    out.sweep = s;
  }

  for (const auto& [key, value] : raw.output) {
    if (key == "path")
      out.output_path = value;
    else if (key == "format") {
      if (value == "csv")
        out.format = OutputFormat::Csv;
      else if (value == "json")
        out.format = OutputFormat::Json;
      else
        diags.push_back("output format must be csv or json, got '" + value + "'");
    } else {
      diags.push_back("unknown output field '" + key + "'");
    }
  }

  if (raw.seed) {
    auto s = parse_long(*raw.seed);
    if (!s || *s < 0)
      diags.push_back("seed must be a non-negative integer, got '" + *raw.seed + "'");
    else
      out.seed = static_cast<std::uint64_t>(*s);
  }

  if (resolved && diags.empty()) *resolved = out;
  return diags;
}

std::string config_hash(const RunConfig& cfg) {
  std::ostringstream text;
  text << "experiment=" << cfg.experiment->name << "\n";
  for (const auto& [key, value] : cfg.params.values)
    if (!cfg.sweep || key != cfg.sweep->key) text << "param." << key << "=" << canonical(value) << "\n";
  if (cfg.sweep) {
    text << "sweep.key=" << cfg.sweep->key << "\nsweep.from=" << format_number(cfg.sweep->from)
         << "\nsweep.to=" << format_number(cfg.sweep->to) << "\nsweep.steps=" << cfg.sweep->steps
         << "\nsweep.scale=" << (cfg.sweep->scale == SweepScale::Log ? "log" : "linear") << "\n";
  }
  text << "seed=" << cfg.seed << "\n";
  const std::string s = text.str();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(s.data()), s.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

Result run(const RunConfig& cfg, int threads) {
  const auto start = std::chrono::steady_clock::now();
  Result result;
  result.hash = config_hash(cfg);
  if (!cfg.sweep) {
    result.table = cfg.experiment->run(cfg.params, cfg.seed);
  } else {
    const std::vector<double> points = cfg.sweep->points();
    const ParamSpec& spec = *std::find_if(cfg.experiment->params.begin(), cfg.experiment->params.end(),
                                          [&](const ParamSpec& p) { return p.name == cfg.sweep->key; });
    std::vector<Table> parts(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    auto one = [&](size_t k) {
      try {
        Params p = cfg.params;
        if (spec.type == ParamType::Integer)
          p.values[spec.name] = Value(std::lround(points[k]));
        else
          p.values[spec.name] = Value(points[k]);
        parts[k] = cfg.experiment->run(p, cfg.seed + k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    };
    // Lets --threads exceed the core count; oversubscription is the caller's choice.
    tbb::global_control limit(tbb::global_control::max_allowed_parallelism, static_cast<size_t>(std::max(1, threads)));
    tbb::task_arena arena(std::max(1, threads));
    arena.execute([&] {
      tbb::parallel_for(size_t{0}, points.size(), [&](size_t k) { one(k); });
    });
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    Table& t = result.table;
    const bool echo = std::find(parts[0].columns.begin(), parts[0].columns.end(), spec.name) == parts[0].columns.end();
    if (echo) t.columns.push_back(spec.name);
    t.columns.insert(t.columns.end(), parts[0].columns.begin(), parts[0].columns.end());
    for (size_t k = 0; k < points.size(); ++k) {
      if (parts[k].columns != parts[0].columns) throw std::logic_error("sweep points produced different columns");
      for (auto& row : parts[k].rows) {
        std::vector<Cell> full;
        if (echo) {
          if (spec.type == ParamType::Integer)
            full.push_back(Cell(std::lround(points[k])));
          else
            full.push_back(Cell(points[k]));
        }
        full.insert(full.end(), row.begin(), row.end());
        t.add(std::move(full));
      }
    }
  }
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, ptr);
}

std::string to_csv(const Result& r) {
  std::ostringstream os;
  os << "# qtherm " << kVersion << "\n# config_hash " << r.hash << "\n# wall_time_s " << format_number(r.wall_time)
     << "\n";
  for (size_t c = 0; c < r.table.columns.size(); ++c) os << (c ? "," : "") << r.table.columns[c];
  os << "\n";
  for (const auto& row : r.table.rows) {
    for (size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
    os << "\n";
  }
  return os.str();
}

std::string to_json(const Result& r) {
  nlohmann::ordered_json j;
  j["metadata"] = {{"toolkit_version", kVersion}, {"config_hash", r.hash}, {"wall_time_s", r.wall_time}};
  nlohmann::ordered_json columns = nlohmann::ordered_json::object();
  for (size_t c = 0; c < r.table.columns.size(); ++c) {
    nlohmann::ordered_json series = nlohmann::ordered_json::array();
    for (const auto& row : r.table.rows) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              if (std::isfinite(v))
                series.push_back(v);
              else
                series.push_back(nullptr);
            } else {
              series.push_back(v);
            }
          },
          row[c]);
    }
    columns[r.table.columns[c]] = series;
  }
  j["columns"] = columns;
  return j.dump(2) + "\n";
}

}  // namespace qtherm::cli
