#include "vqib/run_config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace vqib {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a finite number, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + value + "'");
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::istringstream in(value);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    out.push_back(static_cast<int>(parse_int(key, trim(piece))));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValues parse_config_text(std::istream& in, const std::string& source_name) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ": line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source_name + ": line " + std::to_string(line_no) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

KeyValues load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config_text(in, path);
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      throw ConfigError("expected --key value, got '" + arg + "'");
    }
    if (i + 1 == args.size()) {
      throw ConfigError("missing value for override '" + arg + "'");
    }
    kv[arg.substr(2)] = args[++i];
  }
}

RunConfig run_config_from_kv(const KeyValues& kv) {
  RunConfig cfg;
  bool gen_requested = false, gen_seed_given = false;

  for (const auto& [key, value] : kv) {
    if (key == "seed") {
      cfg.train.seed = parse_u64(key, value);
    } else if (key == "batch_size") {
      cfg.train.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "steps") {
      cfg.train.steps = static_cast<int>(parse_int(key, value));
    } else if (key == "learning_rate") {
      cfg.train.learning_rate = parse_double(key, value);
    } else if (key == "K") {
      cfg.train.n_codes = static_cast<int>(parse_int(key, value));
    } else if (key == "code_dim") {
      cfg.train.code_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "beta") {
      cfg.train.beta = parse_double(key, value);
    } else if (key == "lambda_reg") {
      cfg.train.lambda_reg = parse_double(key, value);
    } else if (key == "mode") {
      try {
        cfg.train.mode = train_mode_from_string(value);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "regularizer_kind") {
      try {
        cfg.train.regularizer_kind = regularizer_kind_from_string(value);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "r_kind") {
      try {
        cfg.train.r_kind = marginal_kind_from_string(value);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "em_every") {
      cfg.train.em_every = static_cast<int>(parse_int(key, value));
    } else if (key == "hidden") {
      cfg.train.hidden = parse_int_list(key, value);
    } else if (key == "data") {
      cfg.data_path = value;
    } else if (key == "gen") {
      if (value != "gaussian_mixture") {
        throw ConfigError("key 'gen': unknown generator '" + value + "'");
      }
      gen_requested = true;
    } else if (key == "gen_seed") {
      cfg.gen_seed = parse_u64(key, value);
      gen_seed_given = true;
    } else if (key == "components") {
      cfg.components = static_cast<int>(parse_int(key, value));
    } else if (key == "dim") {
      cfg.data_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "n") {
      cfg.n = static_cast<int>(parse_int(key, value));
    } else if (key == "spread") {
      cfg.spread = parse_double(key, value);
    } else if (key == "noise_sigma") {
      cfg.noise_sigma = parse_double(key, value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "log_every") {
      cfg.log_every = static_cast<int>(parse_int(key, value));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  cfg.use_generator = gen_requested;
  if (!gen_seed_given) cfg.gen_seed = cfg.train.seed;
  if (cfg.data_path.empty() && !cfg.use_generator) {
    throw ConfigError("no data source: set 'data = <csv>' or 'gen = gaussian_mixture'");
  }
  if (!cfg.data_path.empty() && cfg.use_generator) {
    throw ConfigError("both 'data' and 'gen' given; exactly one data source is required");
  }
  if (cfg.log_every < 1) throw ConfigError("log_every must be >= 1");
  try {
    cfg.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

Dataset make_dataset(const RunConfig& cfg) {
  if (!cfg.data_path.empty()) {
    try {
      return load_csv(cfg.data_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    return gaussian_mixture(cfg.gen_seed, cfg.components, cfg.data_dim, cfg.n, cfg.spread,
                            cfg.noise_sigma);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string run_config_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(cfg.train.seed);
  kv["batch_size"] = std::to_string(cfg.train.batch_size);
  kv["steps"] = std::to_string(cfg.train.steps);
  kv["learning_rate"] = format_double(cfg.train.learning_rate);
  kv["K"] = std::to_string(cfg.train.n_codes);
  kv["code_dim"] = std::to_string(cfg.train.code_dim);
  kv["beta"] = format_double(cfg.train.beta);
  kv["lambda_reg"] = format_double(cfg.train.lambda_reg);
  kv["mode"] = to_string(cfg.train.mode);
  kv["regularizer_kind"] = to_string(cfg.train.regularizer_kind);
  kv["r_kind"] = to_string(cfg.train.r_kind);
  kv["em_every"] = std::to_string(cfg.train.em_every);
  {
    std::string h;
    for (size_t i = 0; i < cfg.train.hidden.size(); ++i) {
      h += (i ? "," : "") + std::to_string(cfg.train.hidden[i]);
    }
    kv["hidden"] = h;
  }
  if (!cfg.data_path.empty()) {
    kv["data"] = cfg.data_path;
  } else {
    kv["gen"] = "gaussian_mixture";
    kv["gen_seed"] = std::to_string(cfg.gen_seed);
    kv["components"] = std::to_string(cfg.components);
    kv["dim"] = std::to_string(cfg.data_dim);
    kv["n"] = std::to_string(cfg.n);
    kv["spread"] = format_double(cfg.spread);
    kv["noise_sigma"] = format_double(cfg.noise_sigma);
  }
  kv["out"] = cfg.out_dir;
  kv["log_every"] = std::to_string(cfg.log_every);

  std::string out;
  for (const auto& [key, value] : kv) {
    out += key + " = " + value + "\n";
  }
  return out;
}

}  // namespace vqib
