// vqib command line: train models, verify the discrete bounds, compare the
// hard and soft training regimes, and evaluate checkpoints.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vqib/ib_oracle.hpp"
#include "vqib/model.hpp"
#include "vqib/run_config.hpp"

namespace fs = std::filesystem;
using namespace vqib;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitBoundViolation = 4;

const char* kUsage = R"(usage: vqib <command> [--config <file>] [--key <value> ...]

commands:
  train          train one model; writes metrics.csv, checkpoint.txt,
                 config_echo.txt to the output directory
  compare        train hard_vqvae and soft_em on identical seed/data and
                 write compare.csv with both traces and a summary line
  verify-bounds  randomized sweep over the discrete bound and identity
                 checks; writes bounds.csv (--n, --seed, --out;
                 --corrupt-gap 1 is a failure-injection test hook)
  eval           evaluate a checkpoint on a dataset (--checkpoint, plus a
                 data source); writes eval.csv

config files hold flat `key = value` lines with '#' comments; any key can
be overridden on the command line as --key value. Entropies are reported
in nats. Exit codes: 0 ok, 2 config/usage error, 3 training divergence,
4 bound violation.
)";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

KeyValues gather_config(const std::vector<std::string>& args) {
  std::vector<std::string> overrides;
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw ConfigError("missing value for --config");
      config_path = args[++i];
    } else {
      overrides.push_back(args[i]);
    }
  }
  KeyValues kv;
  if (!config_path.empty()) kv = load_config_file(config_path);
  apply_overrides(kv, overrides);
  return kv;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_metrics_csv(const std::string& path, const MetricsTrace& trace, int log_every,
                       bool with_mode_column = false, const std::string& mode = "",
                       bool append = false) {
  std::ofstream out(path, append ? std::ios::binary | std::ios::app : std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  if (!append) {
    out << (with_mode_column ? "mode," : "")
        << "step,recon,commitment,codebook,regularizer,total,perplexity,cond_entropy\n";
  }
  for (const auto& rec : trace) {
    if (rec.step % log_every != 0) continue;
    if (with_mode_column) out << mode << ',';
    out << rec.step << ',' << format_double(rec.recon) << ',' << format_double(rec.commitment)
        << ',' << format_double(rec.codebook) << ',' << format_double(rec.regularizer) << ','
        << format_double(rec.total) << ',' << format_double(rec.perplexity) << ','
        << format_double(rec.cond_entropy) << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path);
}

int cmd_train(const std::vector<std::string>& args) {
  RunConfig cfg = run_config_from_kv(gather_config(args));
  ensure_out_dir(cfg.out_dir);
  Dataset data = make_dataset(cfg);

  {
    std::ofstream echo(fs::path(cfg.out_dir) / "config_echo.txt", std::ios::binary);
    if (!echo) throw ConfigError("cannot write config_echo.txt in " + cfg.out_dir);
    echo << run_config_echo(cfg);
  }

  TrainResult result = train(cfg.train, data);
  write_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string(), result.trace,
                    cfg.log_every);
  {
    std::ofstream ck(fs::path(cfg.out_dir) / "checkpoint.txt", std::ios::binary);
    if (!ck) throw ConfigError("cannot write checkpoint.txt in " + cfg.out_dir);
    save_checkpoint(ck, cfg.train, result.encoder, result.codebook, result.decoder);
  }

  if (result.diverged) {
    std::cerr << "training diverged: " << result.abort_reason << "\n";
    return kExitDiverged;
  }
  if (!result.trace.empty()) {
    const auto& last = result.trace.back();
    std::cout << "step " << last.step << " total " << last.total << " recon " << last.recon
              << " perplexity " << last.perplexity << " cond_entropy " << last.cond_entropy
              << "\n";
  }
  std::cout << "wrote " << cfg.out_dir << "/metrics.csv, checkpoint.txt, config_echo.txt\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& args) {
  KeyValues kv = gather_config(args);
  if (kv.count("mode") || kv.count("regularizer_kind")) {
    throw ConfigError(
        "compare trains both modes itself; remove 'mode'/'regularizer_kind' from the config");
  }
  // Pairings per regime: hard_vqvae/none and soft_em/vib_kl.
  RunConfig cfg = run_config_from_kv(kv);
  ensure_out_dir(cfg.out_dir);
  Dataset data = make_dataset(cfg);

  TrainConfig hard_cfg = cfg.train;
  hard_cfg.mode = TrainMode::hard_vqvae;
  hard_cfg.regularizer_kind = RegularizerKind::none;
  TrainConfig soft_cfg = cfg.train;
  soft_cfg.mode = TrainMode::soft_em;
  soft_cfg.regularizer_kind = RegularizerKind::vib_kl;

  TrainResult hard = train(hard_cfg, data);
  TrainResult soft = train(soft_cfg, data);

  std::string path = (fs::path(cfg.out_dir) / "compare.csv").string();
  write_metrics_csv(path, hard.trace, cfg.log_every, true, to_string(hard_cfg.mode));
  write_metrics_csv(path, soft.trace, cfg.log_every, true, to_string(soft_cfg.mode), true);

  std::string summary = "# summary unavailable (no recorded steps)";
  if (!hard.trace.empty() && !soft.trace.empty()) {
    summary = "# summary hard_perplexity=" + format_double(hard.trace.back().perplexity) +
              " hard_cond_entropy=" + format_double(hard.trace.back().cond_entropy) +
              " soft_perplexity=" + format_double(soft.trace.back().perplexity) +
              " soft_cond_entropy=" + format_double(soft.trace.back().cond_entropy);
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << summary << '\n';
  }
  std::cout << summary << "\n";

  if (hard.diverged || soft.diverged) {
    std::cerr << "training diverged: "
              << (hard.diverged ? hard.abort_reason : soft.abort_reason) << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_verify_bounds(const std::vector<std::string>& args) {
  KeyValues kv;
  apply_overrides(kv, args);
  auto strict_int = [](const std::string& key, const std::string& value) {
    try {
      size_t used = 0;
      long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("verify-bounds: key '" + key + "': expected an integer, got '" +
                        value + "'");
    }
  };
  int n = 1000;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool corrupt = false;
  for (const auto& [key, value] : kv) {
    if (key == "n") {
      n = static_cast<int>(strict_int(key, value));
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(strict_int(key, value));
    } else if (key == "out") {
      out_dir = value;
    } else if (key == "corrupt-gap") {
      corrupt = value != "0";
    } else {
      throw ConfigError("verify-bounds: unknown key '" + key + "'");
    }
  }
  if (n < 1) throw ConfigError("verify-bounds: --n must be >= 1");
  ensure_out_dir(out_dir);

  std::vector<BoundSweepRow> rows = bound_sweep(n, seed);
  if (corrupt && !rows.empty()) rows.front().gap = -1.0;  // failure-injection hook

  std::ofstream out(fs::path(out_dir) / "bounds.csv", std::ios::binary);
  if (!out) throw ConfigError("cannot write bounds.csv in " + out_dir);
  out << "instance_seed,bound_name,gap\n";
  for (const auto& row : rows) {
    out << row.instance_seed << ',' << row.bound_name << ',' << format_double(row.gap) << '\n';
  }

  bool ok = bound_sweep_passes(rows);
  std::cout << "verify-bounds: " << n << " instances, " << rows.size() << " checks, "
            << (ok ? "all within tolerance" : "VIOLATION found") << "\n";
  return ok ? kExitOk : kExitBoundViolation;
}

int cmd_eval(const std::vector<std::string>& args) {
  KeyValues kv = gather_config(args);
  auto ck_it = kv.find("checkpoint");
  if (ck_it == kv.end()) throw ConfigError("eval: missing --checkpoint <path>");
  std::string ck_path = ck_it->second;
  kv.erase(ck_it);

  std::ifstream ck_in(ck_path);
  if (!ck_in) throw ConfigError("cannot open checkpoint: " + ck_path);
  Checkpoint ck;
  try {
    ck = load_checkpoint(ck_in);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  // The checkpoint header supplies the model/loss settings; the command
  // line supplies the data source and output directory.
  KeyValues data_kv = kv;
  data_kv["mode"] = to_string(ck.config.mode);
  data_kv["regularizer_kind"] = to_string(ck.config.regularizer_kind);
  RunConfig cfg = run_config_from_kv(data_kv);
  cfg.train = ck.config;
  ensure_out_dir(cfg.out_dir);
  Dataset data = make_dataset(cfg);
  if (data.dim != ck.encoder.widths().front()) {
    throw ConfigError("eval: dataset dimension does not match the checkpoint encoder");
  }

  Tensor x = Tensor::constant({data.n, data.dim}, data.rows);
  StepLoss loss = ck.config.mode == TrainMode::hard_vqvae
                      ? hard_step_loss(x, ck.encoder, ck.codebook, ck.decoder, ck.config)
                      : soft_step_loss(x, ck.encoder, ck.codebook, ck.decoder, ck.config);

  std::ofstream out(fs::path(cfg.out_dir) / "eval.csv", std::ios::binary);
  if (!out) throw ConfigError("cannot write eval.csv in " + cfg.out_dir);
  out << "recon,commitment,codebook,regularizer,total,perplexity,cond_entropy\n";
  out << format_double(loss.breakdown.reconstruction) << ','
      << format_double(loss.breakdown.commitment) << ','
      << format_double(loss.breakdown.codebook) << ','
      << format_double(loss.breakdown.regularizer) << ','
      << format_double(loss.breakdown.total) << ','
      << format_double(perplexity(loss.assignment)) << ','
      << format_double(conditional_entropy(loss.assignment)) << '\n';

  std::cout << "eval: n=" << data.n << " total=" << loss.breakdown.total
            << " recon=" << loss.breakdown.reconstruction
            << " perplexity=" << perplexity(loss.assignment)
            << " cond_entropy=" << conditional_entropy(loss.assignment) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    std::cout << kUsage;
    return args.empty() ? kExitConfig : kExitOk;
  }
  std::string command = args[0];
  args.erase(args.begin());
  try {
    if (command == "train") return cmd_train(args);
    if (command == "compare") return cmd_compare(args);
    if (command == "verify-bounds") return cmd_verify_bounds(args);
    if (command == "eval") return cmd_eval(args);
    std::cerr << "unknown command '" << command << "'\n" << kUsage;
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
