#ifndef VQIB_RUN_CONFIG_HPP
#define VQIB_RUN_CONFIG_HPP

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqib/data_synth.hpp"
#include "vqib/model.hpp"

namespace vqib {

// Anything wrong with a config file, an override or a key's value.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" lines, '#' starts a comment, blank lines ignored.
KeyValues parse_config_text(std::istream& in, const std::string& source_name);
KeyValues load_config_file(const std::string& path);

// Command-line "--key value" pairs; later values win over earlier ones.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& args);

// Full run description: a TrainConfig plus exactly one data source,
// the output directory and the logging stride.
struct RunConfig {
  TrainConfig train;
  std::string data_path;       // CSV file; mutually exclusive with generator
  bool use_generator = false;  // gen = gaussian_mixture
  std::uint64_t gen_seed = 0;
  int components = 8;
  int data_dim = 2;
  int n = 1024;
  double spread = 2.0;
  double noise_sigma = 0.15;
  std::string out_dir = ".";
  int log_every = 1;
};

RunConfig run_config_from_kv(const KeyValues& kv);
Dataset make_dataset(const RunConfig& cfg);
// Sorted "key = value" lines covering every effective setting.
std::string run_config_echo(const RunConfig& cfg);

}  // namespace vqib

#endif
