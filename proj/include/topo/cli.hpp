#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topo/trainer.hpp"

namespace topo {

// Every command resolves its knobs with precedence: explicit flag >
// environment variable > config file > built-in default, echoes the
// resolved configuration as JSON to the error stream (so a run can be
// replayed), and returns 0 iff no errors. Warnings never change the exit
// code.

struct PrepareOptions {
  std::vector<std::string> inputs;  // "<scheme>:<path>"; scheme is a builtin name or a JSON file
  std::string out_dir;
  bool merge = false;
};

struct TrainOptions {
  std::string train_path;
  std::string val_path;
  std::string out_dir;
  std::string encoder = "miniature";
  std::string head = "linear";
  std::string encoder_checkpoint;  // required for the pretrained variants
  int mini_layers = 2;
  int mini_hidden = 64;
  int mini_heads = 4;
  TrainConfig train;
};

/// Raw train command line; empty optionals mean "flag not given".
struct TrainCli {
  std::string train_path;
  std::string val_path;
  std::string out_dir;
  std::optional<std::string> config_file;
  std::optional<std::string> encoder;
  std::optional<std::string> head;
  std::optional<std::string> encoder_checkpoint;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<int> max_len;
  std::optional<std::uint64_t> seed;
  std::optional<int> mini_layers;
  std::optional<int> mini_hidden;
  std::optional<int> mini_heads;
};

TrainOptions resolve_train_options(const TrainCli& cli, nlohmann::ordered_json* echo = nullptr);

struct EvaluateOptions {
  std::string checkpoint_dir;
  std::string test_path;
  std::string out_path;  // optional report copy
  int max_len = kDefaultMaxLen;
  int batch_size = 32;
};

struct ExtractOptions {
  std::string input_path;
  std::string checkpoint_dir;
  std::string output_path;
  bool no_geocode = false;
  std::string mock_geocoder;  // JSON map file; wins over the HTTP endpoint
  std::string geocoder_url;
  std::string geocoder_key;
  double geocoder_qps = 1.0;
  std::string cache_path;
  int max_len = kDefaultMaxLen;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// Raw extract command line plus the environment snapshot (GEOCODER_URL,
/// GEOCODER_KEY, GEOCODER_QPS) so resolution stays a pure function.
struct ExtractCli {
  std::string input_path;
  std::string checkpoint_dir;
  std::string output_path;
  std::optional<std::string> config_file;
  std::optional<bool> no_geocode;
  std::optional<std::string> mock_geocoder;
  std::optional<std::string> geocoder_url;
  std::optional<std::string> geocoder_key;
  std::optional<double> geocoder_qps;
  std::optional<std::string> cache_path;
  std::optional<int> max_len;
  std::optional<int> batch_size;
  std::optional<std::uint64_t> seed;
};

ExtractOptions resolve_extract_options(const ExtractCli& cli,
                                       const std::map<std::string, std::string>& env,
                                       nlohmann::ordered_json* echo = nullptr);

struct BenchmarkOptions {
  std::string gold_path;
  std::vector<std::string> systems;  // "<name>:<path>" two-column prediction files
  std::string mapping_path;          // optional scheme JSON applied before scoring
  std::string out_path;              // optional JSON copy
};

int cmd_prepare(const PrepareOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const TrainCli& cli, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);
int cmd_extract(const ExtractCli& cli, const std::map<std::string, std::string>& env,
                std::ostream& out, std::ostream& err);
int cmd_benchmark(const BenchmarkOptions& options, std::ostream& out, std::ostream& err);

}  // namespace topo
