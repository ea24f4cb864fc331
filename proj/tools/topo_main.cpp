// Command-line front end: toponym corpus preparation, training, evaluation,
// post extraction, and benchmark scoring. All heavy lifting lives in the
// library; this file only maps flags onto the option structs.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "topo/cli.hpp"

namespace {

std::map<std::string, std::string> environment_snapshot() {
  std::map<std::string, std::string> env;
  for (const char* var : {"GEOCODER_URL", "GEOCODER_KEY", "GEOCODER_QPS"}) {
    if (const char* value = std::getenv(var); value != nullptr) {
      env[var] = value;
    }
  }
  return env;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toponym recognition and geocoding toolkit"};
  app.require_subcommand(1);

  // prepare ------------------------------------------------------------
  topo::PrepareOptions prepare;
  CLI::App* cmd_prepare = app.add_subcommand("prepare", "unify tagged corpora");
  cmd_prepare->add_option("--input", prepare.inputs,
                          "<scheme>:<path>; scheme is a builtin name or a JSON mapping file");
  cmd_prepare->add_option("--out-dir", prepare.out_dir, "output directory");
  cmd_prepare->add_flag("--merge", prepare.merge, "also write a merged corpus with provenance");

  // train --------------------------------------------------------------
  topo::TrainCli train;
  CLI::App* cmd_train = app.add_subcommand("train", "fine-tune a token classifier");
  cmd_train->add_option("--train", train.train_path, "unified two-column training file");
  cmd_train->add_option("--val", train.val_path, "unified two-column validation file");
  cmd_train->add_option("--out-dir", train.out_dir, "checkpoint output directory");
  cmd_train->add_option("--config", train.config_file, "JSON config file");
  cmd_train->add_option("--encoder", train.encoder, "base | large | miniature");
  cmd_train->add_option("--head", train.head, "linear | mlp | cnn1d");
  cmd_train->add_option("--encoder-checkpoint", train.encoder_checkpoint,
                        "pretrained encoder weight directory");
  cmd_train->add_option("--lr", train.lr, "learning rate");
  cmd_train->add_option("--batch-size", train.batch_size, "sentences per step");
  cmd_train->add_option("--max-epochs", train.max_epochs, "epoch cap");
  cmd_train->add_option("--patience", train.patience, "early-stopping patience");
  cmd_train->add_option("--max-len", train.max_len, "piece sequence length");
  cmd_train->add_option("--seed", train.seed, "rng seed");
  cmd_train->add_option("--mini-layers", train.mini_layers, "miniature encoder layers");
  cmd_train->add_option("--mini-hidden", train.mini_hidden, "miniature hidden size");
  cmd_train->add_option("--mini-heads", train.mini_heads, "miniature attention heads");

  // evaluate -----------------------------------------------------------
  topo::EvaluateOptions evaluate;
  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "score a checkpoint on a test set");
  cmd_evaluate->add_option("--checkpoint", evaluate.checkpoint_dir, "checkpoint directory");
  cmd_evaluate->add_option("--test", evaluate.test_path, "unified two-column test file");
  cmd_evaluate->add_option("--out", evaluate.out_path, "also write the report here");
  cmd_evaluate->add_option("--max-len", evaluate.max_len, "piece sequence length");
  cmd_evaluate->add_option("--batch-size", evaluate.batch_size, "sentences per batch");

  // extract ------------------------------------------------------------
  topo::ExtractCli extract;
  CLI::App* cmd_extract = app.add_subcommand("extract", "run the location pipeline on posts");
  cmd_extract->add_option("--input", extract.input_path, "NDJSON posts or plain text lines");
  cmd_extract->add_option("--checkpoint", extract.checkpoint_dir, "checkpoint directory");
  cmd_extract->add_option("--output", extract.output_path, "NDJSON output path (default stdout)");
  cmd_extract->add_option("--config", extract.config_file, "JSON config file");
  cmd_extract->add_flag("--no-geocode", extract.no_geocode, "skip geocoding entirely");
  cmd_extract->add_option("--mock-geocoder", extract.mock_geocoder,
                          "canned geocode table (wins over --geocoder-url)");
  cmd_extract->add_option("--geocoder-url", extract.geocoder_url, "HTTP geocoder endpoint");
  cmd_extract->add_option("--geocoder-key", extract.geocoder_key, "HTTP geocoder api key");
  cmd_extract->add_option("--geocoder-qps", extract.geocoder_qps, "request rate limit");
  cmd_extract->add_option("--cache", extract.cache_path, "geocode cache file");
  cmd_extract->add_option("--max-len", extract.max_len, "piece sequence length");
  cmd_extract->add_option("--batch-size", extract.batch_size, "window batch size");
  cmd_extract->add_option("--seed", extract.seed, "rng seed (echoed for provenance)");

  // benchmark ----------------------------------------------------------
  topo::BenchmarkOptions benchmark;
  CLI::App* cmd_benchmark = app.add_subcommand("benchmark", "score systems against gold");
  cmd_benchmark->add_option("--gold", benchmark.gold_path, "unified two-column gold file");
  cmd_benchmark->add_option("--pred", benchmark.systems, "<name>:<path> prediction file");
  cmd_benchmark->add_option("--mapping", benchmark.mapping_path,
                            "JSON label mapping applied to predictions");
  cmd_benchmark->add_option("--out", benchmark.out_path, "also write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  if (cmd_prepare->parsed()) {
    return topo::cmd_prepare(prepare, std::cout, std::cerr);
  }
  if (cmd_train->parsed()) {
    return topo::cmd_train(train, std::cout, std::cerr);
  }
  if (cmd_evaluate->parsed()) {
    return topo::cmd_evaluate(evaluate, std::cout, std::cerr);
  }
  if (cmd_extract->parsed()) {
    return topo::cmd_extract(extract, environment_snapshot(), std::cout, std::cerr);
  }
  return topo::cmd_benchmark(benchmark, std::cout, std::cerr);
}
