#include "topo/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>

#include "topo/classifier.hpp"
#include "topo/corpus.hpp"
#include "topo/geocoder.hpp"
#include "topo/metrics.hpp"
#include "topo/output.hpp"
#include "topo/pipeline.hpp"

namespace topo {

namespace {

namespace fs = std::filesystem;

std::pair<std::string, std::string> split_name_path(const std::string& pair_arg,
                                                    const char* flag) {
  const std::size_t colon = pair_arg.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == pair_arg.size()) {
    throw Error(std::string(flag) + " expects <name>:<path>, got \"" + pair_arg + "\"");
  }
  return {pair_arg.substr(0, colon), pair_arg.substr(colon + 1)};
}

/// Two-column token/label file whose labels must already be unified.
Corpus load_unified_corpus(const std::string& path, const std::string& name) {
  const Corpus raw = parse_conll(read_text_file(path), 0, 1, name);
  return unify_labels(raw, builtin_scheme("unified"));
}

void echo_value(nlohmann::ordered_json& echo, const std::string& key, nlohmann::json value,
                const char* source) {
  nlohmann::ordered_json entry;
  entry["value"] = std::move(value);
  entry["source"] = source;
  echo[key] = std::move(entry);
}

nlohmann::json load_config_object(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw Error("config file " + path + " must hold a JSON object");
  }
  return j;
}

int run_guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

int cmd_prepare(const PrepareOptions& options, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    if (options.inputs.empty()) {
      throw Error("prepare: at least one --input <scheme>:<path> is required");
    }
    if (options.out_dir.empty()) {
      throw Error("prepare: --out-dir is required");
    }
    nlohmann::ordered_json echo;
    echo["command"] = "prepare";
    echo_value(echo, "inputs", options.inputs, "flag");
    echo_value(echo, "out_dir", options.out_dir, "flag");
    echo_value(echo, "merge", options.merge, options.merge ? "flag" : "default");
    err << echo.dump() << "\n";

    fs::create_directories(options.out_dir);
    std::vector<Corpus> unified;
    nlohmann::ordered_json stats = nlohmann::ordered_json::array();
    for (const std::string& input : options.inputs) {
      const auto [scheme_arg, path] = split_name_path(input, "--input");
      const LabelScheme scheme = scheme_arg.ends_with(".json")
                                     ? scheme_from_json(read_text_file(scheme_arg))
                                     : builtin_scheme(scheme_arg);
      const std::string name = fs::path(path).stem().string();
      const Corpus raw = parse_conll(read_text_file(path), default_token_column(scheme.name),
                                     default_label_column(scheme.name), name);
      const Corpus corpus = unify_labels(raw, scheme);
      write_text_file(fs::path(options.out_dir) / (name + ".unified.txt"),
                      serialize_two_column(corpus));
      stats.push_back(
          nlohmann::ordered_json::parse(histogram_to_json(corpus_stats(corpus), name)));
      unified.push_back(corpus);
    }
    if (options.merge) {
      const Corpus merged = merge_corpora(unified);
      write_text_file(fs::path(options.out_dir) / "merged.unified.txt",
                      serialize_two_column(merged, /*include_provenance=*/true));
      stats.push_back(
          nlohmann::ordered_json::parse(histogram_to_json(corpus_stats(merged), merged.name)));
    }
    const std::string stats_text = stats.dump(2) + "\n";
    write_text_file(fs::path(options.out_dir) / "stats.json", stats_text);
    out << stats_text;
  });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TrainOptions resolve_train_options(const TrainCli& cli, nlohmann::ordered_json* echo) {
  TrainOptions options;
  options.train_path = cli.train_path;
  options.val_path = cli.val_path;
  options.out_dir = cli.out_dir;

  // Model keys live beside the trainer keys in one config object; the
  // trainer parser still rejects anything it does not know.
  std::map<std::string, const char*> source;
  nlohmann::json file;
  if (cli.config_file) {
    file = load_config_object(*cli.config_file);
    for (const char* key : {"encoder", "head", "encoder_checkpoint"}) {
      if (file.contains(key)) {
        (key == std::string("encoder")      ? options.encoder
         : key == std::string("head")       ? options.head
                                            : options.encoder_checkpoint) =
            file[key].get<std::string>();
        source[key] = "file";
        file.erase(key);
      }
    }
    for (const char* key : {"mini_layers", "mini_hidden", "mini_heads"}) {
      if (file.contains(key)) {
        (key == std::string("mini_layers")   ? options.mini_layers
         : key == std::string("mini_hidden") ? options.mini_hidden
                                             : options.mini_heads) = file[key].get<int>();
        source[key] = "file";
        file.erase(key);
      }
    }
    options.train = train_config_from_json(file.dump());
    for (const auto& item : file.items()) {
      source[item.key()] = "file";
    }
  }

  const auto flag_str = [&](const std::optional<std::string>& flag, std::string& slot,
                            const char* key) {
    if (flag) {
      slot = *flag;
      source[key] = "flag";
    }
  };
  flag_str(cli.encoder, options.encoder, "encoder");
  flag_str(cli.head, options.head, "head");
  flag_str(cli.encoder_checkpoint, options.encoder_checkpoint, "encoder_checkpoint");

  const auto flag_num = [&](const auto& flag, auto& slot, const char* key) {
    if (flag) {
      slot = *flag;
      source[key] = "flag";
    }
  };
  flag_num(cli.lr, options.train.learning_rate, "learning_rate");
  flag_num(cli.batch_size, options.train.batch_size, "batch_size");
  flag_num(cli.max_epochs, options.train.max_epochs, "max_epochs");
  flag_num(cli.patience, options.train.patience, "patience");
  flag_num(cli.max_len, options.train.max_len, "max_len");
  flag_num(cli.seed, options.train.seed, "seed");
  flag_num(cli.mini_layers, options.mini_layers, "mini_layers");
  flag_num(cli.mini_hidden, options.mini_hidden, "mini_hidden");
  flag_num(cli.mini_heads, options.mini_heads, "mini_heads");
  options.train.validate();
  parse_variant(options.encoder);  // fail fast on typos
  parse_head(options.head);

  if (echo != nullptr) {
    const auto src = [&](const char* key) {
      const auto it = source.find(key);
      return it == source.end() ? "default" : it->second;
    };
    (*echo)["command"] = "train";
    echo_value(*echo, "train", options.train_path, "flag");
    echo_value(*echo, "val", options.val_path, "flag");
    echo_value(*echo, "out_dir", options.out_dir, "flag");
    echo_value(*echo, "encoder", options.encoder, src("encoder"));
    echo_value(*echo, "head", options.head, src("head"));
    echo_value(*echo, "encoder_checkpoint", options.encoder_checkpoint,
               src("encoder_checkpoint"));
    echo_value(*echo, "learning_rate", options.train.learning_rate, src("learning_rate"));
    echo_value(*echo, "batch_size", options.train.batch_size, src("batch_size"));
    echo_value(*echo, "max_epochs", options.train.max_epochs, src("max_epochs"));
    echo_value(*echo, "warmup_fraction", options.train.warmup_fraction,
               src("warmup_fraction"));
    echo_value(*echo, "weight_decay", options.train.weight_decay, src("weight_decay"));
    echo_value(*echo, "patience", options.train.patience, src("patience"));
    echo_value(*echo, "min_delta", options.train.min_delta, src("min_delta"));
    echo_value(*echo, "seed", options.train.seed, src("seed"));
    echo_value(*echo, "max_len", options.train.max_len, src("max_len"));
    echo_value(*echo, "target_val_f1", options.train.target_val_f1, src("target_val_f1"));
    echo_value(*echo, "mini_layers", options.mini_layers, src("mini_layers"));
    echo_value(*echo, "mini_hidden", options.mini_hidden, src("mini_hidden"));
    echo_value(*echo, "mini_heads", options.mini_heads, src("mini_heads"));
  }
  return options;
}

int cmd_train(const TrainCli& cli, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    nlohmann::ordered_json echo;
    const TrainOptions options = resolve_train_options(cli, &echo);
    err << echo.dump() << "\n";
    if (options.train_path.empty() || options.val_path.empty() || options.out_dir.empty()) {
      throw Error("train: --train, --val and --out-dir are all required");
    }

    const Corpus train = load_unified_corpus(options.train_path, "train");
    const Corpus val = load_unified_corpus(options.val_path, "val");

    const HeadKind kind = parse_head(options.head);
    HeadConfig head_cfg;
    switch (kind) {
      case HeadKind::linear:
        head_cfg = HeadConfig::linear();
        break;
      case HeadKind::mlp:
        head_cfg = HeadConfig::mlp();
        break;
      case HeadKind::cnn1d:
        head_cfg = HeadConfig::cnn1d();
        break;
    }

    TokenClassifier clf;
    PieceVocab vocab;
    if (parse_variant(options.encoder) == EncoderVariant::miniature) {
      vocab = PieceVocab::toy_from_corpus(train);
      const EncoderConfig enc = EncoderConfig::miniature_config(
          vocab.size(), options.mini_layers, options.mini_hidden, options.mini_heads,
          options.train.max_len);
      clf = build_classifier(enc, head_cfg, options.train.seed);
    } else {
      if (options.encoder_checkpoint.empty()) {
        throw Error("train: --encoder-checkpoint is required for pretrained encoders");
      }
      const EncoderConfig enc = parse_variant(options.encoder) ==
                                        EncoderVariant::pretrained_base_cased
                                    ? EncoderConfig::pretrained_base_cased()
                                    : EncoderConfig::pretrained_large_cased();
      vocab = PieceVocab::load(fs::path(options.encoder_checkpoint) / "vocab.txt");
      clf = build_classifier(enc, head_cfg, options.train.seed, options.encoder_checkpoint);
    }

    const TrainReport report = fine_tune(clf, train, val, vocab, options.train, &out);
    fs::create_directories(options.out_dir);
    save_checkpoint(clf, vocab, options.out_dir, train.name);
    write_text_file(fs::path(options.out_dir) / "train_report.json",
                    train_report_to_json(report) + "\n");
    out << train_report_to_json(report) << "\n";
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    if (options.checkpoint_dir.empty() || options.test_path.empty()) {
      throw Error("evaluate: --checkpoint and --test are required");
    }
    nlohmann::ordered_json echo;
    echo["command"] = "evaluate";
    echo_value(echo, "checkpoint", options.checkpoint_dir, "flag");
    echo_value(echo, "test", options.test_path, "flag");
    echo_value(echo, "max_len", options.max_len, "flag");
    echo_value(echo, "batch_size", options.batch_size, "flag");
    err << echo.dump() << "\n";

    const CheckpointBundle bundle = load_checkpoint(options.checkpoint_dir);
    const Corpus test = load_unified_corpus(options.test_path, "test");
    // A checkpoint cannot attend past its own position table.
    const int max_len =
        std::min(options.max_len, bundle.classifier.encoder_config.max_positions);
    const EvalReport report =
        evaluate_checkpoint(bundle.classifier, test, bundle.vocab, max_len, options.batch_size);
    const std::string text = eval_report_to_json(report) + "\n";
    out << text;
    if (!options.out_path.empty()) {
      write_text_file(options.out_path, text);
    }
  });
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

ExtractOptions resolve_extract_options(const ExtractCli& cli,
                                       const std::map<std::string, std::string>& env,
                                       nlohmann::ordered_json* echo) {
  ExtractOptions options;
  options.input_path = cli.input_path;
  options.checkpoint_dir = cli.checkpoint_dir;
  options.output_path = cli.output_path;

  std::map<std::string, const char*> source;
  if (cli.config_file) {
    const nlohmann::json file = load_config_object(*cli.config_file);
    for (const auto& [key, value] : file.items()) {
      if (key == "no_geocode") {
        options.no_geocode = value.get<bool>();
      } else if (key == "mock_geocoder") {
        options.mock_geocoder = value.get<std::string>();
      } else if (key == "geocoder_url") {
        options.geocoder_url = value.get<std::string>();
      } else if (key == "geocoder_key") {
        options.geocoder_key = value.get<std::string>();
      } else if (key == "geocoder_qps") {
        options.geocoder_qps = value.get<double>();
      } else if (key == "cache") {
        options.cache_path = value.get<std::string>();
      } else if (key == "max_len") {
        options.max_len = value.get<int>();
      } else if (key == "batch_size") {
        options.batch_size = value.get<int>();
      } else if (key == "seed") {
        options.seed = value.get<std::uint64_t>();
      } else {
        throw Error("extract config: unknown key \"" + key + "\"");
      }
      source[key] = "file";
    }
  }

  const auto env_str = [&](const char* var, std::string& slot, const char* key) {
    const auto it = env.find(var);
    if (it != env.end()) {
      slot = it->second;
      source[key] = "env";
    }
  };
  env_str("GEOCODER_URL", options.geocoder_url, "geocoder_url");
  env_str("GEOCODER_KEY", options.geocoder_key, "geocoder_key");
  if (const auto it = env.find("GEOCODER_QPS"); it != env.end()) {
    try {
      options.geocoder_qps = std::stod(it->second);
    } catch (const std::exception&) {
      throw Error("GEOCODER_QPS is not a number: \"" + it->second + "\"");
    }
    source["geocoder_qps"] = "env";
  }

  const auto flag = [&](const auto& value, auto& slot, const char* key) {
    if (value) {
      slot = *value;
      source[key] = "flag";
    }
  };
  flag(cli.no_geocode, options.no_geocode, "no_geocode");
  flag(cli.mock_geocoder, options.mock_geocoder, "mock_geocoder");
  flag(cli.geocoder_url, options.geocoder_url, "geocoder_url");
  flag(cli.geocoder_key, options.geocoder_key, "geocoder_key");
  flag(cli.geocoder_qps, options.geocoder_qps, "geocoder_qps");
  flag(cli.cache_path, options.cache_path, "cache");
  flag(cli.max_len, options.max_len, "max_len");
  flag(cli.batch_size, options.batch_size, "batch_size");
  flag(cli.seed, options.seed, "seed");

  if (options.max_len < 3 || options.batch_size < 1) {
    throw Error("extract: max_len must be >= 3 and batch_size >= 1");
  }
  if (options.geocoder_qps <= 0.0) {
    throw Error("extract: geocoder_qps must be positive");
  }

  if (echo != nullptr) {
    const auto src = [&](const char* key) {
      const auto it = source.find(key);
      return it == source.end() ? "default" : it->second;
    };
    (*echo)["command"] = "extract";
    echo_value(*echo, "input", options.input_path, "flag");
    echo_value(*echo, "checkpoint", options.checkpoint_dir, "flag");
    echo_value(*echo, "output", options.output_path, "flag");
    echo_value(*echo, "no_geocode", options.no_geocode, src("no_geocode"));
    echo_value(*echo, "mock_geocoder", options.mock_geocoder, src("mock_geocoder"));
    echo_value(*echo, "geocoder_url", options.geocoder_url, src("geocoder_url"));
    echo_value(*echo, "geocoder_key", options.geocoder_key.empty() ? "" : "<set>",
               src("geocoder_key"));
    echo_value(*echo, "geocoder_qps", options.geocoder_qps, src("geocoder_qps"));
    echo_value(*echo, "cache", options.cache_path, src("cache"));
    echo_value(*echo, "max_len", options.max_len, src("max_len"));
    echo_value(*echo, "batch_size", options.batch_size, src("batch_size"));
    echo_value(*echo, "seed", options.seed, src("seed"));
  }
  return options;
}

int cmd_extract(const ExtractCli& cli, const std::map<std::string, std::string>& env,
                std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    nlohmann::ordered_json echo;
    const ExtractOptions options = resolve_extract_options(cli, env, &echo);
    err << echo.dump() << "\n";
    if (options.input_path.empty() || options.checkpoint_dir.empty()) {
      throw Error("extract: --input and --checkpoint are required");
    }

    const CheckpointBundle bundle = load_checkpoint(options.checkpoint_dir);
    const std::vector<PostInput> posts = parse_posts(read_text_file(options.input_path));
    // A checkpoint cannot attend past its own position table.
    const int max_len =
        std::min(options.max_len, bundle.classifier.encoder_config.max_positions);

    std::unique_ptr<GeocodeProvider> provider;
    if (!options.no_geocode) {
      if (!options.mock_geocoder.empty()) {
        provider = std::make_unique<MockGeocoder>(MockGeocoder::from_file(options.mock_geocoder));
      } else if (!options.geocoder_url.empty()) {
        provider = std::make_unique<HttpGeocoder>(options.geocoder_url, options.geocoder_key);
      }
    }
    GeocodeCache cache =
        options.cache_path.empty() ? GeocodeCache() : GeocodeCache::load(options.cache_path);
    TokenBucket limiter(std::max(1.0, options.geocoder_qps), options.geocoder_qps);

    long warnings = 0;
    std::ostringstream body;
    for (const PostInput& post : posts) {
      const ExtractionResult extraction =
          run_extraction(post.text, bundle.classifier, bundle.vocab, max_len);
      PostRecord record;
      record.text = post.text;
      record.tokens = extraction.words;
      record.toponyms = extraction.spans;
      record.zipcodes = extract_zipcodes(post.text);
      if (provider != nullptr) {
        const GeocodeOutcome outcome = geocode(extraction.spans, *provider, cache, limiter);
        record.geocodes = outcome.results;
        for (const GeocodeFailure& failure : outcome.failures) {
          err << "warning: geocode \"" << failure.query << "\": " << failure.reason << "\n";
          ++warnings;
        }
      }
      body << ndjson_line(post, record) << "\n";
    }

    if (options.output_path.empty()) {
      out << body.str();
    } else {
      write_text_file(options.output_path, body.str());
    }
    if (!options.cache_path.empty()) {
      cache.save(options.cache_path);
    }
    err << "extract: " << posts.size() << " posts, " << warnings << " geocoding warnings\n";
  });
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

namespace {

struct BenchmarkRow {
  std::string name;
  PrfScores scores;
  ConfusionCounts counts;
};

/// 1-based line number of word w of sentence s in a two-column file with
/// single blank separators and no marker lines.
std::size_t two_column_line(const Corpus& corpus, std::size_t sentence, std::size_t word) {
  std::size_t line = 1;
  for (std::size_t s = 0; s < sentence; ++s) {
    line += corpus.sentences[s].words.size() + 1;
  }
  return line + word;
}

void check_token_alignment(const Corpus& gold, const Corpus& pred, const std::string& name) {
  const std::size_t sentences = std::min(gold.sentences.size(), pred.sentences.size());
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto& g = gold.sentences[s].words;
    const auto& p = pred.sentences[s].words;
    const std::size_t words = std::min(g.size(), p.size());
    for (std::size_t w = 0; w < words; ++w) {
      if (g[w] != p[w]) {
        throw Error("benchmark: system " + name + " token mismatch with gold at line " +
                    std::to_string(two_column_line(pred, s, w)) + ": \"" + p[w] + "\" vs \"" +
                    g[w] + "\"");
      }
    }
    if (g.size() != p.size()) {
      throw Error("benchmark: system " + name + " token mismatch with gold at line " +
                  std::to_string(two_column_line(pred, s, words)) +
                  ": sentence length differs");
    }
  }
  if (gold.sentences.size() != pred.sentences.size()) {
    throw Error("benchmark: system " + name + " token mismatch with gold at line " +
                std::to_string(two_column_line(pred, sentences, 0)) +
                ": sentence count differs");
  }
}

std::vector<std::vector<int>> corpus_labels(const Corpus& corpus) {
  std::vector<std::vector<int>> labels;
  labels.reserve(corpus.sentences.size());
  for (const auto& sentence : corpus.sentences) {
    labels.push_back(sentence.labels);
  }
  return labels;
}

}  // namespace

int cmd_benchmark(const BenchmarkOptions& options, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    if (options.gold_path.empty() || options.systems.empty()) {
      throw Error("benchmark: --gold and at least one --pred <name>:<path> are required");
    }
    nlohmann::ordered_json echo;
    echo["command"] = "benchmark";
    echo_value(echo, "gold", options.gold_path, "flag");
    echo_value(echo, "systems", options.systems, "flag");
    echo_value(echo, "mapping", options.mapping_path, "flag");
    err << echo.dump() << "\n";

    const Corpus gold = load_unified_corpus(options.gold_path, "gold");
    std::optional<LabelScheme> mapping;
    if (!options.mapping_path.empty()) {
      mapping = scheme_from_json(read_text_file(options.mapping_path));
    }

    std::vector<BenchmarkRow> rows;
    for (const std::string& system : options.systems) {
      const auto [name, path] = split_name_path(system, "--pred");
      const Corpus raw = parse_conll(read_text_file(path), 0, 1, name);
      const Corpus pred =
          mapping ? unify_labels(raw, *mapping) : unify_labels(raw, builtin_scheme("unified"));
      check_token_alignment(gold, pred, name);
      BenchmarkRow row;
      row.name = name;
      row.counts = count_confusion(corpus_labels(gold), corpus_labels(pred));
      row.scores = micro_prf(row.counts);
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
      if (a.scores.f1 != b.scores.f1) {
        return a.scores.f1 > b.scores.f1;
      }
      return a.name < b.name;
    });

    std::size_t width = 6;  // "system"
    for (const BenchmarkRow& row : rows) {
      width = std::max(width, row.name.size());
    }
    out << std::left << std::setw(static_cast<int>(width)) << "system" << std::right
        << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(8) << "f1"
        << "\n";
    out << std::fixed << std::setprecision(3);
    for (const BenchmarkRow& row : rows) {
      out << std::left << std::setw(static_cast<int>(width)) << row.name << std::right
          << std::setw(11) << row.scores.precision << std::setw(9) << row.scores.recall
          << std::setw(8) << row.scores.f1 << "\n";
    }
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);

    nlohmann::ordered_json report;
    report["gold"] = options.gold_path;
    auto& systems = report["systems"] = nlohmann::ordered_json::array();
    for (const BenchmarkRow& row : rows) {
      nlohmann::ordered_json r;
      r["name"] = row.name;
      r["precision"] = round_places(row.scores.precision, 6);
      r["recall"] = round_places(row.scores.recall, 6);
      r["f1"] = round_places(row.scores.f1, 6);
      r["tp"] = row.counts.b_loc.tp + row.counts.i_loc.tp;
      r["fp"] = row.counts.b_loc.fp + row.counts.i_loc.fp;
      r["fn"] = row.counts.b_loc.fn + row.counts.i_loc.fn;
      r["degenerate"] = row.scores.degenerate;
      systems.push_back(std::move(r));
    }
    const std::string json_text = report.dump(2) + "\n";
    out << json_text;
    if (!options.out_path.empty()) {
      write_text_file(options.out_path, json_text);
    }
  });
}

}  // namespace topo
