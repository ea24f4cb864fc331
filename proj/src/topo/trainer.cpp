#include "topo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

namespace topo {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) {
    throw Error("train config: learning_rate must be positive");
  }
  if (batch_size < 1 || max_epochs < 1 || max_len < 3) {
    throw Error("train config: batch_size, max_epochs and max_len must be positive");
  }
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw Error("train config: warmup_fraction must lie in [0, 1)");
  }
  if (weight_decay < 0.0 || min_delta < 0.0 || patience < 0) {
    throw Error("train config: weight_decay, min_delta and patience must be non-negative");
  }
  if (target_val_f1 < 0.0 || target_val_f1 > 1.0) {
    throw Error("train config: target_val_f1 must lie in [0, 1]");
  }
}

TrainConfig train_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("train config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw Error("train config must be a JSON object");
  }
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") {
      cfg.learning_rate = value.get<double>();
    } else if (key == "batch_size") {
      cfg.batch_size = value.get<int>();
    } else if (key == "max_epochs") {
      cfg.max_epochs = value.get<int>();
    } else if (key == "warmup_fraction") {
      cfg.warmup_fraction = value.get<double>();
    } else if (key == "weight_decay") {
      cfg.weight_decay = value.get<double>();
    } else if (key == "patience") {
      cfg.patience = value.get<int>();
    } else if (key == "min_delta") {
      cfg.min_delta = value.get<double>();
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "max_len") {
      cfg.max_len = value.get<int>();
    } else if (key == "target_val_f1") {
      cfg.target_val_f1 = value.get<double>();
    } else {
      throw Error("train config: unknown key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["warmup_fraction"] = cfg.warmup_fraction;
  j["weight_decay"] = cfg.weight_decay;
  j["patience"] = cfg.patience;
  j["min_delta"] = cfg.min_delta;
  j["seed"] = cfg.seed;
  j["max_len"] = cfg.max_len;
  j["target_val_f1"] = cfg.target_val_f1;
  return j.dump();
}

std::string train_report_to_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["train_loss"] = report.train_loss;
  j["val_f1"] = report.val_f1;
  j["lr_trace"] = report.lr_trace;
  j["stopped_epoch"] = report.stopped_epoch;
  j["best_epoch"] = report.best_epoch;
  j["best_val_f1"] = report.best_val_f1;
  j["wall_time_seconds"] = report.wall_time_seconds;
  return j.dump(2);
}

double cross_entropy(const Mat& logits, std::span<const int> gold, Mat* d_logits) {
  if (static_cast<std::size_t>(logits.rows()) != gold.size()) {
    throw Error("cross_entropy: logits rows do not match gold labels");
  }
  if (d_logits != nullptr) {
    d_logits->setZero(logits.rows(), logits.cols());
  }
  double total = 0.0;
  long counted = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int label = gold[static_cast<std::size_t>(i)];
    if (label == kIgnoreLabel) {
      continue;
    }
    if (label < 0 || label >= logits.cols()) {
      throw Error("cross_entropy: gold label " + std::to_string(label) + " out of range");
    }
    ++counted;
    const double m = logits.row(i).maxCoeff();
    const Eigen::Array<double, 1, Eigen::Dynamic> shifted = logits.row(i).array() - m;
    const double log_z = std::log(shifted.exp().sum());
    total += log_z - shifted(label);
    if (d_logits != nullptr) {
      d_logits->row(i) = (shifted - log_z).exp().matrix();
      (*d_logits)(i, label) -= 1.0;
    }
  }
  if (counted == 0) {
    throw Error("cross_entropy: every position is ignored (degenerate batch)");
  }
  total /= static_cast<double>(counted);
  if (d_logits != nullptr) {
    *d_logits /= static_cast<double>(counted);
  }
  return total;
}

double lr_at(long step, long total_steps, const TrainConfig& cfg) {
  if (total_steps <= 0) {
    throw Error("lr_at: total_steps must be positive");
  }
  if (step < 0 || step > total_steps) {
    throw Error("lr_at: step outside [0, total_steps]");
  }
  const long warmup = static_cast<long>(cfg.warmup_fraction * static_cast<double>(total_steps));
  if (warmup > 0 && step <= warmup) {
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return cfg.learning_rate * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

EarlyStopper::EarlyStopper(int patience, double min_delta)
    : patience_(patience),
      min_delta_(min_delta),
      best_(-std::numeric_limits<double>::infinity()) {}

bool EarlyStopper::observe(double score, int epoch) {
  improved_last_ = score > best_ + min_delta_;
  if (improved_last_) {
    best_ = score;
    best_epoch_ = epoch;
    wait_ = 0;
    return false;
  }
  ++wait_;
  return wait_ >= patience_;
}

AdamW::AdamW(double weight_decay, double beta1, double beta2, double epsilon)
    : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamW::step(ParamMap& params, const ParamMap& grads, double lr) {
  ++steps_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (const auto& [name, g] : grads) {
    const auto pit = params.find(name);
    if (pit == params.end()) {
      throw Error("AdamW: gradient for unknown parameter " + name);
    }
    Array& p = pit->second;
    if (!p.same_shape(g)) {
      throw Error("AdamW: gradient shape mismatch for " + name);
    }
    Array& m = m_.try_emplace(name, Array(p.shape)).first->second;
    Array& v = v_.try_emplace(name, Array(p.shape)).first->second;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      p.data[i] *= 1.0 - lr * weight_decay_;
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
      const double m_hat = m.data[i] / bias1;
      const double v_hat = v.data[i] / bias2;
      p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

namespace {

std::vector<PieceSequence> align_corpus(const Corpus& corpus, const PieceVocab& vocab,
                                        int max_len) {
  std::vector<PieceSequence> sequences;
  sequences.reserve(corpus.sentences.size());
  for (const auto& sentence : corpus.sentences) {
    sequences.push_back(align(sentence, vocab, max_len));
  }
  return sequences;
}

double validation_f1(const TokenClassifier& clf, const Corpus& corpus,
                     const std::vector<PieceSequence>& sequences, const PieceVocab& vocab,
                     int batch_size) {
  const auto predictions = predict_words(clf, vocab, sequences, batch_size);
  std::vector<std::vector<int>> gold;
  std::vector<std::vector<int>> pred;
  gold.reserve(predictions.size());
  pred.reserve(predictions.size());
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    std::vector<int> g(corpus.sentences[s].labels.begin(),
                       corpus.sentences[s].labels.begin() +
                           static_cast<std::ptrdiff_t>(predictions[s].size()));
    std::vector<int> p;
    p.reserve(predictions[s].size());
    for (const auto& word : predictions[s]) {
      p.push_back(word.label);
    }
    gold.push_back(std::move(g));
    pred.push_back(std::move(p));
  }
  return micro_prf(count_confusion(gold, pred)).f1;
}

}  // namespace

TrainReport fine_tune(TokenClassifier& clf, const Corpus& train, const Corpus& val,
                      const PieceVocab& vocab, const TrainConfig& cfg,
                      std::ostream* progress) {
  cfg.validate();
  if (train.sentences.empty()) {
    throw Error("fine_tune: training corpus is empty");
  }
  if (val.sentences.empty()) {
    throw Error("fine_tune: validation corpus is empty");
  }
  const auto start_time = std::chrono::steady_clock::now();

  const std::vector<PieceSequence> train_seqs = align_corpus(train, vocab, cfg.max_len);
  const std::vector<PieceSequence> val_seqs = align_corpus(val, vocab, cfg.max_len);

  const long steps_per_epoch =
      static_cast<long>((train_seqs.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                        static_cast<std::size_t>(cfg.batch_size));
  const long total_steps = steps_per_epoch * cfg.max_epochs;

  AdamW optimizer(cfg.weight_decay);
  EarlyStopper stopper(cfg.patience, cfg.min_delta);
  TrainReport report;
  ParamMap best_params = clf.params;
  int best_epoch = 0;
  double best_f1 = -1.0;
  long global_step = 0;

  std::vector<std::size_t> order(train_seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // Counter-based reseeding keeps every epoch's batch order replayable in
    // isolation.
    Rng epoch_rng(cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch));
    epoch_rng.shuffle(order);

    double loss_sum = 0.0;
    double epoch_lr = 0.0;
    for (long step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = static_cast<std::size_t>(step) * cfg.batch_size;
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(cfg.batch_size), order.size());
      std::vector<PieceSequence> chunk;
      chunk.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        chunk.push_back(train_seqs[order[i]]);
      }
      const Batch batch = Batch::from_sequences(chunk);

      ClassifierCache cache;
      const Mat logits = classifier_forward(clf, batch, &cache);
      Mat d_logits;
      const double loss = cross_entropy(logits, batch.labels, &d_logits);
      if (!std::isfinite(loss)) {
        throw Error("fine_tune: training diverged at epoch " + std::to_string(epoch) +
                    ", step " + std::to_string(step) + " (loss is not finite)");
      }
      ParamMap grads;
      classifier_backward(clf, cache, d_logits, grads);

      ++global_step;
      epoch_lr = lr_at(global_step, total_steps, cfg);
      optimizer.step(clf.params, grads, epoch_lr);
      loss_sum += loss;
    }

    const double mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
    const double f1 = validation_f1(clf, val, val_seqs, vocab, cfg.batch_size);
    report.train_loss.push_back(mean_loss);
    report.val_f1.push_back(f1);
    report.lr_trace.push_back(epoch_lr);
    report.stopped_epoch = epoch;

    if (f1 > best_f1) {
      best_f1 = f1;
      best_epoch = epoch;
      best_params = clf.params;
    }
    if (progress != nullptr) {
      nlohmann::ordered_json line;
      line["epoch"] = epoch;
      line["mean_loss"] = mean_loss;
      line["val_f1"] = f1;
      line["lr"] = epoch_lr;
      *progress << line.dump() << "\n";
    }

    const bool out_of_patience = stopper.observe(f1, epoch);
    const bool target_reached = cfg.target_val_f1 > 0.0 && f1 >= cfg.target_val_f1;
    if (out_of_patience || target_reached) {
      break;
    }
  }

  clf.params = std::move(best_params);
  report.best_epoch = best_epoch;
  report.best_val_f1 = best_f1;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

EvalReport evaluate_checkpoint(const TokenClassifier& clf, const Corpus& corpus,
                               const PieceVocab& vocab, int max_len, int batch_size) {
  const std::vector<PieceSequence> sequences = align_corpus(corpus, vocab, max_len);
  const auto predictions = predict_words(clf, vocab, sequences, batch_size);
  std::vector<std::vector<int>> gold;
  std::vector<std::vector<int>> pred;
  gold.reserve(predictions.size());
  pred.reserve(predictions.size());
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    gold.emplace_back(corpus.sentences[s].labels.begin(),
                      corpus.sentences[s].labels.begin() +
                          static_cast<std::ptrdiff_t>(predictions[s].size()));
    std::vector<int> p;
    p.reserve(predictions[s].size());
    for (const auto& word : predictions[s]) {
      p.push_back(word.label);
    }
    pred.push_back(std::move(p));
  }
  return make_eval_report(count_confusion(gold, pred));
}

}  // namespace topo
