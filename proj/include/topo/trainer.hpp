#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "topo/classifier.hpp"
#include "topo/corpus.hpp"
#include "topo/metrics.hpp"

namespace topo {

struct TrainConfig {
  double learning_rate = 2e-5;
  int batch_size = 32;
  int max_epochs = 50;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  int patience = 3;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
  int max_len = kDefaultMaxLen;
  /// Optional early exit once validation F1 reaches this value; 0 disables
  /// it. Useful for overfitting runs that would otherwise idle at the top.
  double target_val_f1 = 0.0;

  void validate() const;
};

TrainConfig train_config_from_json(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> train_loss;  // mean per epoch
  std::vector<double> val_f1;      // per epoch
  std::vector<double> lr_trace;    // learning rate at each epoch's last step
  int stopped_epoch = 0;           // 1-based epoch the run ended on
  int best_epoch = 0;              // 1-based epoch of the returned parameters
  double best_val_f1 = 0.0;
  double wall_time_seconds = 0.0;
};

std::string train_report_to_json(const TrainReport& report);

/// Mean negative log softmax probability of the gold label over positions
/// whose gold is not IGNORE. Optionally emits d(loss)/d(logits). Throws if
/// every position is ignored.
double cross_entropy(const Mat& logits, std::span<const int> gold, Mat* d_logits = nullptr);

/// Linear warmup from 0 to learning_rate over the first
/// warmup_fraction*total_steps steps, then linear decay to 0 at total_steps.
double lr_at(long step, long total_steps, const TrainConfig& cfg);

/// Stops once the monitored score has failed to improve by more than
/// min_delta for `patience` consecutive observations.
class EarlyStopper {
public:
  EarlyStopper(int patience, double min_delta);

  /// Feeds one epoch's score (1-based epochs); true means stop now.
  bool observe(double score, int epoch);

  bool improved_last() const { return improved_last_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

private:
  int patience_;
  double min_delta_;
  double best_;
  int best_epoch_ = 0;
  int wait_ = 0;
  bool improved_last_ = false;
};

/// Decoupled weight decay: p <- p*(1 - lr*wd) before the Adam update
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps). Decay applies to every array.
class AdamW {
public:
  explicit AdamW(double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                 double epsilon = 1e-8);

  void step(ParamMap& params, const ParamMap& grads, double lr);
  long steps() const { return steps_; }

private:
  double weight_decay_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long steps_ = 0;
  ParamMap m_;
  ParamMap v_;
};

/// Fine-tunes in place and leaves the classifier holding the parameters of
/// the best validation epoch. One JSON object per epoch goes to `progress`
/// when given.
TrainReport fine_tune(TokenClassifier& clf, const Corpus& train, const Corpus& val,
                      const PieceVocab& vocab, const TrainConfig& cfg,
                      std::ostream* progress = nullptr);

/// align -> predict -> merge -> word-level confusion and micro scores.
/// Words lost to truncation are excluded from both gold and prediction.
EvalReport evaluate_checkpoint(const TokenClassifier& clf, const Corpus& corpus,
                               const PieceVocab& vocab, int max_len = kDefaultMaxLen,
                               int batch_size = 32);

}  // namespace topo
