#pragma once

#include <span>
#include <string>
#include <vector>

#include "topo/labels.hpp"

namespace topo {

struct ClassCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ClassCounts&) const = default;
};

/// Word-level confusion over the two location classes. 'O' participates
/// only as "not the class".
struct ConfusionCounts {
  ClassCounts b_loc;
  ClassCounts i_loc;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    b_loc += o.b_loc;
    i_loc += o.i_loc;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero and the score was pinned to 0
};

struct EvalReport {
  ConfusionCounts counts;
  PrfScores micro;
  PrfScores b_loc;  // per-class diagnostics
  PrfScores i_loc;
};

/// Counts one sentence. Throws on length mismatch.
ConfusionCounts count_confusion(std::span<const int> gold, std::span<const int> pred);

/// Counts a corpus; a length mismatch names the offending sentence index.
ConfusionCounts count_confusion(const std::vector<std::vector<int>>& gold,
                                const std::vector<std::vector<int>>& pred);

/// Micro average: sum TP/FP/FN across the two classes, then precision,
/// recall and the harmonic-mean F1.
PrfScores micro_prf(const ConfusionCounts& counts);

PrfScores class_prf(const ClassCounts& counts);

double harmonic_f1(double precision, double recall);

/// Checks a reported F1 against the harmonic mean of the reported P and R.
bool consistency_check(double precision, double recall, double f_reported, double tol);

EvalReport make_eval_report(const ConfusionCounts& counts);

std::string eval_report_to_json(const EvalReport& report);

/// Exact-span scoring (entity level). Diagnostic only; the primary metric
/// everywhere else in this project is the per-word micro average.
PrfScores span_level_prf(const std::vector<std::vector<int>>& gold,
                         const std::vector<std::vector<int>>& pred);

}  // namespace topo
