#include "topo/metrics.hpp"

#include <cmath>
#include <sstream>

#include "topo/common.hpp"

#include <nlohmann/json.hpp>

namespace topo {

namespace {

void count_one(int gold, int pred, int cls, ClassCounts& c) {
  if (gold == cls && pred == cls) {
    ++c.tp;
  } else if (gold != cls && pred == cls) {
    ++c.fp;
  } else if (gold == cls && pred != cls) {
    ++c.fn;
  }
}

}  // namespace

ConfusionCounts count_confusion(std::span<const int> gold, std::span<const int> pred) {
  if (gold.size() != pred.size()) {
    throw Error("count_confusion: length mismatch (" + std::to_string(gold.size()) +
                " gold vs " + std::to_string(pred.size()) + " pred)");
  }
  ConfusionCounts counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    count_one(gold[i], pred[i], kLabelBLoc, counts.b_loc);
    count_one(gold[i], pred[i], kLabelILoc, counts.i_loc);
  }
  return counts;
}

ConfusionCounts count_confusion(const std::vector<std::vector<int>>& gold,
                                const std::vector<std::vector<int>>& pred) {
  if (gold.size() != pred.size()) {
    throw Error("count_confusion: sentence count mismatch (" + std::to_string(gold.size()) +
                " vs " + std::to_string(pred.size()) + ")");
  }
  ConfusionCounts counts;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      throw Error("count_confusion: length mismatch at sentence " + std::to_string(s));
    }
    counts += count_confusion(std::span<const int>(gold[s]), std::span<const int>(pred[s]));
  }
  return counts;
}

double harmonic_f1(double precision, double recall) {
  const double denom = precision + recall;
  if (denom <= 0.0) {
    return 0.0;
  }
  return 2.0 * precision * recall / denom;
}

namespace {

PrfScores prf_from_counts(long tp, long fp, long fn) {
  PrfScores s;
  const long pred_pos = tp + fp;
  const long gold_pos = tp + fn;
  if (pred_pos == 0) {
    s.degenerate = true;
  } else {
    s.precision = static_cast<double>(tp) / static_cast<double>(pred_pos);
  }
  if (gold_pos == 0) {
    s.degenerate = true;
  } else {
    s.recall = static_cast<double>(tp) / static_cast<double>(gold_pos);
  }
  if (s.precision + s.recall <= 0.0) {
    s.degenerate = true;
    s.f1 = 0.0;
  } else {
    s.f1 = harmonic_f1(s.precision, s.recall);
  }
  return s;
}

}  // namespace

PrfScores micro_prf(const ConfusionCounts& counts) {
  return prf_from_counts(counts.b_loc.tp + counts.i_loc.tp,
                         counts.b_loc.fp + counts.i_loc.fp,
                         counts.b_loc.fn + counts.i_loc.fn);
}

PrfScores class_prf(const ClassCounts& counts) {
  return prf_from_counts(counts.tp, counts.fp, counts.fn);
}

bool consistency_check(double precision, double recall, double f_reported, double tol) {
  return std::abs(harmonic_f1(precision, recall) - f_reported) <= tol;
}

EvalReport make_eval_report(const ConfusionCounts& counts) {
  EvalReport report;
  report.counts = counts;
  report.micro = micro_prf(counts);
  report.b_loc = class_prf(counts.b_loc);
  report.i_loc = class_prf(counts.i_loc);
  return report;
}

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["precision"] = report.micro.precision;
  j["recall"] = report.micro.recall;
  j["f1"] = report.micro.f1;
  j["counts"]["B-LOC"] = {{"tp", report.counts.b_loc.tp},
                          {"fp", report.counts.b_loc.fp},
                          {"fn", report.counts.b_loc.fn}};
  j["counts"]["I-LOC"] = {{"tp", report.counts.i_loc.tp},
                          {"fp", report.counts.i_loc.fp},
                          {"fn", report.counts.i_loc.fn}};
  j["degenerate"] = report.micro.degenerate;
  j["per_class"]["B-LOC"] = {{"precision", report.b_loc.precision},
                             {"recall", report.b_loc.recall},
                             {"f1", report.b_loc.f1}};
  j["per_class"]["I-LOC"] = {{"precision", report.i_loc.precision},
                             {"recall", report.i_loc.recall},
                             {"f1", report.i_loc.f1}};
  return j.dump(2);
}

namespace {

// An entity span is a maximal run starting at B-LOC (or an orphan I-LOC)
// followed by I-LOC continuations.
std::vector<std::pair<std::size_t, std::size_t>> entity_spans(std::span<const int> labels) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] == kLabelBLoc || labels[i] == kLabelILoc) {
      std::size_t j = i + 1;
      while (j < labels.size() && labels[j] == kLabelILoc) {
        ++j;
      }
      spans.emplace_back(i, j);
      i = j;
    } else {
      ++i;
    }
  }
  return spans;
}

}  // namespace

PrfScores span_level_prf(const std::vector<std::vector<int>>& gold,
                         const std::vector<std::vector<int>>& pred) {
  if (gold.size() != pred.size()) {
    throw Error("span_level_prf: sentence count mismatch");
  }
  long tp = 0;
  long fp = 0;
  long fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto gspans = entity_spans(std::span<const int>(gold[s]));
    const auto pspans = entity_spans(std::span<const int>(pred[s]));
    for (const auto& ps : pspans) {
      bool hit = false;
      for (const auto& gs : gspans) {
        if (ps == gs) {
          hit = true;
          break;
        }
      }
      hit ? ++tp : ++fp;
    }
    for (const auto& gs : gspans) {
      bool hit = false;
      for (const auto& ps : pspans) {
        if (ps == gs) {
          hit = true;
          break;
        }
      }
      if (!hit) {
        ++fn;
      }
    }
  }
  return prf_from_counts(tp, fp, fn);
}

}  // namespace topo
