#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duet/box.hpp"

namespace duet {

double iou(const WordBox& a, const WordBox& b);

struct MatchPair {
  int pred = 0;
  int gt = 0;
  double iou = 0.0;
};

struct Matching {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;

  int true_positives() const { return static_cast<int>(pairs.size()); }
};

enum class MatchMode { kGreedy, kOptimal };

// One-to-one matching over pairs with IoU >= thresh. Greedy takes pairs in
// descending IoU, ties by lower pred then lower gt index. Optimal maximizes
// the number of pairs (augmenting paths); ties in cardinality are broken
// arbitrarily.
Matching match_boxes(const BoxList& pred, const BoxList& gt, double thresh = 0.5,
                     MatchMode mode = MatchMode::kGreedy);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  int true_pos = 0;
  int n_pred = 0;
  int n_gt = 0;
};

Metrics prf(int true_pos, int n_pred, int n_gt);
inline Metrics prf(const Matching& m, int n_pred, int n_gt) { return prf(m.true_positives(), n_pred, n_gt); }

struct DocumentResult {
  std::string id;
  int true_pos = 0;
  int n_pred = 0;
  int n_gt = 0;
};

// Pooled (micro-averaged) evaluation over a document set.
struct EvaluationReport {
  std::vector<DocumentResult> documents;
  Metrics pooled;
  double iou_threshold = 0.5;

  void add(std::string id, const BoxList& pred, const BoxList& gt, MatchMode mode = MatchMode::kGreedy);
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

}  // namespace duet
