#include "duet/evaluation.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <tuple>

namespace duet {

double iou(const WordBox& a, const WordBox& b) {
  const long iw = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const long ih = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const long inter = iw * ih;
  if (inter == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

namespace {

Matching finish(std::vector<MatchPair> pairs, std::size_t n_pred, std::size_t n_gt) {
  Matching m;
  std::vector<bool> pred_used(n_pred), gt_used(n_gt);
  for (const auto& p : pairs) {
    pred_used[static_cast<std::size_t>(p.pred)] = true;
    gt_used[static_cast<std::size_t>(p.gt)] = true;
  }
  m.pairs = std::move(pairs);
  for (std::size_t i = 0; i < n_pred; ++i)
    if (!pred_used[i]) m.unmatched_pred.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < n_gt; ++j)
    if (!gt_used[j]) m.unmatched_gt.push_back(static_cast<int>(j));
  return m;
}

Matching greedy(const BoxList& pred, const BoxList& gt, double thresh) {
  std::vector<MatchPair> candidates;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double v = iou(pred[i], gt[j]);
      if (v >= thresh) candidates.push_back({static_cast<int>(i), static_cast<int>(j), v});
    }
  std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
    return std::tie(b.iou, a.pred, a.gt) < std::tie(a.iou, b.pred, b.gt);
  });
  std::vector<bool> pred_used(pred.size()), gt_used(gt.size());
  std::vector<MatchPair> pairs;
  for (const auto& c : candidates) {
    if (pred_used[static_cast<std::size_t>(c.pred)] || gt_used[static_cast<std::size_t>(c.gt)]) continue;
    pred_used[static_cast<std::size_t>(c.pred)] = gt_used[static_cast<std::size_t>(c.gt)] = true;
    pairs.push_back(c);
  }
  return finish(std::move(pairs), pred.size(), gt.size());
}

// Kuhn's augmenting-path maximum bipartite matching.
Matching optimal(const BoxList& pred, const BoxList& gt, double thresh) {
  std::vector<std::vector<int>> adj(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j)
      if (iou(pred[i], gt[j]) >= thresh) adj[i].push_back(static_cast<int>(j));

  std::vector<int> owner(gt.size(), -1);
  std::vector<bool> seen;
  std::function<bool(int)> augment = [&](int p) {
    for (int g : adj[static_cast<std::size_t>(p)]) {
      if (seen[static_cast<std::size_t>(g)]) continue;
      seen[static_cast<std::size_t>(g)] = true;
      if (owner[static_cast<std::size_t>(g)] < 0 || augment(owner[static_cast<std::size_t>(g)])) {
        owner[static_cast<std::size_t>(g)] = p;
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    seen.assign(gt.size(), false);
    augment(static_cast<int>(i));
  }

  std::vector<MatchPair> pairs;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const int p = owner[j];
    if (p >= 0) pairs.push_back({p, static_cast<int>(j), iou(pred[static_cast<std::size_t>(p)], gt[j])});
  }
  std::sort(pairs.begin(), pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.pred < b.pred; });
  return finish(std::move(pairs), pred.size(), gt.size());
}

}  // namespace

Matching match_boxes(const BoxList& pred, const BoxList& gt, double thresh, MatchMode mode) {
  return mode == MatchMode::kGreedy ? greedy(pred, gt, thresh) : optimal(pred, gt, thresh);
}

Metrics prf(int true_pos, int n_pred, int n_gt) {
  Metrics m;
  m.true_pos = true_pos;
  m.n_pred = n_pred;
  m.n_gt = n_gt;
  if (n_pred == 0) m.precision = (n_gt == 0) ? 1.0 : 0.0;
  else m.precision = static_cast<double>(true_pos) / n_pred;
  m.recall = (n_gt == 0) ? 1.0 : static_cast<double>(true_pos) / n_gt;
  const double sum = m.precision + m.recall;
  m.f_score = sum > 0 ? 2.0 * m.precision * m.recall / sum : 0.0;
  return m;
}

void EvaluationReport::add(std::string id, const BoxList& pred, const BoxList& gt, MatchMode mode) {
  const Matching m = match_boxes(pred, gt, iou_threshold, mode);
  documents.push_back({std::move(id), m.true_positives(), static_cast<int>(pred.size()),
                       static_cast<int>(gt.size())});
  int tp = 0, np = 0, ng = 0;
  for (const auto& d : documents) {
    tp += d.true_pos;
    np += d.n_pred;
    ng += d.n_gt;
  }
  pooled = prf(tp, np, ng);
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : documents)
    docs.push_back({{"id", d.id}, {"true_pos", d.true_pos}, {"n_pred", d.n_pred}, {"n_gt", d.n_gt}});
  return {{"iou_threshold", iou_threshold},
          {"documents", docs},
          {"pooled",
           {{"precision", pooled.precision},
            {"recall", pooled.recall},
            {"f_score", pooled.f_score},
            {"true_pos", pooled.true_pos},
            {"n_pred", pooled.n_pred},
            {"n_gt", pooled.n_gt}}}};
}

std::string EvaluationReport::to_csv() const {
  std::ostringstream os;
  os << "id,true_pos,n_pred,n_gt\n";
  for (const auto& d : documents) os << d.id << ',' << d.true_pos << ',' << d.n_pred << ',' << d.n_gt << '\n';
  return os.str();
}

}  // namespace duet
