#include "ddi/pipeline/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ddi/errors.hpp"

namespace ddi::pipeline {

double roc_auc(const std::vector<double> &scores, const std::vector<int> &labels) {
  if (scores.size() != labels.size())
    throw ShapeMismatch("roc_auc scores vs labels");
  if (scores.empty()) throw EmptyInput("roc_auc");
  std::size_t n = scores.size();
  long n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw SingleClassInput("roc_auc needs positives and negatives");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // average ranks over tie groups (1-based ranks)
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k] == 1) rank_sum_pos += rank[k];
  double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy(const std::vector<int> &pred, const std::vector<int> &truth) {
  if (pred.size() != truth.size()) throw ShapeMismatch("accuracy");
  if (pred.empty()) throw EmptyInput("accuracy");
  long correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += (pred[i] == truth[i]);
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

double class_f1(const std::vector<int> &pred, const std::vector<int> &truth,
                int cls) {
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == cls && truth[i] == cls) ++tp;
    else if (pred[i] == cls) ++fp;
    else if (truth[i] == cls) ++fn;
  }
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace

double f1_binary(const std::vector<int> &pred, const std::vector<int> &truth) {
  if (pred.size() != truth.size()) throw ShapeMismatch("f1_binary");
  if (pred.empty()) throw EmptyInput("f1_binary");
  return class_f1(pred, truth, 1);
}

double f1_macro(const std::vector<int> &pred, const std::vector<int> &truth,
                int n_classes) {
  if (pred.size() != truth.size()) throw ShapeMismatch("f1_macro");
  if (pred.empty()) throw EmptyInput("f1_macro");
  double sum = 0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    bool in_truth = std::find(truth.begin(), truth.end(), c) != truth.end();
    bool in_pred = std::find(pred.begin(), pred.end(), c) != pred.end();
    if (!in_truth && !in_pred) continue;
    sum += class_f1(pred, truth, c);
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

double f1_weighted(const std::vector<int> &pred, const std::vector<int> &truth,
                   int n_classes) {
  if (pred.size() != truth.size()) throw ShapeMismatch("f1_weighted");
  if (pred.empty()) throw EmptyInput("f1_weighted");
  double sum = 0;
  long total_support = 0;
  for (int c = 0; c < n_classes; ++c) {
    long support = std::count(truth.begin(), truth.end(), c);
    if (support == 0) continue;
    sum += static_cast<double>(support) * class_f1(pred, truth, c);
    total_support += support;
  }
  return total_support == 0 ? 0.0 : sum / static_cast<double>(total_support);
}

}  // namespace ddi::pipeline
