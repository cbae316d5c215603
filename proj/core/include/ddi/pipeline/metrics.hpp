#pragma once

#include <vector>

namespace ddi::pipeline {

// Rank-based AUC (Mann-Whitney U with average ranks for ties).
// Throws SingleClassInput unless both classes are present.
double roc_auc(const std::vector<double> &scores, const std::vector<int> &labels);

double accuracy(const std::vector<int> &pred, const std::vector<int> &truth);

// F1 of the positive class for binary predictions in {0,1}.
double f1_binary(const std::vector<int> &pred, const std::vector<int> &truth);

// Unweighted mean of per-class F1 over classes present in truth or
// predictions; per-class zero divisions count as 0.
double f1_macro(const std::vector<int> &pred, const std::vector<int> &truth,
                int n_classes = 86);

// Support-weighted mean of per-class F1 (weights = true support).
double f1_weighted(const std::vector<int> &pred, const std::vector<int> &truth,
                   int n_classes = 86);

}  // namespace ddi::pipeline
