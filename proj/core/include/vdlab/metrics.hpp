#pragma once

#include <span>
#include <utility>
#include <vector>

namespace vdlab {

// (score in [0,1], binary label) pairs.
struct ScoredSet {
    std::vector<std::pair<double, int>> items;

    void add(double score, int label) { items.emplace_back(score, label); }
    std::size_t size() const { return items.size(); }
};

// Mann-Whitney statistic with 0.5 credit for ties, computed by sort-and-rank
// in O(n log n). Requires at least one positive and one negative.
double roc_auc(const ScoredSet& set);

// Positive-class F1 with the inclusive rule: score >= threshold predicts 1.
double f1_at(const ScoredSet& set, double threshold);

struct ThresholdResult {
    double threshold = 0.5;
    double f1 = 0.0;
};

// Scans midpoints between consecutive distinct sorted scores plus {0,1};
// returns the smallest threshold maximizing positive-class F1.
ThresholdResult optimal_threshold(const ScoredSet& validation);

}  // namespace vdlab
