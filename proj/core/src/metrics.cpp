#include "vdlab/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace vdlab {

namespace {
void check_both_classes(const ScoredSet& set, const char* who) {
    std::size_t pos = 0, neg = 0;
    for (auto& [s, y] : set.items) {
        if (y != 0 && y != 1) throw std::invalid_argument(std::string(who) + ": label outside {0,1}");
        (y == 1 ? pos : neg)++;
    }
    if (pos == 0 || neg == 0)
        throw std::invalid_argument(std::string(who) + ": both classes must be present (" +
                                    std::to_string(pos) + " positive, " + std::to_string(neg) +
                                    " negative)");
}
}  // namespace

double roc_auc(const ScoredSet& set) {
    check_both_classes(set, "roc_auc");
    std::vector<std::pair<double, int>> items = set.items;
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double pos = 0, neg = 0, rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].first == items[i].first) ++j;
        // average rank of the tie group, 1-based
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (items[k].second == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    for (auto& [s, y] : items) (y == 1 ? pos : neg) += 1.0;
    const double u = rank_sum_pos - pos * (pos + 1.0) / 2.0;
    return u / (pos * neg);
}

double f1_at(const ScoredSet& set, double threshold) {
    double tp = 0, fp = 0, fn = 0;
    for (auto& [s, y] : set.items) {
        const bool pred = s >= threshold;
        if (pred && y == 1) ++tp;
        else if (pred && y == 0) ++fp;
        else if (!pred && y == 1) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    if (denom == 0.0) return 0.0;
    return 2.0 * tp / denom;
}

ThresholdResult optimal_threshold(const ScoredSet& validation) {
    check_both_classes(validation, "optimal_threshold");
    std::vector<double> scores;
    scores.reserve(validation.size());
    for (auto& [s, y] : validation.items) scores.push_back(s);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

    std::vector<double> candidates{0.0, 1.0};
    for (std::size_t i = 0; i + 1 < scores.size(); ++i)
        candidates.push_back(0.5 * (scores[i] + scores[i + 1]));
    std::sort(candidates.begin(), candidates.end());

    ThresholdResult best{candidates.front(), f1_at(validation, candidates.front())};
    for (double t : candidates) {
        const double f1 = f1_at(validation, t);
        if (f1 > best.f1) best = {t, f1};
    }
    return best;
}

}  // namespace vdlab
