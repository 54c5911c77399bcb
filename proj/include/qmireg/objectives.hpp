#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qmireg::objectives {

/// N x 2 class scores (row-major, channel k scores class k) and labels in {0,1}.
struct ScoreBatch {
    std::size_t rows = 0;
    std::vector<float> scores;
    std::vector<int> labels;

    float score(std::size_t i, std::size_t k) const { return scores[2 * i + k]; }
    void validate() const;
};

struct LossResult {
    double loss = 0.0;
    std::vector<float> grad;  // N x 2, gradient of the batch-mean loss
};

/// One-vs-all L1 hinge summed over both channels, averaged over the batch.
/// The subgradient at the hinge point (margin exactly 1) is zero.
LossResult hinge_loss(const ScoreBatch& batch);

/// Softmax over the two channels followed by negative log-likelihood, batch mean.
LossResult cross_entropy_loss(const ScoreBatch& batch);

enum class LossKind { Hinge, CrossEntropy };

LossResult classification_loss(LossKind kind, const ScoreBatch& batch);

inline constexpr double kDefaultEta = 0.001;

struct LossBundle {
    double j_class = 0.0;
    double j_mi = 0.0;
    double eta = kDefaultEta;
    double j_total = 0.0;
};

/// j_total = j_class + eta * j_mi. Throws InvalidConfig unless 0 <= eta <= 1.
LossBundle total_loss(double j_class, double j_mi, double eta = kDefaultEta);

void validate_eta(double eta);

} // namespace qmireg::objectives
