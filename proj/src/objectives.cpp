#include "qmireg/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qmireg/error.hpp"

namespace qmireg::objectives {

void ScoreBatch::validate() const {
    if (scores.size() != 2 * rows || labels.size() != rows)
        throw InvalidInput("score batch sizes inconsistent with " + std::to_string(rows) + " rows");
    for (std::size_t i = 0; i < rows; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw InvalidInput("label " + std::to_string(labels[i]) + " at sample " +
                               std::to_string(i) + " is not in {0,1}");
        if (!std::isfinite(scores[2 * i]) || !std::isfinite(scores[2 * i + 1]))
            throw InvalidInput("non-finite score at sample " + std::to_string(i));
    }
}

LossResult hinge_loss(const ScoreBatch& batch) {
    batch.validate();
    LossResult r{0.0, std::vector<float>(2 * batch.rows, 0.0f)};
    if (batch.rows == 0) return r;
    const float inv_n = 1.0f / static_cast<float>(batch.rows);
    double total = 0.0;
    for (std::size_t i = 0; i < batch.rows; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            const float t = static_cast<int>(k) == batch.labels[i] ? 1.0f : -1.0f;
            const float margin = 1.0f - t * batch.score(i, k);
            if (margin > 0.0f) {
                total += margin;
                r.grad[2 * i + k] = -t * inv_n;
            }
        }
    }
    r.loss = total / static_cast<double>(batch.rows);
    return r;
}

LossResult cross_entropy_loss(const ScoreBatch& batch) {
    batch.validate();
    LossResult r{0.0, std::vector<float>(2 * batch.rows, 0.0f)};
    if (batch.rows == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(batch.rows);
    double total = 0.0;
    for (std::size_t i = 0; i < batch.rows; ++i) {
        const double s0 = batch.score(i, 0), s1 = batch.score(i, 1);
        const double m = std::max(s0, s1);
        const double e0 = std::exp(s0 - m), e1 = std::exp(s1 - m);
        const double log_z = m + std::log(e0 + e1);
        const double p[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
        const auto y = static_cast<std::size_t>(batch.labels[i]);
        total += log_z - (y == 0 ? s0 : s1);
        for (std::size_t k = 0; k < 2; ++k)
            r.grad[2 * i + k] = static_cast<float>((p[k] - (k == y ? 1.0 : 0.0)) * inv_n);
    }
    r.loss = total * inv_n;
    return r;
}

LossResult classification_loss(LossKind kind, const ScoreBatch& batch) {
    return kind == LossKind::Hinge ? hinge_loss(batch) : cross_entropy_loss(batch);
}

void validate_eta(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw InvalidConfig("eta must lie in [0,1], got " + std::to_string(eta));
}

LossBundle total_loss(double j_class, double j_mi, double eta) {
    validate_eta(eta);
    return LossBundle{j_class, j_mi, eta, j_class + eta * j_mi};
}

} // namespace qmireg::objectives
