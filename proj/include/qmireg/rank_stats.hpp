#pragma once

// Bonferroni-Dunn post-hoc comparison of m methods against a control over D
// datasets: average ranks, critical difference, and per-method verdicts.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qmireg/dataset.hpp"

namespace qmireg::rank {

/// m x D accuracy matrix; higher is better.
struct ScoreTable {
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    std::vector<double> scores;  // row-major, one row per method

    double at(std::size_t method, std::size_t dataset) const {
        return scores[method * datasets.size() + dataset];
    }
    /// Throws InvalidInput unless m >= 2, D >= 1, sizes agree and scores lie in [0,1].
    void validate() const;
};

/// Header row: a label cell, then dataset names. Each further row: method
/// name, then one score per dataset.
ScoreTable parse_score_table(const std::string& csv);

/// Rank 1 = best; tied scores share the average of the ranks they span.
std::vector<double> dataset_ranks(const ScoreTable& table, std::size_t dataset);
std::vector<double> average_ranks(const ScoreTable& table);

/// q * sqrt(m (m + 1) / (6 D))
double critical_difference(std::size_t m, std::size_t d, double q_alpha);

/// Two-tailed Bonferroni-Dunn critical value z_{1 - alpha / (2 (m - 1))},
/// tabulated to three decimals for alpha in {0.05, 0.10} and m = 2..10.
std::optional<double> bonferroni_dunn_q(std::size_t m, double alpha);

struct Verdict {
    std::size_t method = 0;
    double rank_gap = 0.0;  // |rank_i - rank_control|
    bool significant = false;
};

/// Method i differs from the control iff |rank_i - rank_control| >= cd, i.e.
/// the intervals rank +- cd/2 do not overlap.
std::vector<Verdict> significance(std::span<const double> ranks, double cd, std::size_t control);

struct RankingResult {
    std::vector<double> mean_ranks;
    double q_alpha = 0.0;
    double cd = 0.0;
    std::size_t control = 0;
    std::vector<Verdict> verdicts;  // one per non-control method
};

RankingResult rank_methods(const ScoreTable& table, double q_alpha, std::size_t control = 0);

std::string ranking_report(const ScoreTable& table, const RankingResult& result);

/// One row per method: a bar spanning rank +- cd/2 with a marker at the mean rank.
data::GrayImage render_rank_plot(const ScoreTable& table, const RankingResult& result);

} // namespace qmireg::rank
