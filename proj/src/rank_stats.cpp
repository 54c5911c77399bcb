#include "qmireg/rank_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qmireg/error.hpp"
#include "qmireg/text_format.hpp"

namespace qmireg::rank {

void ScoreTable::validate() const {
    if (methods.size() < 2) throw InvalidInput("score table needs at least two methods");
    if (datasets.empty()) throw InvalidInput("score table needs at least one dataset");
    if (scores.size() != methods.size() * datasets.size())
        throw InvalidInput("score table has " + std::to_string(scores.size()) + " scores for " +
                           std::to_string(methods.size()) + " methods x " +
                           std::to_string(datasets.size()) + " datasets");
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
            throw InvalidInput("score for method '" + methods[i / datasets.size()] + "' on '" +
                               datasets[i % datasets.size()] + "' is outside [0,1]");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string_view rest = line;
    for (;;) {
        const auto pos = rest.find(',');
        out.emplace_back(text::trim(rest.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
    }
    return out;
}

} // namespace

ScoreTable parse_score_table(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    ScoreTable t;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty() || text::trim(line).starts_with('#')) continue;
        auto cells = split_csv_line(line);
        if (header) {
            if (cells.size() < 2) throw InvalidInput("score table header needs at least one dataset");
            t.datasets.assign(cells.begin() + 1, cells.end());
            header = false;
            continue;
        }
        if (cells.size() != t.datasets.size() + 1)
            throw InvalidInput("line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size() - 1) + " scores, expected " +
                               std::to_string(t.datasets.size()));
        t.methods.push_back(cells[0]);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            try {
                t.scores.push_back(text::parse_double(cells[j]));
            } catch (const InvalidInput&) {
                throw InvalidInput("line " + std::to_string(line_no) + ": '" + cells[j] +
                                   "' is not a number");
            }
        }
    }
    t.validate();
    return t;
}

std::vector<double> dataset_ranks(const ScoreTable& table, std::size_t dataset) {
    const std::size_t m = table.methods.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return table.at(a, dataset) > table.at(b, dataset);
    });
    std::vector<double> ranks(m);
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        while (j + 1 < m && table.at(order[j + 1], dataset) == table.at(order[i], dataset)) ++j;
        // Positions i..j (0-based) hold ranks i+1..j+1.
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::vector<double> average_ranks(const ScoreTable& table) {
    table.validate();
    std::vector<double> mean(table.methods.size(), 0.0);
    for (std::size_t d = 0; d < table.datasets.size(); ++d) {
        const auto r = dataset_ranks(table, d);
        for (std::size_t i = 0; i < r.size(); ++i) mean[i] += r[i];
    }
    for (double& v : mean) v /= static_cast<double>(table.datasets.size());
    return mean;
}

double critical_difference(std::size_t m, std::size_t d, double q_alpha) {
    if (m < 2) throw InvalidInput("critical difference needs m >= 2");
    if (d < 1) throw InvalidInput("critical difference needs D >= 1");
    if (!(q_alpha >= 0.0)) throw InvalidInput("q_alpha must be non-negative");
    const double md = static_cast<double>(m);
    return q_alpha * std::sqrt(md * (md + 1.0) / (6.0 * static_cast<double>(d)));
}

std::optional<double> bonferroni_dunn_q(std::size_t m, double alpha) {
    static constexpr double q05[] = {1.960, 2.241, 2.394, 2.498, 2.576, 2.638, 2.690, 2.724, 2.773};
    static constexpr double q10[] = {1.645, 1.960, 2.128, 2.241, 2.326, 2.394, 2.450, 2.498, 2.539};
    if (m < 2 || m > 10) return std::nullopt;
    if (alpha == 0.05) return q05[m - 2];
    if (alpha == 0.10) return q10[m - 2];
    return std::nullopt;
}

std::vector<Verdict> significance(std::span<const double> ranks, double cd, std::size_t control) {
    if (control >= ranks.size()) throw InvalidInput("control index out of range");
    std::vector<Verdict> out;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (i == control) continue;
        const double gap = std::abs(ranks[i] - ranks[control]);
        // A zero gap is never significant, even when cd is zero.
        out.push_back(Verdict{i, gap, gap > 0.0 && gap >= cd});
    }
    return out;
}

RankingResult rank_methods(const ScoreTable& table, double q_alpha, std::size_t control) {
    RankingResult r;
    r.mean_ranks = average_ranks(table);
    r.q_alpha = q_alpha;
    r.cd = critical_difference(table.methods.size(), table.datasets.size(), q_alpha);
    r.control = control;
    r.verdicts = significance(r.mean_ranks, r.cd, control);
    return r;
}

std::string ranking_report(const ScoreTable& table, const RankingResult& result) {
    std::ostringstream o;
    o << "methods=" << table.methods.size() << "\n";
    o << "datasets=" << table.datasets.size() << "\n";
    o << "q_alpha=" << text::format_double(result.q_alpha) << "\n";
    o << "cd=" << text::format_double(result.cd) << "\n";
    o << "control=" << table.methods[result.control] << "\n";
    for (std::size_t i = 0; i < table.methods.size(); ++i)
        o << "rank[" << table.methods[i] << "]=" << text::format_double(result.mean_ranks[i]) << "\n";
    for (const Verdict& v : result.verdicts)
        o << "verdict[" << table.methods[v.method] << "]="
          << (v.significant ? "significantly different" : "not significantly different")
          << " (rank gap " << text::format_double(v.rank_gap) << ")\n";
    return o.str();
}

data::GrayImage render_rank_plot(const ScoreTable& table, const RankingResult& result) {
    constexpr std::size_t kWidth = 400, kRowHeight = 24, kMargin = 20;
    const std::size_t m = table.methods.size();
    data::GrayImage img{kWidth, m * kRowHeight + 2 * kMargin,
                        std::vector<std::uint8_t>(kWidth * (m * kRowHeight + 2 * kMargin), 255)};
    // Horizontal axis spans ranks [0.5, m + 0.5] widened to fit every interval.
    double lo = 0.5, hi = static_cast<double>(m) + 0.5;
    for (double r : result.mean_ranks) {
        lo = std::min(lo, r - result.cd / 2.0);
        hi = std::max(hi, r + result.cd / 2.0);
    }
    auto to_x = [&](double rank) {
        const double t = (rank - lo) / (hi - lo);
        return static_cast<std::size_t>(std::lround(static_cast<double>(kMargin) +
                                                    t * static_cast<double>(kWidth - 2 * kMargin - 1)));
    };
    auto set = [&](std::size_t x, std::size_t y, std::uint8_t v) {
        if (x < img.width && y < img.height) img.pixels[y * img.width + x] = v;
    };
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t y = kMargin + i * kRowHeight + kRowHeight / 2;
        const double r = result.mean_ranks[i];
        const std::uint8_t shade = i == result.control ? 96 : 0;
        for (std::size_t x = to_x(r - result.cd / 2.0); x <= to_x(r + result.cd / 2.0); ++x) set(x, y, shade);
        const std::size_t cx = to_x(r);
        for (std::size_t dy = 0; dy < 7; ++dy)
            for (std::size_t dx = 0; dx < 7; ++dx) set(cx + dx - 3, y + dy - 3, shade);
    }
    return img;
}

} // namespace qmireg::rank
