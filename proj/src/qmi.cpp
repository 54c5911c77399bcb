#include "qmireg/qmi.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "qmireg/error.hpp"

namespace qmireg::qmi {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw InvalidInput("kernel arguments differ in dimension: " + std::to_string(a.size()) +
                           " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::array<std::size_t, 2> count_classes(std::span<const int> labels) {
    std::array<std::size_t, 2> counts{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw InvalidInput("label " + std::to_string(labels[i]) + " at sample " +
                               std::to_string(i) + " is not in {0,1}");
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    return counts;
}

} // namespace

EmbeddingBatch::EmbeddingBatch(std::size_t n, std::size_t d, std::vector<double> y,
                               std::vector<int> c)
    : rows(n), dim(d), values(std::move(y)), labels(std::move(c)) {
    validate();
}

void EmbeddingBatch::validate() const {
    if (rows == 0) throw InvalidInput("embedding batch is empty");
    if (values.size() != rows * dim)
        throw InvalidInput("embedding values length " + std::to_string(values.size()) +
                           " != N*d = " + std::to_string(rows * dim));
    if (labels.size() != rows)
        throw InvalidInput("embedding batch has " + std::to_string(labels.size()) +
                           " labels for " + std::to_string(rows) + " rows");
    count_classes(labels);
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw InvalidInput("non-finite embedding value in row " + std::to_string(i / dim));
}

double kernel_ed(std::span<const double> a, std::span<const double> b) {
    return 1.0 / (1.0 + squared_distance(a, b));
}

double kernel_gaussian(std::span<const double> a, std::span<const double> b, double sigma) {
    if (!(sigma > 0.0)) throw InvalidInput("gaussian kernel width must be positive");
    return std::exp(-squared_distance(a, b) / (2.0 * sigma * sigma));
}

double kernel_value(std::span<const double> a, std::span<const double> b, const KernelChoice& k) {
    return k.kind == KernelKind::Gaussian ? kernel_gaussian(a, b, k.sigma) : kernel_ed(a, b);
}

KernelMatrix pairwise_kernel(const EmbeddingBatch& batch, const KernelChoice& kernel) {
    batch.validate();
    if (kernel.kind == KernelKind::Gaussian && !(kernel.sigma > 0.0))
        throw InvalidInput("gaussian kernel width must be positive");
    const std::size_t n = batch.rows;
    KernelMatrix k{n, std::vector<double>(n * n)};
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        k.values[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = kernel_value(batch.row(i), batch.row(j), kernel);
            k.values[i * n + j] = v;
            k.values[j * n + i] = v;
        }
    }
    return k;
}

InformationPotentials information_potentials(const KernelMatrix& k, std::span<const int> labels) {
    const std::size_t n = k.n;
    if (labels.size() != n)
        throw InvalidInput("got " + std::to_string(labels.size()) + " labels for a " +
                           std::to_string(n) + "x" + std::to_string(n) + " kernel matrix");
    if (n == 0) throw InvalidInput("kernel matrix is empty");
    InformationPotentials p;
    p.class_counts = count_classes(labels);

    double total = 0.0;
    std::array<double, 2> within{};   // sum over k,l in class p of K
    std::array<double, 2> vs_all{};   // sum over j in class p, all k of K
    for (std::size_t i = 0; i < n; ++i) {
        const auto ci = static_cast<std::size_t>(labels[i]);
        double row_all = 0.0, row_same = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = k.values[i * n + j];
            row_all += v;
            if (static_cast<std::size_t>(labels[j]) == ci) row_same += v;
        }
        total += row_all;
        vs_all[ci] += row_all;
        within[ci] += row_same;
    }

    const double nn = static_cast<double>(n);
    const double inv_n2 = 1.0 / (nn * nn);
    const double j1 = static_cast<double>(p.class_counts[0]);
    const double j2 = static_cast<double>(p.class_counts[1]);
    p.v_in = inv_n2 * (within[0] + within[1]);
    p.v_all = inv_n2 * ((j1 * j1 + j2 * j2) / (nn * nn)) * total;
    p.v_btw = inv_n2 * ((j1 / nn) * vs_all[0] + (j2 / nn) * vs_all[1]);
    return p;
}

double qmi_estimate(const InformationPotentials& p) { return p.v_in + p.v_all - 2.0 * p.v_btw; }

double j_mi(const InformationPotentials& p) { return -(p.v_in + p.v_all); }

InformationPotentials potentials(const EmbeddingBatch& batch, const KernelChoice& kernel) {
    return information_potentials(pairwise_kernel(batch, kernel), batch.labels);
}

RegularizerValue j_mi_with_gradient(const EmbeddingBatch& batch, const KernelChoice& kernel) {
    if (kernel.kind != KernelKind::EuclideanSimilarity)
        throw Unsupported("closed-form J_MI gradient is only available for the Euclidean "
                          "similarity kernel");
    const KernelMatrix k = pairwise_kernel(batch, kernel);
    RegularizerValue r;
    r.potentials = information_potentials(k, batch.labels);
    r.loss = j_mi(r.potentials);

    const std::size_t n = batch.rows, d = batch.dim;
    const double nn = static_cast<double>(n);
    const double j1 = static_cast<double>(r.potentials.class_counts[0]);
    const double j2 = static_cast<double>(r.potentials.class_counts[1]);
    const double prior_sq = (j1 * j1 + j2 * j2) / (nn * nn);
    const double scale = 4.0 / (nn * nn);

    r.gradient.assign(n * d, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        double* gi = r.gradient.data() + i * d;
        const double* yi = batch.values.data() + i * d;
        for (std::size_t l = 0; l < n; ++l) {
            if (l == i) continue;
            const double kil = k.values[i * n + l];
            const double weight =
                scale * kil * kil * (prior_sq + (batch.labels[l] == batch.labels[i] ? 1.0 : 0.0));
            const double* yl = batch.values.data() + l * d;
            for (std::size_t t = 0; t < d; ++t) gi[t] += weight * (yi[t] - yl[t]);
        }
    }
    return r;
}

std::vector<double> j_mi_gradient(const EmbeddingBatch& batch, const KernelChoice& kernel) {
    return j_mi_with_gradient(batch, kernel).gradient;
}

} // namespace qmireg::qmi
