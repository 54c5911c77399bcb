#pragma once

// Quadratic-mutual-information regularizer: pairwise kernel, the three
// information potentials estimated by kernel density plug-in, the QMI
// estimate, the regularization loss J_MI = -(V_IN + V_ALL) and its closed-form
// gradient with respect to the embeddings.
//
// Everything here is double precision and independent of the tensor kernels;
// the trainer converts float activations on the way in and out.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace qmireg::qmi {

/// N x d embeddings (row-major) plus one binary label per row.
struct EmbeddingBatch {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values;
    std::vector<int> labels;

    EmbeddingBatch() = default;
    EmbeddingBatch(std::size_t n, std::size_t d, std::vector<double> y, std::vector<int> c);

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * dim, dim);
    }

    /// Throws InvalidInput on size mismatch, N == 0, labels outside {0,1} or non-finite rows.
    void validate() const;
};

enum class KernelKind { EuclideanSimilarity, Gaussian };

/// Kernel selection. The Euclidean similarity kernel takes no width; `sigma`
/// only applies to the Gaussian kernel.
struct KernelChoice {
    KernelKind kind = KernelKind::EuclideanSimilarity;
    double sigma = 1.0;

    static KernelChoice euclidean() { return {}; }
    static KernelChoice gaussian(double sigma) { return {KernelKind::Gaussian, sigma}; }
};

/// 1 / (1 + ||a - b||^2)
double kernel_ed(std::span<const double> a, std::span<const double> b);

/// exp(-||a - b||^2 / (2 sigma^2)); sigma must be positive.
double kernel_gaussian(std::span<const double> a, std::span<const double> b, double sigma);

double kernel_value(std::span<const double> a, std::span<const double> b, const KernelChoice& k);

/// Symmetric N x N similarity matrix, row-major.
struct KernelMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

KernelMatrix pairwise_kernel(const EmbeddingBatch& batch,
                             const KernelChoice& kernel = KernelChoice::euclidean());

struct InformationPotentials {
    double v_in = 0.0;
    double v_all = 0.0;
    double v_btw = 0.0;
    std::array<std::size_t, 2> class_counts{};  // (J_1, J_2); sums to N
};

/// Binary-class plug-in estimates of V_IN, V_ALL and V_BTW. An empty class
/// contributes zero to its sums.
InformationPotentials information_potentials(const KernelMatrix& k, std::span<const int> labels);

/// V_IN + V_ALL - 2 V_BTW
double qmi_estimate(const InformationPotentials& p);

/// -(V_IN + V_ALL)
double j_mi(const InformationPotentials& p);

/// Potentials of a batch in one call.
InformationPotentials potentials(const EmbeddingBatch& batch,
                                 const KernelChoice& kernel = KernelChoice::euclidean());

struct RegularizerValue {
    InformationPotentials potentials;
    double loss = 0.0;              // J_MI
    std::vector<double> gradient;   // N x d, dJ_MI / dy
};

/// J_MI and its exact gradient for the Euclidean similarity kernel:
///   dJ_MI/dy_i = (4/N^2) sum_l K_il^2 (y_i - y_l) (a + [c_l == c_i]),
///   a = (J_1^2 + J_2^2) / N^2.
/// Rows of the gradient sum to zero. Throws Unsupported for other kernels.
RegularizerValue j_mi_with_gradient(const EmbeddingBatch& batch,
                                    const KernelChoice& kernel = KernelChoice::euclidean());

std::vector<double> j_mi_gradient(const EmbeddingBatch& batch,
                                  const KernelChoice& kernel = KernelChoice::euclidean());

} // namespace qmireg::qmi
