#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qmireg/dataset.hpp"
#include "qmireg/network.hpp"
#include "qmireg/objectives.hpp"

namespace qmireg::train {

/// Where the regularizer's information potentials are estimated. `Dataset`
/// estimates them over the whole training set, which makes every step a
/// full-batch step; only sensible for small sets.
enum class MiScope { MiniBatch, Dataset };

struct TrainConfig {
    model::Variant variant = model::Variant::RF32;
    objectives::LossKind loss = objectives::LossKind::Hinge;
    double eta = objectives::kDefaultEta;  // 0 turns the regularizer term off
    bool regularizer = true;               // false removes the J_MI gradient path entirely
    MiScope mi_scope = MiScope::MiniBatch;
    std::size_t batch_size = 256;
    std::size_t epochs = 100;
    double lr_initial = 1e-3;
    double lr_final = 1e-4;
    double lr_drop_fraction = 0.8;  // single step drop after this share of epochs
    double momentum = 0.9;
    std::uint64_t seed = 0;

    /// Small-budget settings: batch 64, 10 epochs.
    static TrainConfig desk_scale();

    /// Throws InvalidConfig.
    void validate() const;
    double learning_rate(std::size_t epoch) const;  // epoch is 0-based
    bool regularizer_active() const { return regularizer && eta > 0.0; }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double j_class = 0.0;
    double j_mi = 0.0;
    double test_accuracy = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunHistory {
    std::vector<EpochRecord> epochs;
    double max_test_accuracy = 0.0;

    friend bool operator==(const RunHistory&, const RunHistory&) = default;
};

struct StepGradients {
    model::ModelGradients grads;
    double j_class = 0.0;
    double j_mi = 0.0;
};

/// Loss and parameter gradients of one mini-batch: the classification
/// gradient enters at the head, eta * dJ_MI/dy at the embedding layer.
StepGradients training_gradients(const model::NetworkSpec& net, const nd::Tensor& images,
                                 std::span<const int> labels, const TrainConfig& config);

struct TrainResult {
    model::TrainedModel model;
    RunHistory history;
};

/// Throws InvalidInput for empty datasets or images that do not match the
/// variant's window size.
TrainResult train(const TrainConfig& config, const data::PackedDataset& train_set,
                  const data::PackedDataset& test_set);

/// Fraction of samples whose argmax channel equals the label (ties pick class 0).
double evaluate(const model::NetworkSpec& net, const data::PackedDataset& dataset);

struct ExperimentSummary {
    std::vector<double> max_accuracies;
    double mean = 0.0;
    double std_dev = 0.0;  // population

    friend bool operator==(const ExperimentSummary&, const ExperimentSummary&) = default;
};

ExperimentSummary summarize(std::span<const double> max_accuracies);

struct ExperimentResult {
    std::vector<TrainResult> runs;
    ExperimentSummary summary;
};

/// k runs with seeds seed, seed+1, ..., seed+k-1.
ExperimentResult repeated_experiment(const TrainConfig& config, const data::PackedDataset& train_set,
                                     const data::PackedDataset& test_set, std::size_t k = 5);

/// "epoch,j_class,j_mi,test_accuracy" then one row per epoch.
std::string history_csv(const RunHistory& history);
RunHistory parse_history_csv(const std::string& text);

/// key=value lines: runs, mean, std, run<i>.
std::string summary_text(const ExperimentSummary& summary);
ExperimentSummary parse_summary_text(const std::string& text);

} // namespace qmireg::train
