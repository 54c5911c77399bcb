#include "qmireg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qmireg/error.hpp"
#include "qmireg/qmi.hpp"
#include "qmireg/rng.hpp"
#include "qmireg/text_format.hpp"

namespace qmireg::train {

TrainConfig TrainConfig::desk_scale() {
    TrainConfig c;
    c.batch_size = 64;
    c.epochs = 10;
    return c;
}

void TrainConfig::validate() const {
    objectives::validate_eta(eta);
    if (batch_size == 0) throw InvalidConfig("batch_size must be positive");
    if (regularizer_active() && mi_scope == MiScope::MiniBatch && batch_size < 2)
        throw InvalidConfig("batch_size must be at least 2 when the regularizer is active");
    if (epochs == 0) throw InvalidConfig("epochs must be positive");
    if (!(lr_initial > 0.0) || !(lr_final > 0.0)) throw InvalidConfig("learning rates must be positive");
    if (!(lr_drop_fraction >= 0.0 && lr_drop_fraction <= 1.0))
        throw InvalidConfig("lr_drop_fraction must lie in [0,1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("momentum must lie in [0,1)");
}

double TrainConfig::learning_rate(std::size_t epoch) const {
    const auto drop_epoch =
        static_cast<std::size_t>(std::floor(lr_drop_fraction * static_cast<double>(epochs)));
    return epoch < drop_epoch ? lr_initial : lr_final;
}

namespace {

qmi::EmbeddingBatch embedding_batch(const nd::Tensor& embedding, std::span<const int> labels) {
    const std::size_t n = embedding.shape().n, d = embedding.shape().sample();
    std::vector<double> y(embedding.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = embedding[i];
    return qmi::EmbeddingBatch(n, d, std::move(y), std::vector<int>(labels.begin(), labels.end()));
}

objectives::ScoreBatch score_batch(const nd::Tensor& scores, std::span<const int> labels) {
    const nd::Shape& s = scores.shape();
    if (s.c != 2 || s.h != 1 || s.w != 1)
        throw InvalidInput("classifier output " + s.str() + " is not N x 2 x 1 x 1");
    return objectives::ScoreBatch{s.n, std::vector<float>(scores.values().begin(), scores.values().end()),
                                  std::vector<int>(labels.begin(), labels.end())};
}

void check_dataset(const data::PackedDataset& ds, model::Variant v, const char* what) {
    if (ds.size() == 0) throw InvalidInput(std::string(what) + " dataset is empty");
    const std::size_t win = model::window_size(v);
    if (ds.height != win || ds.width != win)
        throw InvalidInput(std::string(what) + " images are " + std::to_string(ds.width) + "x" +
                           std::to_string(ds.height) + ", variant " +
                           std::string(model::variant_name(v)) + " trains on " +
                           std::to_string(win) + "x" + std::to_string(win));
}

} // namespace

StepGradients training_gradients(const model::NetworkSpec& net, const nd::Tensor& images,
                                 std::span<const int> labels, const TrainConfig& config) {
    if (images.shape().n != labels.size())
        throw InvalidInput("batch has " + std::to_string(images.shape().n) + " images and " +
                           std::to_string(labels.size()) + " labels");
    const model::ForwardTrace trace = model::forward_trace(net, images);
    const auto loss = objectives::classification_loss(config.loss, score_batch(trace.scores, labels));

    StepGradients out;
    out.j_class = loss.loss;
    const nd::Tensor grad_scores(trace.scores.shape(), loss.grad);

    const qmi::EmbeddingBatch emb = embedding_batch(trace.embedding, labels);
    if (config.regularizer_active()) {
        const qmi::RegularizerValue reg = qmi::j_mi_with_gradient(emb);
        out.j_mi = reg.loss;
        nd::Tensor grad_emb(trace.embedding.shape());
        for (std::size_t i = 0; i < grad_emb.size(); ++i)
            grad_emb[i] = static_cast<float>(config.eta * reg.gradient[i]);
        out.grads = model::backward(net, trace, grad_scores, &grad_emb);
    } else {
        // J_MI is still recorded so baseline runs can be compared, but it
        // does not touch the gradients.
        out.j_mi = qmi::j_mi(qmi::potentials(emb));
        out.grads = model::backward(net, trace, grad_scores);
    }
    return out;
}

double evaluate(const model::NetworkSpec& net, const data::PackedDataset& dataset) {
    if (dataset.size() == 0) return 0.0;
    constexpr std::size_t kChunk = 256;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
        const std::size_t end = std::min(dataset.size(), start + kChunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const nd::Tensor scores = model::forward(net, data::to_tensor(dataset, idx));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const int pred = scores.at(i, 1, 0, 0) > scores.at(i, 0, 0, 0) ? 1 : 0;
            if (pred == dataset.labels[idx[i]]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainResult train(const TrainConfig& config, const data::PackedDataset& train_set,
                  const data::PackedDataset& test_set) {
    config.validate();
    check_dataset(train_set, config.variant, "training");
    check_dataset(test_set, config.variant, "test");

    TrainResult result{model::build_model(config.variant, config.seed), {}};
    model::NetworkSpec& net = result.model;

    std::vector<std::vector<float>> kernel_velocity, bias_velocity;
    for (const auto& layer : net.layers) {
        kernel_velocity.emplace_back(layer.conv.kernel.size(), 0.0f);
        bias_velocity.emplace_back(layer.conv.bias.size(), 0.0f);
    }

    const std::size_t n_train = train_set.size();
    const std::size_t batch =
        config.mi_scope == MiScope::Dataset ? n_train : std::min(config.batch_size, n_train);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(config.seed ^ 0x5DEECE66Dull);
    const auto momentum = static_cast<float>(config.momentum);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        const auto lr = static_cast<float>(config.learning_rate(epoch));
        double class_sum = 0.0, mi_sum = 0.0;
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min(batch, n_train - start));
            const std::vector<int> labels = data::labels_of(train_set, idx);
            const StepGradients step =
                training_gradients(net, data::to_tensor(train_set, idx), labels, config);
            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                auto& conv = net.layers[li].conv;
                nd::sgd_momentum_step<float>(conv.kernel.values(), step.grads.kernel[li].values(),
                                             kernel_velocity[li], lr, momentum);
                nd::sgd_momentum_step<float>(conv.bias, step.grads.bias[li], bias_velocity[li], lr,
                                             momentum);
            }
            class_sum += step.j_class * static_cast<double>(idx.size());
            mi_sum += step.j_mi * static_cast<double>(idx.size());
        }
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.j_class = class_sum / static_cast<double>(n_train);
        rec.j_mi = mi_sum / static_cast<double>(n_train);
        rec.test_accuracy = evaluate(net, test_set);
        result.history.max_test_accuracy =
            epoch == 0 ? rec.test_accuracy : std::max(result.history.max_test_accuracy, rec.test_accuracy);
        result.history.epochs.push_back(rec);
    }
    return result;
}

ExperimentSummary summarize(std::span<const double> max_accuracies) {
    if (max_accuracies.empty()) throw InvalidInput("cannot summarize zero runs");
    ExperimentSummary s;
    s.max_accuracies.assign(max_accuracies.begin(), max_accuracies.end());
    const double k = static_cast<double>(max_accuracies.size());
    s.mean = std::accumulate(max_accuracies.begin(), max_accuracies.end(), 0.0) / k;
    double var = 0.0;
    for (double a : max_accuracies) var += (a - s.mean) * (a - s.mean);
    s.std_dev = std::sqrt(var / k);
    return s;
}

ExperimentResult repeated_experiment(const TrainConfig& config, const data::PackedDataset& train_set,
                                     const data::PackedDataset& test_set, std::size_t k) {
    if (k == 0) throw InvalidConfig("number of runs must be at least 1");
    ExperimentResult out;
    out.runs.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        TrainConfig run_config = config;
        run_config.seed = config.seed + r;
        out.runs[r] = train(run_config, train_set, test_set);
    }
    std::vector<double> maxima;
    for (const auto& run : out.runs) maxima.push_back(run.history.max_test_accuracy);
    out.summary = summarize(maxima);
    return out;
}

std::string history_csv(const RunHistory& history) {
    std::string s = "epoch,j_class,j_mi,test_accuracy\n";
    for (const EpochRecord& r : history.epochs)
        s += std::to_string(r.epoch) + "," + text::format_double(r.j_class) + "," +
             text::format_double(r.j_mi) + "," + text::format_double(r.test_accuracy) + "\n";
    return s;
}

RunHistory parse_history_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "epoch,j_class,j_mi,test_accuracy")
        throw InvalidInput("history csv is missing its header row");
    RunHistory h;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest = line;
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
            f.push_back(rest.substr(0, pos));
        f.push_back(rest);
        if (f.size() != 4) throw InvalidInput("history row needs 4 fields: '" + line + "'");
        EpochRecord r{static_cast<std::size_t>(text::parse_unsigned(text::trim(f[0]))),
                      text::parse_double(text::trim(f[1])), text::parse_double(text::trim(f[2])),
                      text::parse_double(text::trim(f[3]))};
        h.max_test_accuracy = h.epochs.empty() ? r.test_accuracy : std::max(h.max_test_accuracy, r.test_accuracy);
        h.epochs.push_back(r);
    }
    return h;
}

std::string summary_text(const ExperimentSummary& summary) {
    std::string s = "runs=" + std::to_string(summary.max_accuracies.size()) + "\n";
    s += "mean=" + text::format_double(summary.mean) + "\n";
    s += "std=" + text::format_double(summary.std_dev) + "\n";
    for (std::size_t i = 0; i < summary.max_accuracies.size(); ++i)
        s += "run" + std::to_string(i) + "=" + text::format_double(summary.max_accuracies[i]) + "\n";
    return s;
}

ExperimentSummary parse_summary_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    ExperimentSummary s;
    std::size_t runs = 0;
    bool have_runs = false;
    while (std::getline(in, line)) {
        const std::string_view l = text::trim(line);
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos) throw InvalidInput("summary line without '=': '" + line + "'");
        const std::string_view key = l.substr(0, eq), val = l.substr(eq + 1);
        if (key == "runs") {
            runs = text::parse_unsigned(val);
            have_runs = true;
            s.max_accuracies.assign(runs, 0.0);
        } else if (key == "mean") {
            s.mean = text::parse_double(val);
        } else if (key == "std") {
            s.std_dev = text::parse_double(val);
        } else if (key.starts_with("run")) {
            const auto i = text::parse_unsigned(key.substr(3));
            if (!have_runs || i >= runs) throw InvalidInput("summary entry '" + line + "' out of range");
            s.max_accuracies[i] = text::parse_double(val);
        } else {
            throw InvalidInput("unknown summary key '" + std::string(key) + "'");
        }
    }
    if (!have_runs) throw InvalidInput("summary is missing 'runs'");
    return s;
}

} // namespace qmireg::train
