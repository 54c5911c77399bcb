#include "qmireg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>

#include "qmireg/config.hpp"
#include "qmireg/dataset.hpp"
#include "qmireg/error.hpp"
#include "qmireg/heatmap.hpp"
#include "qmireg/rank_stats.hpp"
#include "qmireg/text_format.hpp"
#include "qmireg/trainer.hpp"

namespace qmireg::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream o(p, std::ios::trunc);
    if (!o) throw std::system_error(errno, std::generic_category(), "cannot write " + p.string());
    o << text;
}

struct SynthArgs {
    std::size_t size = 32;
    std::size_t train_count = 2000;
    std::size_t test_count = 500;
    std::uint64_t seed = 0;
    std::string out_dir;
};

struct TrainArgs {
    std::string train_path, test_path, out_dir, config_path, preset = "full";
    std::optional<std::string> variant, loss;
    std::optional<double> eta;
    std::optional<std::size_t> batch, epochs;
    std::optional<std::uint64_t> seed;
    bool no_regularizer = false;
    std::size_t runs = 1;
};

struct EvalArgs {
    std::string model_path, data_path;
};

struct HeatmapArgs {
    std::string model_path, image_path, out_prefix, policy = "diff";
    bool overlay = false;
};

struct BenchArgs {
    std::string model_path, variant = "rf32", out_path;
    std::size_t width = 1920, height = 1080, frames = 5, warmup = 1;
    std::uint64_t seed = 0;
};

struct RankArgs {
    std::string table_path, control, out_path, plot_path;
    std::optional<double> q_alpha;
    double alpha = 0.05;
};

int do_synth(const SynthArgs& a, std::ostream& out) {
    if (a.train_count % 2 || a.test_count % 2)
        throw InvalidConfig("sample counts must be even so classes stay balanced");
    fs::create_directories(a.out_dir);
    const auto tr = data::generate_synthetic({a.size, a.train_count / 2, a.seed});
    const auto te = data::generate_synthetic({a.size, a.test_count / 2, data::test_split_seed(a.seed)});
    data::write_packed(tr, fs::path(a.out_dir) / "train.pids");
    data::write_packed(te, fs::path(a.out_dir) / "test.pids");
    out << "wrote " << tr.size() << " training and " << te.size() << " test images ("
        << a.size << "x" << a.size << ") to " << a.out_dir << "\n";
    return kExitOk;
}

int do_train(const TrainArgs& a, std::ostream& out) {
    train::TrainConfig cfg;
    if (a.preset == "desk") cfg = train::TrainConfig::desk_scale();
    if (!a.config_path.empty()) cfg = config::parse_config(read_text(a.config_path), cfg);
    if (a.variant) config::set_option(cfg, "variant", *a.variant);
    if (a.loss) config::set_option(cfg, "loss", *a.loss);
    if (a.eta) cfg.eta = *a.eta;
    if (a.batch) cfg.batch_size = *a.batch;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.seed) cfg.seed = *a.seed;
    if (a.no_regularizer) cfg.regularizer = false;
    cfg.validate();
    if (a.runs == 0) throw InvalidConfig("--runs must be at least 1");

    const auto tr = data::load_packed(a.train_path);
    const auto te = data::load_packed(a.test_path);
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    write_text(dir / "config.txt", config::config_text(cfg));

    const auto result = train::repeated_experiment(cfg, tr, te, a.runs);
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        model::save_model(result.runs[r].model, dir / ("model_r" + std::to_string(r) + ".vggh"));
        write_text(dir / ("history_r" + std::to_string(r) + ".csv"),
                   train::history_csv(result.runs[r].history));
    }
    const std::string summary = train::summary_text(result.summary);
    write_text(dir / "summary.txt", summary);
    out << summary;
    return kExitOk;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
    const auto net = model::load_model(a.model_path);
    const auto ds = data::load_packed(a.data_path);
    out << "accuracy=" << text::format_double(train::evaluate(net, ds)) << "\n";
    return kExitOk;
}

int do_heatmap(const HeatmapArgs& a, std::ostream& out) {
    const auto policy = a.policy == "pos" ? heatmap::ChannelPolicy::Positive : heatmap::ChannelPolicy::Difference;
    const auto net = model::load_model(a.model_path);
    const auto img = data::read_ppm(a.image_path);
    const auto hm = heatmap::fully_conv_inference(net, data::image_to_tensor(img));
    heatmap::save_heatmap(hm, a.out_prefix + ".hmap");
    data::write_pgm(heatmap::render_heatmap(hm, policy), a.out_prefix + ".pgm");
    if (a.overlay) data::write_pgm(heatmap::render_overlay(hm, img, policy), a.out_prefix + "_overlay.pgm");
    out << "grid=" << hm.geometry.grid_h << "x" << hm.geometry.grid_w << " stride=" << hm.geometry.stride_px
        << " window=" << hm.geometry.window_px << "\n";
    return kExitOk;
}

int do_bench(const BenchArgs& a, std::ostream& out) {
    const auto net = a.model_path.empty() ? model::build_model(model::parse_variant(a.variant), a.seed)
                                          : model::load_model(a.model_path);
    const auto report = heatmap::benchmark_fps(net, a.width, a.height, a.frames, a.warmup);
    const std::string text = heatmap::bench_report_text(report);
    if (!a.out_path.empty()) write_text(a.out_path, text);
    out << text;
    return kExitOk;
}

int do_rank(const RankArgs& a, std::ostream& out) {
    const auto table = rank::parse_score_table(read_text(a.table_path));
    std::size_t control = 0;
    if (!a.control.empty()) {
        const auto it = std::find(table.methods.begin(), table.methods.end(), a.control);
        if (it == table.methods.end()) throw InvalidConfig("control method '" + a.control + "' not in table");
        control = static_cast<std::size_t>(it - table.methods.begin());
    }
    double q = 0.0;
    if (a.q_alpha) {
        q = *a.q_alpha;
    } else if (const auto tab = rank::bonferroni_dunn_q(table.methods.size(), a.alpha)) {
        q = *tab;
    } else {
        throw InvalidConfig("no tabulated critical value for this m/alpha; pass --q-alpha");
    }
    const auto result = rank::rank_methods(table, q, control);
    const std::string report = rank::ranking_report(table, result);
    if (!a.out_path.empty()) write_text(a.out_path, report);
    if (!a.plot_path.empty()) data::write_pgm(rank::render_rank_plot(table, result), a.plot_path);
    out << report;
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lightweight binary CNNs with a quadratic-mutual-information regularizer"};
    app.name(args.empty() ? "qmireg" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a balanced synthetic train/test pair");
    synth->add_option("--size", sa.size, "Image side (32 or 64)")->check(CLI::IsMember({32, 64}));
    synth->add_option("--train-count", sa.train_count, "Training images (even)");
    synth->add_option("--test-count", sa.test_count, "Test images (even)");
    synth->add_option("--seed", sa.seed, "Generator seed");
    synth->add_option("--out", sa.out_dir, "Output directory (train.pids, test.pids)")->required();

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Train k runs and write models, histories and a summary");
    trn->add_option("--train", ta.train_path, "Training set (.pids)")->required();
    trn->add_option("--test", ta.test_path, "Test set (.pids)")->required();
    trn->add_option("--out", ta.out_dir, "Output directory")->required();
    trn->add_option("--config", ta.config_path, "key=value config file");
    trn->add_option("--preset", ta.preset, "Base settings")->check(CLI::IsMember({"full", "desk"}));
    trn->add_option("--variant", ta.variant, "rf32 or rf64")->check(CLI::IsMember({"rf32", "rf64"}));
    trn->add_option("--loss", ta.loss, "hinge or ce")->check(CLI::IsMember({"hinge", "ce"}));
    trn->add_option("--eta", ta.eta, "Regularizer weight in [0,1]");
    trn->add_option("--batch", ta.batch, "Mini-batch size");
    trn->add_option("--epochs", ta.epochs, "Epochs per run");
    trn->add_option("--seed", ta.seed, "Seed of the first run");
    trn->add_option("--runs", ta.runs, "Repeated runs (seeds seed..seed+runs-1)");
    trn->add_flag("--no-regularizer", ta.no_regularizer, "Remove the J_MI gradient path");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Test accuracy of a model on a dataset");
    ev->add_option("--model", ea.model_path, "Model file (.vggh)")->required();
    ev->add_option("--data", ea.data_path, "Dataset (.pids)")->required();

    HeatmapArgs ha;
    auto* hm = app.add_subcommand("heatmap", "Full-frame heatmap of a PPM image");
    hm->add_option("--model", ha.model_path, "Model file (.vggh)")->required();
    hm->add_option("--image", ha.image_path, "Input image (binary PPM)")->required();
    hm->add_option("--out", ha.out_prefix, "Output prefix (.hmap, .pgm)")->required();
    hm->add_option("--policy", ha.policy, "diff (s_pos - s_neg) or pos")->check(CLI::IsMember({"diff", "pos"}));
    hm->add_flag("--overlay", ha.overlay, "Also write <prefix>_overlay.pgm");

    BenchArgs ba;
    auto* bn = app.add_subcommand("bench", "Full-frame inference throughput");
    bn->add_option("--model", ba.model_path, "Model file; random weights when omitted");
    bn->add_option("--variant", ba.variant, "Variant for random weights")->check(CLI::IsMember({"rf32", "rf64"}));
    bn->add_option("--seed", ba.seed, "Seed for random weights");
    bn->add_option("--width", ba.width, "Frame width");
    bn->add_option("--height", ba.height, "Frame height");
    bn->add_option("--frames", ba.frames, "Timed frames")->check(CLI::PositiveNumber);
    bn->add_option("--warmup", ba.warmup, "Untimed frames");
    bn->add_option("--out", ba.out_path, "Report file");

    RankArgs ra;
    auto* rk = app.add_subcommand("rank", "Bonferroni-Dunn ranking of methods over datasets");
    rk->add_option("--table", ra.table_path, "Score table (CSV)")->required();
    rk->add_option("--q-alpha", ra.q_alpha, "Critical value; tabulated when omitted");
    rk->add_option("--alpha", ra.alpha, "Significance level for the tabulated critical value");
    rk->add_option("--control", ra.control, "Control method name (default: first row)");
    rk->add_option("--out", ra.out_path, "Report file");
    rk->add_option("--plot", ra.plot_path, "Rank plot (PGM)");

    try {
        // CLI11 consumes the argument vector from the back.
        std::vector<std::string> rev;
        for (std::size_t i = args.size(); i > 1; --i) rev.push_back(args[i - 1]);
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return do_synth(sa, out);
        if (trn->parsed()) return do_train(ta, out);
        if (ev->parsed()) return do_eval(ea, out);
        if (hm->parsed()) return do_heatmap(ha, out);
        if (bn->parsed()) return do_bench(ba, out);
        if (rk->parsed()) return do_rank(ra, out);
    } catch (const InvalidConfig& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace qmireg::cli
