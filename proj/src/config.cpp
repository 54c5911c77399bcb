#include "qmireg/config.hpp"

#include <sstream>

#include "qmireg/error.hpp"
#include "qmireg/text_format.hpp"

namespace qmireg::config {

void set_option(train::TrainConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "variant") {
            c.variant = model::parse_variant(value);
        } else if (key == "loss") {
            if (value == "hinge") c.loss = objectives::LossKind::Hinge;
            else if (value == "ce" || value == "cross_entropy") c.loss = objectives::LossKind::CrossEntropy;
            else throw InvalidConfig("loss must be hinge or ce");
        } else if (key == "eta") {
            c.eta = text::parse_double(value);
        } else if (key == "regularizer") {
            if (value == "on") c.regularizer = true;
            else if (value == "off") c.regularizer = false;
            else throw InvalidConfig("regularizer must be on or off");
        } else if (key == "mi_scope") {
            if (value == "minibatch") c.mi_scope = train::MiScope::MiniBatch;
            else if (value == "dataset") c.mi_scope = train::MiScope::Dataset;
            else throw InvalidConfig("mi_scope must be minibatch or dataset");
        } else if (key == "batch_size") {
            c.batch_size = text::parse_unsigned(value);
        } else if (key == "epochs") {
            c.epochs = text::parse_unsigned(value);
        } else if (key == "lr_initial") {
            c.lr_initial = text::parse_double(value);
        } else if (key == "lr_final") {
            c.lr_final = text::parse_double(value);
        } else if (key == "lr_drop_fraction") {
            c.lr_drop_fraction = text::parse_double(value);
        } else if (key == "momentum") {
            c.momentum = text::parse_double(value);
        } else if (key == "seed") {
            c.seed = text::parse_unsigned(value);
        } else {
            throw InvalidConfig("unknown key");
        }
    } catch (const std::invalid_argument& e) {
        throw InvalidConfig("config key '" + key + "' = '" + value + "': " + e.what());
    }
}

train::TrainConfig parse_config(const std::string& text, train::TrainConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view l = line;
        if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
        l = text::trim(l);
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos)
            throw InvalidConfig("config line " + std::to_string(line_no) + " has no '='");
        try {
            set_option(base, std::string(text::trim(l.substr(0, eq))), std::string(text::trim(l.substr(eq + 1))));
        } catch (const InvalidConfig& e) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    base.validate();
    return base;
}

std::string config_text(const train::TrainConfig& c) {
    std::string s;
    auto put = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
    put("variant", std::string(model::variant_name(c.variant)));
    put("loss", c.loss == objectives::LossKind::Hinge ? "hinge" : "ce");
    put("eta", text::format_double(c.eta));
    put("regularizer", c.regularizer ? "on" : "off");
    put("mi_scope", c.mi_scope == train::MiScope::MiniBatch ? "minibatch" : "dataset");
    put("batch_size", std::to_string(c.batch_size));
    put("epochs", std::to_string(c.epochs));
    put("lr_initial", text::format_double(c.lr_initial));
    put("lr_final", text::format_double(c.lr_final));
    put("lr_drop_fraction", text::format_double(c.lr_drop_fraction));
    put("momentum", text::format_double(c.momentum));
    put("seed", std::to_string(c.seed));
    return s;
}

} // namespace qmireg::config
