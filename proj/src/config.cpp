#include "tdn/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace tdn::config {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Parser {
    std::string source;
    int lineno = 0;

    [[noreturn]] void die(const std::string& msg) const {
        throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": " + msg);
    }

    int to_int(const std::string& v) const {
        try {
            size_t pos;
            int x = std::stoi(v, &pos);
            if (pos != v.size()) die("trailing characters in integer '" + v + "'");
            return x;
        } catch (const std::invalid_argument&) {
            die("expected integer, got '" + v + "'");
        } catch (const std::out_of_range&) {
            die("integer out of range: '" + v + "'");
        }
    }

    double to_double(const std::string& v) const {
        try {
            size_t pos;
            double x = std::stod(v, &pos);
            if (pos != v.size()) die("trailing characters in number '" + v + "'");
            return x;
        } catch (const std::invalid_argument&) {
            die("expected number, got '" + v + "'");
        } catch (const std::out_of_range&) {
            die("number out of range: '" + v + "'");
        }
    }

    uint64_t to_u64(const std::string& v) const {
        try {
            size_t pos;
            uint64_t x = std::stoull(v, &pos);
            if (pos != v.size()) die("trailing characters in integer '" + v + "'");
            return x;
        } catch (const std::exception&) {
            die("expected unsigned integer, got '" + v + "'");
        }
    }

    std::vector<int> to_int_list(const std::string& v) const {
        std::vector<int> out;
        std::istringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) die("empty element in list '" + v + "'");
            out.push_back(to_int(item));
        }
        if (out.empty()) die("empty list");
        return out;
    }
};

}  // namespace

void ExperimentConfig::validate() const {
    dataset.validate();
    model.srm.validate();
    model.fsm.validate();
    model.irm.validate();
    weights.validate();
    check(lr > 0 && std::isfinite(lr), "optim.lr must be positive");
    check(weight_decay >= 0 && std::isfinite(weight_decay), "optim.weight_decay must be >= 0");
    check(epochs >= 1, "train.epochs must be >= 1");
    check(patience >= 1, "train.patience must be >= 1");
    check(factor > 0 && factor < 1, "train.factor must be in (0, 1)");
    check(min_lr > 0 && min_lr <= lr, "train.min_lr must be in (0, lr]");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name) {
    ExperimentConfig cfg;
    Parser p{source_name};
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++p.lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) p.die("expected 'section.key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) p.die("missing key");
        if (val.empty()) p.die("missing value for '" + key + "'");
        if (!seen.insert(key).second) p.die("duplicate key '" + key + "'");

        if (key == "data.train") cfg.dataset.train = p.to_int(val);
        else if (key == "data.val") cfg.dataset.val = p.to_int(val);
        else if (key == "data.test") cfg.dataset.test = p.to_int(val);
        else if (key == "data.image_h") cfg.dataset.image_h = p.to_int(val);
        else if (key == "data.image_w") cfg.dataset.image_w = p.to_int(val);
        else if (key == "data.views") cfg.dataset.views = p.to_int_list(val);
        else if (key == "data.noise") cfg.dataset.noise_level = p.to_double(val);
        else if (key == "data.upscale") cfg.dataset.upscale = p.to_int(val);
        else if (key == "geom.detector_spacing") cfg.dataset.detector_spacing = p.to_double(val);
        else if (key == "srm.blocks") cfg.model.srm.blocks = p.to_int(val);
        else if (key == "srm.layers") cfg.model.srm.layers = p.to_int(val);
        else if (key == "srm.window") cfg.model.srm.window = p.to_int(val);
        else if (key == "srm.channels") cfg.model.srm.channels = p.to_int(val);
        else if (key == "srm.heads") cfg.model.srm.heads = p.to_int(val);
        else if (key == "fsm.embed") cfg.model.fsm.embed = p.to_int(val);
        else if (key == "fsm.layers") cfg.model.fsm.layers = p.to_int(val);
        else if (key == "fsm.heads") cfg.model.fsm.heads = p.to_int(val);
        else if (key == "fsm.cond") cfg.model.fsm.cond = p.to_int(val);
        else if (key == "irm.channels") cfg.model.irm.channels = p.to_int(val);
        else if (key == "irm.blocks") cfg.model.irm.blocks = p.to_int(val);
        else if (key == "irm.reduction") cfg.model.irm.reduction = p.to_int(val);
        else if (key == "loss.srm") cfg.weights.srm = p.to_double(val);
        else if (key == "loss.consis") cfg.weights.consis = p.to_double(val);
        else if (key == "loss.fsm") cfg.weights.fsm = p.to_double(val);
        else if (key == "loss.irm") cfg.weights.irm = p.to_double(val);
        else if (key == "loss.fc") cfg.weights.fc = p.to_double(val);
        else if (key == "loss.spatial") cfg.weights.spatial = p.to_double(val);
        else if (key == "optim.lr") cfg.lr = p.to_double(val);
        else if (key == "optim.weight_decay") cfg.weight_decay = p.to_double(val);
        else if (key == "train.epochs") cfg.epochs = p.to_int(val);
        else if (key == "train.patience") cfg.patience = p.to_int(val);
        else if (key == "train.factor") cfg.factor = p.to_double(val);
        else if (key == "train.min_lr") cfg.min_lr = p.to_double(val);
        else if (key == "exp.seed") cfg.seed = p.to_u64(val);
        else if (key == "exp.dataset") cfg.dataset_dir = val;
        else p.die("unknown key '" + key + "'");
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(source_name + ": " + e.what());
    }
    cfg.dataset.seed = cfg.seed;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string default_config_text() {
    ExperimentConfig c;
    std::ostringstream ss;
    ss << "# tdnet experiment configuration\n";
    ss << "data.train = " << c.dataset.train << "\n";
    ss << "data.val = " << c.dataset.val << "\n";
    ss << "data.test = " << c.dataset.test << "\n";
    ss << "data.image_h = " << c.dataset.image_h << "\n";
    ss << "data.image_w = " << c.dataset.image_w << "\n";
    ss << "data.views = 21,33,45\n";
    ss << "data.noise = " << c.dataset.noise_level << "\n";
    ss << "data.upscale = " << c.dataset.upscale << "\n";
    ss << "geom.detector_spacing = " << c.dataset.detector_spacing << "\n";
    ss << "srm.blocks = " << c.model.srm.blocks << "\n";
    ss << "srm.layers = " << c.model.srm.layers << "\n";
    ss << "srm.window = " << c.model.srm.window << "\n";
    ss << "srm.channels = " << c.model.srm.channels << "\n";
    ss << "srm.heads = " << c.model.srm.heads << "\n";
    ss << "fsm.embed = " << c.model.fsm.embed << "\n";
    ss << "fsm.layers = " << c.model.fsm.layers << "\n";
    ss << "fsm.heads = " << c.model.fsm.heads << "\n";
    ss << "fsm.cond = " << c.model.fsm.cond << "\n";
    ss << "irm.channels = " << c.model.irm.channels << "\n";
    ss << "irm.blocks = " << c.model.irm.blocks << "\n";
    ss << "irm.reduction = " << c.model.irm.reduction << "\n";
    ss << "loss.srm = 1\nloss.consis = 1\nloss.fsm = 1\nloss.irm = 1\n";
    ss << "loss.fc = 1\nloss.spatial = 1\n";
    ss << "optim.lr = 0.0001\n";
    ss << "optim.weight_decay = 0.01\n";
    ss << "train.epochs = " << c.epochs << "\n";
    ss << "train.patience = " << c.patience << "\n";
    ss << "train.factor = " << c.factor << "\n";
    ss << "train.min_lr = " << c.min_lr << "\n";
    ss << "exp.seed = 0\n";
    ss << "exp.dataset = dataset\n";
    return ss.str();
}

}  // namespace tdn::config
