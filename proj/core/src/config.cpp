#include "micacl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "micacl/errors.hpp"

namespace micacl {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
    if (out.empty()) throw ConfigError("config: key '" + key + "' expects a non-empty list");
    return out;
}

}  // namespace

std::vector<int> ModelConfig::effective_scales() const {
    if (!scales.empty()) return scales;
    std::vector<int> out{1};
    if (C_h / 2 > 1) out.push_back(C_h / 2);
    if (C_h > out.back()) out.push_back(C_h);
    return out;
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string("config: ") + name + " must be >= 1");
    };
    positive(C_in, "C_in");
    positive(C, "C");
    positive(d, "d");
    positive(C_h, "C_h");
    positive(E, "E");
    positive(n_heads, "n_heads");
    positive(T, "T");
    positive(encoder_hidden, "encoder_hidden");
    positive(epochs, "epochs");
    if (K < 2) throw ConfigError("config: K must be >= 2");
    if (batch_size < 2) throw ConfigError("config: batch_size must be >= 2");
    if (C_h % n_heads != 0)
        throw ConfigError("config: C_h (" + std::to_string(C_h) + ") must be divisible by n_heads (" +
                          std::to_string(n_heads) + ")");
    if (!(tau0 > 0.0)) throw ConfigError("config: tau0 must be positive");
    const std::vector<int> s = effective_scales();
    int prev = 0;
    for (int v : s) {
        if (v <= prev) throw ConfigError("config: scales must be strictly increasing and positive");
        if (v > C_h)
            throw ConfigError("config: scale " + std::to_string(v) + " exceeds C_h " +
                              std::to_string(C_h));
        prev = v;
    }
}

void OptimConfig::validate() const {
    if (!(lr_max > 0.0) || !(lr_min >= 0.0) || lr_min > lr_max)
        throw ConfigError("config: need lr_max > 0 and 0 <= lr_min <= lr_max");
    if (!(weight_decay >= 0.0)) throw ConfigError("config: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("config: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("config: eps must be positive");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        ModelConfig& m = cfg.model;
        OptimConfig& o = cfg.optim;
        if (key == "C_in") m.C_in = parse_int(key, val);
        else if (key == "C") m.C = parse_int(key, val);
        else if (key == "d") m.d = parse_int(key, val);
        else if (key == "C_h") m.C_h = parse_int(key, val);
        else if (key == "E") m.E = parse_int(key, val);
        else if (key == "n_heads") m.n_heads = parse_int(key, val);
        else if (key == "K") m.K = parse_int(key, val);
        else if (key == "T") m.T = parse_int(key, val);
        else if (key == "scales") m.scales = parse_int_list(key, val);
        else if (key == "tau0") m.tau0 = parse_double(key, val);
        else if (key == "log_form") m.log_form = parse_bool(key, val);
        else if (key == "encoder_hidden") m.encoder_hidden = parse_int(key, val);
        else if (key == "epochs") m.epochs = parse_int(key, val);
        else if (key == "batch_size") m.batch_size = parse_int(key, val);
        else if (key == "force_alpha_one") m.force_alpha_one = parse_bool(key, val);
        else if (key == "force_uniform_weights") m.force_uniform_weights = parse_bool(key, val);
        else if (key == "force_unit_gate") m.force_unit_gate = parse_bool(key, val);
        else if (key == "lr_max") o.lr_max = parse_double(key, val);
        else if (key == "lr_min") o.lr_min = parse_double(key, val);
        else if (key == "weight_decay") o.weight_decay = parse_double(key, val);
        else if (key == "beta1") o.beta1 = parse_double(key, val);
        else if (key == "beta2") o.beta2 = parse_double(key, val);
        else if (key == "eps") o.eps = parse_double(key, val);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    cfg.model.validate();
    cfg.optim.validate();
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    const ModelConfig& m = cfg.model;
    const OptimConfig& o = cfg.optim;
    out << "C_in=" << m.C_in << "\nC=" << m.C << "\nd=" << m.d << "\nC_h=" << m.C_h
        << "\nE=" << m.E << "\nn_heads=" << m.n_heads << "\nK=" << m.K << "\nT=" << m.T
        << "\nscales=";
    const auto s = m.effective_scales();
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
    out << "\ntau0=" << m.tau0 << "\nlog_form=" << (m.log_form ? 1 : 0)
        << "\nencoder_hidden=" << m.encoder_hidden << "\nepochs=" << m.epochs
        << "\nbatch_size=" << m.batch_size << "\nforce_alpha_one=" << (m.force_alpha_one ? 1 : 0)
        << "\nforce_uniform_weights=" << (m.force_uniform_weights ? 1 : 0)
        << "\nforce_unit_gate=" << (m.force_unit_gate ? 1 : 0) << "\nlr_max=" << o.lr_max
        << "\nlr_min=" << o.lr_min << "\nweight_decay=" << o.weight_decay
        << "\nbeta1=" << o.beta1 << "\nbeta2=" << o.beta2 << "\neps=" << o.eps << "\n";
    return out.str();
}

}  // namespace micacl
