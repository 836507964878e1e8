#include "sflab/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sflab {

const std::vector<KeyDef>& config_schema() {
    using K = KeyType;
    static const std::vector<KeyDef> schema = {
        {"name", K::string, "", "run name; defaults to the subcommand"},
        {"seed", K::integer, "0", "seed for data, init and any sampling"},
        {"log_every", K::integer, "10", "trajectory logging period"},
        {"objective", K::string, "toy", "toy | quadratic | mlp"},
        {"x0", K::list, "", "start point; empty = objective default"},
        {"quadratic.diag", K::list, "1,10", "diagonal Hessian of the quadratic objective"},
        {"mlp.n", K::integer, "512", "synthetic samples"},
        {"mlp.d_in", K::integer, "32", "synthetic input width"},
        {"mlp.d_out", K::integer, "10", "classes"},
        {"mlp.hidden", K::integer, "200", "hidden width"},
        {"mlp.layers", K::integer, "3", "linear layers"},
        {"mlp.dataset", K::string, "synthetic", "synthetic | cifar10"},
        {"mlp.cifar_path", K::string, "", "CIFAR-10 binary file or directory"},
        {"mlp.samples", K::integer, "5000", "CIFAR-10 samples to read"},
        {"mlp.backend", K::string, "openmp", "openmp | serial"},
        {"optimizer.kind", K::string, "sf-adamw", "sf-gd | sf-adamw | sf-scalaradam | adamw"},
        {"optimizer.gamma", K::real, "0.01", "base learning rate"},
        {"optimizer.beta1", K::real, "0.9", "interpolation / momentum beta"},
        {"optimizer.beta2", K::real, "0.99", "second-moment decay"},
        {"optimizer.lambda", K::real, "0", "weight decay"},
        {"optimizer.epsilon", K::real, "1e-8", "denominator epsilon"},
        {"optimizer.warmup", K::integer, "0", "linear warmup steps"},
        {"optimizer.C", K::real, "0", "refined decoupling C; 0 = vanilla"},
        {"optimizer.c_rule", K::string, "lr-weighted", "lr-weighted | ideal"},
        {"optimizer.clip", K::real, "-1", "global-norm clip; negative = 1.0 for adamw, off otherwise"},
        {"schedule.kind", K::string, "auto",
         "auto | constant | warmup-constant | warmup-cosine | linear-decay"},
        {"train.steps", K::integer, "5000", "step budget"},
        {"train.loss_target", K::real, "0", "stop when loss at y reaches this; 0 = off"},
        {"checkpoint.every", K::integer, "1000", "checkpoint period; 0 = off"},
        {"sharpness.every", K::integer, "0", "sharpness period on logged steps; 0 = off"},
        {"sharpness.tol", K::real, "1e-6", "power iteration tolerance"},
        {"sharpness.max_iters", K::integer, "10000", "power iteration cap"},
        {"probe.every", K::integer, "500", "decay-probe checkpoint period"},
        {"probe.fraction", K::real, "0.1", "probe length as a fraction of elapsed steps"},
        {"probe.lr", K::real, "1e-4", "probe starting learning rate"},
        {"ewa.decay", K::real, "0.99", "EWA decay"},
        {"weights.T", K::integer, "1000", "averaging horizon"},
        {"flow.kind", K::string, "sfgd", "sfgd | sfscalaradam"},
        {"flow.t0", K::integer, "2", "flow start time (discrete step index)"},
        {"flow.t_end", K::real, "200", "flow end time"},
        {"flow.dt", K::real, "0.25", "RK4 step"},
        {"flow.exact_c", K::boolean, "false", "use c(t) = 1/t instead of c ~ 0"},
        {"flow.window", K::integer, "21", "moving-average width for the discrete comparison"},
        {"flow.compare", K::boolean, "false", "also run the discrete comparison"},
        {"flow.y0", K::list, "", "flow start; empty = x0 or objective default"},
        {"stability.lo", K::real, "0.5", "bisection bracket low, fraction of theory"},
        {"stability.hi", K::real, "2", "bisection bracket high, fraction of theory"},
        {"stability.budget", K::integer, "100000", "steps per divergence probe"},
        {"refined.C_grid", K::list, "5,10,20,50", "C values compared against vanilla"},
    };
    return schema;
}

const KeyDef* find_key(const std::string& name) {
    for (const auto& k : config_schema())
        if (k.name == name) return &k;
    return nullptr;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d))
        throw ConfigError(key, "key '" + key + "': expected a real number, got '" + v + "'");
    return d;
}

long to_integer(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const long d = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0' || errno == ERANGE)
        throw ConfigError(key, "key '" + key + "': expected an integer, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "key '" + key + "': expected true or false, got '" + v + "'");
}

void check_type(const KeyDef& k, const std::string& v) {
    switch (k.type) {
        case KeyType::real: to_real(k.name, v); break;
        case KeyType::integer: to_integer(k.name, v); break;
        case KeyType::boolean: to_bool(k.name, v); break;
        case KeyType::list: parse_list(k.name, v); break;
        case KeyType::string: break;
    }
}

}  // namespace

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_real(key, trim(item)));
    return out;
}

Config::Config() {
    for (const auto& k : config_schema()) values_[k.name] = k.fallback;
}

void Config::set(const std::string& key, const std::string& value) {
    const KeyDef* k = find_key(key);
    if (!k) throw ConfigError(key, "unknown config key '" + key + "'");
    const std::string v = trim(value);
    check_type(*k, v);
    values_[key] = v;
}

const std::string& Config::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "unknown config key '" + key + "'");
    return it->second;
}

double Config::real(const std::string& key) const { return to_real(key, raw(key)); }
long Config::integer(const std::string& key) const { return to_integer(key, raw(key)); }
bool Config::boolean(const std::string& key) const { return to_bool(key, raw(key)); }
std::vector<double> Config::list(const std::string& key) const { return parse_list(key, raw(key)); }

std::uint64_t Config::seed() const {
    const long s = integer("seed");
    if (s < 0) throw ConfigError("seed", "key 'seed': must be >= 0");
    return std::uint64_t(s);
}

void apply_config_text(Config& cfg, const std::string& text, const std::string& origin) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.rfind("meta.", 0) == 0) continue;
        cfg.set(key, line.substr(eq + 1));
    }
}

void apply_config_file(Config& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(cfg, buf.str(), path);
}

std::string serialize(const Config& cfg) {
    std::string out;
    for (const auto& k : config_schema()) out += k.name + " = " + cfg.raw(k.name) + "\n";
    return out;
}

}  // namespace sflab
