#include "fourphase/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fourphase/error.hpp"

namespace fourphase {

ExperimentConfig reference_config() {
    ExperimentConfig c;
    c.data.delta = std::numbers::pi / 15.0;
    c.data.n_plus = 12;
    c.data.n_minus = 3;
    c.data.dim = 20;
    c.data.seed = 1;
    c.m = 100;
    c.kappa1 = 0.1;
    c.kappa2 = 1.0;
    c.net_seed = 1;
    c.flow.eta = 0.01;
    c.flow.t_max = 1500.0;
    c.flow.snapshot_stride = 100;
    c.extend_factor = 4.0;
    return c;
}

namespace {

class ExprParser {
public:
    explicit ExprParser(const std::string& s) : s_(s) {}

    double parse() {
        const double v = sum();
        skip();
        if (pos_ != s_.size()) fail("trailing characters");
        return v;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError("cannot parse expression '" + s_ + "': " + why);
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    double sum() {
        double v = product();
        for (;;) {
            if (eat('+')) v += product();
            else if (eat('-')) v -= product();
            else return v;
        }
    }
    double product() {
        double v = unary();
        for (;;) {
            if (eat('*')) v *= unary();
            else if (eat('/')) v /= unary();
            else return v;
        }
    }
    double unary() {
        if (eat('-')) return -unary();
        if (eat('+')) return unary();
        return power();
    }
    double power() {
        const double base = atom();
        if (eat('^')) return std::pow(base, unary());
        return base;
    }
    double atom() {
        skip();
        if (eat('(')) {
            const double v = sum();
            if (!eat(')')) fail("missing ')'");
            return v;
        }
        if (s_.compare(pos_, 2, "pi") == 0) {
            pos_ += 2;
            return std::numbers::pi;
        }
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a number at position " + std::to_string(pos_));
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }
};

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        x = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty() || v[0] == '-') throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return x;
}

int parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    int x = 0;
    try {
        x = std::stoi(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("empty list element in '" + v + "'");
        out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

// returns true when the key belonged to the experiment config
bool apply_key(ExperimentConfig& c, const std::string& k, const std::string& v) {
    if (k == "delta") c.data.delta = parse_expression(v);
    else if (k == "n_plus") c.data.n_plus = parse_int(k, v);
    else if (k == "n_minus") c.data.n_minus = parse_int(k, v);
    else if (k == "dim") c.data.dim = parse_int(k, v);
    else if (k == "data_seed") c.data.seed = parse_uint(k, v);
    else if (k == "m") c.m = parse_int(k, v);
    else if (k == "kappa1") c.kappa1 = parse_expression(v);
    else if (k == "kappa2") c.kappa2 = parse_expression(v);
    else if (k == "net_seed") c.net_seed = parse_uint(k, v);
    else if (k == "eta") c.flow.eta = parse_expression(v);
    else if (k == "t_max") c.flow.t_max = parse_expression(v);
    else if (k == "snapshot_stride") c.flow.snapshot_stride = parse_int(k, v);
    else if (k == "mode") c.flow.mode = mode_from_string(v);
    else if (k == "sliding_tol") c.flow.sliding_tol = parse_expression(v);
    else if (k == "save_weights") c.flow.store_weights = parse_bool(k, v);
    else if (k == "noisy") c.noisy = parse_bool(k, v);
    else if (k == "noise_seed") c.noise_seed = parse_uint(k, v);
    else if (k == "analyze") c.analyze = parse_bool(k, v);
    else if (k == "paired_mode_check") c.paired_mode_check = parse_bool(k, v);
    else if (k == "extend_factor") c.extend_factor = parse_expression(v);
    else if (k == "out") c.out = v;
    else return false;
    return true;
}

Record read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return Record::parse(in);
    } catch (const ParseError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace

double parse_expression(const std::string& text) { return ExprParser(text).parse(); }

ExperimentConfig config_from_record(const Record& r) {
    ExperimentConfig c = reference_config();
    for (const auto& [k, v] : r.entries())
        if (!apply_key(c, k, v)) throw ConfigError("unknown config key '" + k + "'");
    return c;
}

Record config_record(const ExperimentConfig& c) {
    Record r;
    r.set("delta", c.data.delta);
    r.set("n_plus", c.data.n_plus);
    r.set("n_minus", c.data.n_minus);
    r.set("dim", c.data.dim);
    r.set("data_seed", c.data.seed);
    r.set("m", c.m);
    r.set("kappa1", c.kappa1);
    r.set("kappa2", c.kappa2);
    r.set("net_seed", c.net_seed);
    r.set("eta", c.flow.eta);
    r.set("t_max", c.flow.t_max);
    r.set("snapshot_stride", c.flow.snapshot_stride);
    r.set("mode", to_string(c.flow.mode));
    r.set("sliding_tol", c.flow.sliding_tol);
    r.set("save_weights", c.flow.store_weights);
    r.set("noisy", c.noisy);
    r.set("noise_seed", c.noise_seed);
    r.set("analyze", c.analyze);
    r.set("paired_mode_check", c.paired_mode_check);
    r.set("extend_factor", c.extend_factor);
    r.set("out", c.out);
    return r;
}

ExperimentConfig load_config(const std::string& path) { return config_from_record(read_file(path)); }

void validate(const ExperimentConfig& c) {
    if (!(c.kappa1 > 0.0 && c.kappa1 < c.kappa2 && c.kappa2 <= 1.0))
        throw ConfigError("need 0 < kappa1 < kappa2 <= 1 (got kappa1 = " + format_double(c.kappa1) +
                          ", kappa2 = " + format_double(c.kappa2) + ")");
    if (c.m <= 0 || c.m % 2 != 0) throw ConfigError("m must be a positive even number");
    if (c.data.n_plus < 1 || c.data.n_minus < 1) throw ConfigError("class counts must be positive");
    if (!(c.flow.eta > 0.0) || !std::isfinite(c.flow.eta)) throw ConfigError("eta must be positive");
    if (!(c.flow.t_max >= 0.0) || !std::isfinite(c.flow.t_max)) throw ConfigError("t_max must be non-negative");
    if (c.flow.snapshot_stride < 1) throw ConfigError("snapshot_stride must be at least 1");
    if (c.extend_factor < 0.0) throw ConfigError("extend_factor must be non-negative");
    try {
        (void)build(c.data);
    } catch (const Error& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
}

SweepSpec sweep_from_record(const Record& r) {
    SweepSpec s;
    s.base = reference_config();
    for (const auto& [k, v] : r.entries()) {
        if (apply_key(s.base, k, v)) continue;
        if (k == "sweep_axis") {
            s.axis = v;
        } else if (k == "sweep_values") {
            for (const auto& e : split_list(v)) s.values.push_back(parse_expression(e));
        } else if (k == "sweep_seeds") {
            for (const auto& e : split_list(v)) s.seeds.push_back(parse_uint(k, e));
        } else if (k == "sweep_t_max") {
            for (const auto& e : split_list(v)) s.t_max_values.push_back(parse_expression(e));
        } else {
            throw ConfigError("unknown sweep key '" + k + "'");
        }
    }
    return s;
}

SweepSpec load_sweep(const std::string& path) { return sweep_from_record(read_file(path)); }

void validate(const SweepSpec& s) {
    static const std::set<std::string> axes{"delta", "p", "kappa1"};
    if (!axes.count(s.axis)) throw ConfigError("sweep_axis must be delta, p or kappa1 (got '" + s.axis + "')");
    if (s.values.size() < 2) throw ConfigError("a sweep needs at least two values");
    if (!s.seeds.empty() && s.seeds.size() != 1 && s.seeds.size() != s.values.size())
        throw ConfigError("sweep_seeds must hold one seed or one per value");
    if (!s.t_max_values.empty() && s.t_max_values.size() != s.values.size())
        throw ConfigError("sweep_t_max must hold one horizon per value");
    for (std::size_t i = 0; i < s.values.size(); ++i) validate(sweep_member(s, i));
}

ExperimentConfig sweep_member(const SweepSpec& s, std::size_t i) {
    ExperimentConfig c = s.base;
    const double v = s.values.at(i);
    if (s.axis == "delta") {
        c.data.delta = v;
    } else if (s.axis == "p") {
        const double np = v * c.data.n_minus;
        const double r = std::round(np);
        if (std::abs(np - r) > 1e-9) throw ConfigError("p = " + format_double(v) + " is not a multiple of 1/n_minus");
        c.data.n_plus = static_cast<int>(r);
    } else if (s.axis == "kappa1") {
        c.kappa1 = v;
    }
    if (s.seeds.empty()) c.net_seed = s.base.net_seed + i;
    else c.net_seed = s.seeds.size() == 1 ? s.seeds[0] : s.seeds[i];
    if (!s.t_max_values.empty()) c.flow.t_max = s.t_max_values[i];
    return c;
}

}  // namespace fourphase
