#include "pgee/config.hpp"

#include "pgee/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace pgee {

namespace {

using nlohmann::json;

// Reads keys off one JSON object and rejects whatever was not read.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw InputError(where_ + " must be a JSON object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        if (!has(key)) throw InputError("missing config key '" + path(key) + "'");
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        return has(key) ? as_number(j_.at(key), key) : fallback;
    }
    double number(const std::string& key) { return as_number(at(key), key); }

    int integer(const std::string& key, int fallback) {
        return has(key) ? as_int(j_.at(key), key) : fallback;
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned()) throw InputError(path(key) + " must be a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw InputError(path(key) + " must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? as_string(j_.at(key), key) : fallback;
    }
    std::string string(const std::string& key) { return as_string(at(key), key); }

    std::vector<double> numbers(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array()) throw InputError(path(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) out.push_back(as_number(e, key));
        return out;
    }

    std::vector<int> integers(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array()) throw InputError(path(key) + " must be an array of integers");
        std::vector<int> out;
        for (const auto& e : v) out.push_back(as_int(e, key));
        return out;
    }

    Fields object(const std::string& key) { return Fields(at(key), path(key)); }

    std::string path(const std::string& key) const {
        return where_.empty() ? key : where_ + "." + key;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) {
                throw InputError("unknown config key '" + path(item.key()) + "'");
            }
        }
    }

private:
    double as_number(const json& v, const std::string& key) const {
        if (!v.is_number()) throw InputError(path(key) + " must be a number");
        return v.get<double>();
    }
    int as_int(const json& v, const std::string& key) const {
        if (!v.is_number_integer()) throw InputError(path(key) + " must be an integer");
        return v.get<int>();
    }
    std::string as_string(const json& v, const std::string& key) const {
        if (!v.is_string()) throw InputError(path(key) + " must be a string");
        return v.get<std::string>();
    }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json parse_text(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

IndexSet one_based(const std::vector<int>& raw, const std::string& what) {
    IndexSet out;
    for (int j : raw) {
        if (j < 1) throw InputError(what + " entries are 1-based");
        out.push_back(j - 1);
    }
    return out;
}

// lambda, solver, tuning, screening, kernel and init_ridge.
void read_method(Fields& f, CrossFitConfig& m) {
    if (f.has("lambda")) {
        m.lambda = f.number("lambda");
        if (*m.lambda < 0.0) throw InputError("lambda must be >= 0");
    }
    m.init_ridge = f.number("init_ridge", m.init_ridge);
    if (f.has("solver")) {
        auto s = f.object("solver");
        m.solver.tol = s.number("tol", m.solver.tol);
        m.solver.max_iter = s.integer("max_iter", m.solver.max_iter);
        m.solver.zero_threshold = s.number("zero_threshold", m.solver.zero_threshold);
        m.solver.ridge = s.number("ridge", m.solver.ridge);
        s.finish();
        if (!(m.solver.tol > 0.0) || m.solver.max_iter < 1) {
            throw InputError("solver.tol must be > 0 and solver.max_iter >= 1");
        }
    }
    if (f.has("tuning")) {
        auto t = f.object("tuning");
        m.tuning.grid_size = t.integer("grid_size", m.tuning.grid_size);
        m.tuning.min_ratio = t.number("min_ratio", m.tuning.min_ratio);
        t.finish();
        if (m.tuning.grid_size < 1 || !(m.tuning.min_ratio > 0.0 && m.tuning.min_ratio <= 1.0)) {
            throw InputError("tuning needs grid_size >= 1 and min_ratio in (0, 1]");
        }
    }
    if (f.has("screening")) {
        auto s = f.object("screening");
        auto& c = m.screening;
        c.basis_count = s.integer("basis_count", c.basis_count);
        c.alpha = s.number("alpha", c.alpha);
        if (s.has("alpha_exponent")) c.alpha_exponent = s.number("alpha_exponent");
        c.lambda_grid_size = s.integer("lambda_grid_size", c.lambda_grid_size);
        c.lambda_min_ratio = s.number("lambda_min_ratio", c.lambda_min_ratio);
        c.lasso_tol = s.number("lasso_tol", c.lasso_tol);
        c.standardize_responses = s.boolean("standardize_responses", c.standardize_responses);
        s.finish();
        if (c.basis_count < 1) throw InputError("screening.basis_count must be >= 1");
        if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw InputError("screening.alpha must lie in (0, 1)");
    }
    if (f.has("kernel")) {
        auto k = f.object("kernel");
        m.kernel.nu = k.number("nu", m.kernel.nu);
        m.kernel.c_h = k.number("c_h", m.kernel.c_h);
        m.kernel.scale_by_sd = k.boolean("scale_by_sd", m.kernel.scale_by_sd);
        k.finish();
        if (!(m.kernel.nu > 0.0 && m.kernel.nu <= 1.0)) throw InputError("kernel.nu must lie in (0, 1]");
        if (!(m.kernel.c_h > 0.0)) throw InputError("kernel.c_h must be > 0");
    }
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
    const json root = parse_text(text);
    Fields f(root, "");
    RunConfig cfg;
    cfg.spec.link = LinkFunction::from_name(f.string("link"));
    const auto kind = PenaltyConfig::kind_from_name(f.string("penalty"));
    cfg.spec.penalty = PenaltyConfig::make(kind, 0.0);
    cfg.spec.penalty.a = f.number("penalty_a", cfg.spec.penalty.a);
    cfg.spec.penalty.validate();
    const IndexSet m_raw = one_based(f.integers("m_set"), "m_set");
    read_method(f, cfg.method);
    cfg.seed = f.seed("seed", cfg.seed);
    cfg.method.seed = cfg.seed;
    cfg.data_path = f.string("data", "");
    cfg.out_path = f.string("out", "");

    if (f.has("hypothesis")) {
        auto h = f.object("hypothesis");
        const auto& c = h.at("C");
        if (!c.is_array() || c.empty()) throw InputError("hypothesis.C must be a nested array");
        MatrixXd C(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(m_raw.size()));
        for (size_t r = 0; r < c.size(); ++r) {
            if (!c[r].is_array() || c[r].size() != m_raw.size()) {
                throw InputError("hypothesis.C must be r x |m_set|");
            }
            for (size_t k = 0; k < c[r].size(); ++k) {
                if (!c[r][k].is_number()) throw InputError("hypothesis.C entries must be numbers");
                C(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = c[r][k].get<double>();
            }
        }
        cfg.hypothesis_c = C;
        const auto& t = h.at("t");
        if (t.is_string()) {
            if (t.get<std::string>() != "estimate") {
                throw InputError("hypothesis.t must be an array or \"estimate\"");
            }
            cfg.self_test = true;
        } else {
            const auto values = h.numbers("t");
            cfg.hypothesis_t = Eigen::Map<const VectorXd>(values.data(),
                                                          static_cast<Eigen::Index>(values.size()));
        }
        cfg.level = h.number("level", cfg.level);
        if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InputError("hypothesis.level must lie in (0, 1)");
        if (h.has("drift")) {
            const auto values = h.numbers("drift");
            cfg.drift = Eigen::Map<const VectorXd>(values.data(),
                                                   static_cast<Eigen::Index>(values.size()));
            if (cfg.drift->size() != C.rows()) throw InputError("hypothesis.drift must have length r");
        }
        h.finish();
    }
    f.finish();

    std::vector<int> sorted = m_raw;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted != m_raw) {
        throw InputError("m_set must be strictly increasing");
    }
    cfg.spec.m_set = m_raw;
    if (cfg.hypothesis_c && cfg.hypothesis_t) {
        HypothesisSpec hyp{*cfg.hypothesis_c, *cfg.hypothesis_t, cfg.spec.m_set};
        hyp.validate();
        cfg.spec.hypothesis = hyp;
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

HypothesisSpec resolve_hypothesis(const RunConfig& cfg, const VectorXd& beta) {
    if (!cfg.hypothesis_c) throw InputError("missing config key 'hypothesis'");
    HypothesisSpec hyp;
    hyp.C = *cfg.hypothesis_c;
    hyp.m_set = cfg.spec.m_set;
    if (cfg.self_test) {
        VectorXd beta_m(static_cast<Eigen::Index>(hyp.m_set.size()));
        for (size_t a = 0; a < hyp.m_set.size(); ++a) {
            beta_m(static_cast<Eigen::Index>(a)) = beta(hyp.m_set[a]);
        }
        hyp.t = hyp.C * beta_m;
    } else {
        hyp.t = *cfg.hypothesis_t;
    }
    hyp.validate();
    return hyp;
}

ScenarioFile parse_scenario(std::string_view text) {
    const json root = parse_text(text);
    Fields f(root, "");
    ScenarioFile out;
    out.experiment = experiment_from_name(f.string("experiment"));
    auto& c = out.scenario;
    c.n = f.integer("n", c.n);
    if (f.has("n_values")) c.n_values = f.integers("n_values");
    c.p = f.integer("p", c.p);
    c.l = f.integer("l", c.l);
    c.s = f.integer("s", c.s);
    c.m = f.integer("m", c.m);
    c.link = f.string("link", c.link);
    if (f.has("penalty")) c.penalty = PenaltyConfig::kind_from_name(f.string("penalty"));
    if (f.has("family")) c.family = covariance_family_from_name(f.string("family"));
    if (f.has("active_set")) c.active_set = one_based(f.integers("active_set"), "active_set");
    c.signal = f.number("signal", c.signal);
    c.cov_strength = f.number("cov_strength", c.cov_strength);
    c.sigma2 = f.number("sigma2", c.sigma2);
    c.rho = f.number("rho", c.rho);
    c.m_value = f.number("m_value", c.m_value);
    if (f.has("drift")) c.drift = f.numbers("drift");
    if (f.has("errors")) c.errors = error_distribution_from_name(f.string("errors"));
    c.level = f.number("level", c.level);
    c.seed = f.seed("seed", c.seed);
    c.reps = f.integer("reps", c.reps);
    out.out_dir = f.string("out", "");
    if (f.has("method")) {
        auto m = f.object("method");
        read_method(m, c.method);
        m.finish();
    }
    f.finish();
    validate(c);
    return out;
}

ScenarioFile load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

}  // namespace pgee
