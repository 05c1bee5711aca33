#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "game.hpp"
#include "simplex.hpp"

namespace vexgame {

/// Fully validated run description: the game, discretization, sampling
/// budget, and per-command knobs, plus the raw config text and its hash so
/// reports can prove what they were produced from.
struct RunConfig {
    std::string command;  // optional in the file; must match the CLI verb when set
    GameSpec spec;
    double t0 = 0.0;
    SimplexPoint p0;
    int n = 100;
    int m = 100;
    long paths = 10000;
    std::uint64_t seed = 20240817ull;
    std::string out;
    std::vector<double> slice_times;  // defaults to {t0}
    double h_tolerance_c = 0.0;       // 0: auto, five times the Hamiltonian Lipschitz bound
    double dual_box = 0.0;            // 0: auto, sup|H| * (T - t0) + 1
    int dual_resolution = 0;          // 0: auto, same as m
    double theta = 0.5;
    std::string perturb = "none";     // none | delay | eager | mix
    std::string opponent = "all";     // all | posterior_best_response | constant | ...
    double constant_v = -1.0;
    long min_visits = 500;
    std::string raw_text;
    std::string config_hash;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct RawEntry {
    std::string value;
    int line = 0;
};

inline double parse_number(const std::string& tok, int line, const std::string& key) {
    const char* c = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(c, &end);
    if (end == c || *end != '\0')
        throw std::invalid_argument("parse-error: line " + std::to_string(line) +
                                    ": bad number '" + tok + "' for key '" + key + "'");
    return v;
}

inline std::vector<double> parse_array(const std::string& tok, int line,
                                       const std::string& key) {
    std::string s = trim(tok);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']')
        throw std::invalid_argument("parse-error: line " + std::to_string(line) +
                                    ": key '" + key + "' expects [a, b, ...]");
    std::vector<double> out;
    std::string body = s.substr(1, s.size() - 2);
    std::size_t pos = 0;
    while (pos <= body.size()) {
        std::size_t comma = body.find(',', pos);
        std::string item = trim(comma == std::string::npos ? body.substr(pos)
                                                           : body.substr(pos, comma - pos));
        if (!item.empty()) out.push_back(parse_number(item, line, key));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline long parse_integer(const std::string& tok, int line, const std::string& key) {
    double v = parse_number(tok, line, key);
    long iv = long(v);
    if (double(iv) != v)
        throw std::invalid_argument("validation-error: key '" + key +
                                    "' must be an integer (line " + std::to_string(line) +
                                    ")");
    return iv;
}

}  // namespace detail

/// Parses the flat key-value config format: one `key: value` per line,
/// `#` comments, bracketed arrays.  Unknown and duplicate keys are errors.
inline RunConfig parse_config(const std::string& text) {
    using detail::RawEntry;
    static const char* known_keys[] = {
        "command",     "fixture",       "dimension",  "horizon",       "t0",
        "p0",          "n",             "m",          "paths",         "seed",
        "out",         "slice_times",   "h_tolerance_c", "dual_box",   "dual_resolution",
        "theta",       "perturb",       "alpha_start",   "alpha_end",  "u_values",
        "v_values",    "payoff1",       "payoff2",       "payoff3",    "opponent",
        "constant_v",  "min_visits"};
    std::map<std::string, RawEntry> kv;
    {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            std::string s = detail::trim(line);
            if (s.empty()) continue;
            std::size_t colon = s.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("parse-error: line " + std::to_string(lineno) +
                                            ": expected 'key: value'");
            std::string key = detail::trim(s.substr(0, colon));
            std::string val = detail::trim(s.substr(colon + 1));
            if (key.empty())
                throw std::invalid_argument("parse-error: line " + std::to_string(lineno) +
                                            ": empty key");
            if (kv.count(key))
                throw std::invalid_argument("parse-error: line " + std::to_string(lineno) +
                                            ": duplicate key '" + key + "'");
            bool ok = false;
            for (const char* k : known_keys)
                if (key == k) { ok = true; break; }
            if (!ok)
                throw std::invalid_argument("validation-error: unknown key '" + key +
                                            "' (line " + std::to_string(lineno) + ")");
            kv[key] = {val, lineno};
        }
    }
    auto has = [&](const char* k) { return kv.count(k) != 0; };
    auto raw = [&](const char* k) -> const RawEntry& { return kv.at(k); };
    auto num = [&](const char* k) {
        return detail::parse_number(raw(k).value, raw(k).line, k);
    };
    auto integer = [&](const char* k) {
        return detail::parse_integer(raw(k).value, raw(k).line, k);
    };
    auto arr = [&](const char* k) {
        return detail::parse_array(raw(k).value, raw(k).line, k);
    };

    RunConfig cfg;
    cfg.raw_text = text;
    {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(detail::fnv1a64(text)));
        cfg.config_hash = buf;
    }

    if (has("command")) {
        cfg.command = raw("command").value;
        if (cfg.command != "solve" && cfg.command != "simulate" && cfg.command != "match" &&
            cfg.command != "diagnose")
            throw std::invalid_argument("validation-error: unknown command '" + cfg.command +
                                        "'");
    }

    bool custom = has("dimension") || has("u_values") || has("v_values") ||
                  has("payoff1") || has("payoff2") || has("payoff3");
    if (has("fixture") && custom)
        throw std::invalid_argument(
            "validation-error: 'fixture' and a custom payoff spec are mutually exclusive");
    if (!has("fixture") && !custom)
        throw std::invalid_argument(
            "validation-error: either 'fixture' or a custom payoff spec "
            "(dimension, horizon, u_values, v_values, payoff1..payoffI) is required");

    if (has("fixture")) {
        std::map<std::string, double> params;
        for (const char* k : {"alpha_start", "alpha_end", "horizon"})
            if (has(k)) params[k] = num(k);
        try {
            cfg.spec = load_builtin(raw("fixture").value, params);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("validation-error: ") + e.what());
        }
    } else {
        for (const char* k : {"dimension", "horizon", "u_values", "v_values", "payoff1",
                              "payoff2"})
            if (!has(k))
                throw std::invalid_argument(
                    std::string("validation-error: custom spec needs key '") + k + "'");
        long dim = integer("dimension");
        if (dim != 2 && dim != 3)
            throw std::invalid_argument("validation-error: dimension must be 2 or 3");
        double horizon = num("horizon");
        if (!(horizon > 0.0))
            throw std::invalid_argument("validation-error: horizon must be positive");
        std::vector<double> uv = arr("u_values"), vv = arr("v_values");
        if (uv.empty() || vv.empty())
            throw std::invalid_argument(
                "validation-error: u_values and v_values must be nonempty");
        std::size_t cells = uv.size() * vv.size();
        std::vector<std::vector<double>> tensors;
        for (int i = 0; i < dim; ++i) {
            std::string key = "payoff" + std::to_string(i + 1);
            if (!has(key.c_str()))
                throw std::invalid_argument("validation-error: custom spec needs key '" +
                                            key + "'");
            std::vector<double> t = arr(key.c_str());
            if (t.size() != cells)
                throw std::invalid_argument(
                    "validation-error: " + key + " needs " + std::to_string(cells) +
                    " entries (|u_values| x |v_values|, row-major), got " +
                    std::to_string(t.size()));
            tensors.push_back(std::move(t));
        }
        if (dim == 2 && has("payoff3"))
            throw std::invalid_argument(
                "validation-error: payoff3 given but dimension is 2");
        GameSpec g;
        g.name = "custom";
        g.dimension = int(dim);
        g.horizon = horizon;
        g.kind = GameSpec::Kind::payoff;
        g.actions.u = uv;
        g.actions.v = vv;
        std::size_t nv = vv.size();
        g.payoff = [uv, vv, tensors, nv](int state, double, double u, double v) {
            std::size_t iu = 0, iv = 0;
            for (std::size_t k = 1; k < uv.size(); ++k)
                if (std::abs(uv[k] - u) < std::abs(uv[iu] - u)) iu = k;
            for (std::size_t k = 1; k < vv.size(); ++k)
                if (std::abs(vv[k] - v) < std::abs(vv[iv] - v)) iv = k;
            return tensors[std::size_t(state)][iu * nv + iv];
        };
        cfg.spec = g;
    }

    int dim = cfg.spec.dimension;
    if (has("t0")) cfg.t0 = num("t0");
    if (!(cfg.t0 >= 0.0) || !(cfg.t0 < cfg.spec.horizon))
        throw std::invalid_argument("validation-error: t0 must lie in [0, horizon)");

    if (has("p0")) {
        std::vector<double> p = arr("p0");
        if (int(p.size()) != dim)
            throw std::invalid_argument("validation-error: p0 needs " +
                                        std::to_string(dim) + " entries");
        double sum = 0.0;
        for (double x : p) {
            if (x < -1e-9)
                throw std::invalid_argument("validation-error: p0 entries must be >= 0");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", sum);
            throw std::invalid_argument(
                std::string("validation-error: p0 must sum to 1 (got ") + buf + ")");
        }
        for (double& x : p) x = std::max(x, 0.0) / sum;
        cfg.p0 = dim == 2 ? SimplexPoint(p[0], p[1]) : SimplexPoint(p[0], p[1], p[2]);
    } else {
        cfg.p0 = dim == 2 ? SimplexPoint(0.5, 0.5)
                          : SimplexPoint(1.0 / 3, 1.0 / 3, 1.0 / 3);
    }

    if (has("n")) cfg.n = int(integer("n"));
    if (has("m")) cfg.m = int(integer("m"));
    if (has("paths")) cfg.paths = integer("paths");
    if (has("min_visits")) cfg.min_visits = integer("min_visits");
    if (cfg.n < 1 || cfg.m < 1 || cfg.paths < 1 || cfg.min_visits < 1)
        throw std::invalid_argument(
            "validation-error: n, m, paths, min_visits must be positive");
    if (has("seed")) {
        const std::string& tok = raw("seed").value;
        const char* c = tok.c_str();
        char* end = nullptr;
        unsigned long long v = std::strtoull(c, &end, 10);
        if (end == c || *end != '\0' || tok.front() == '-')
            throw std::invalid_argument("validation-error: seed must be a nonnegative integer");
        cfg.seed = v;
    }
    if (has("out")) cfg.out = raw("out").value;
    if (has("slice_times")) {
        cfg.slice_times = arr("slice_times");
        if (cfg.slice_times.empty())
            throw std::invalid_argument("validation-error: slice_times must be nonempty");
        for (double t : cfg.slice_times)
            if (t < cfg.t0 - 1e-9 || t > cfg.spec.horizon + 1e-9)
                throw std::invalid_argument("validation-error: slice time " +
                                            std::to_string(t) + " outside [t0, horizon]");
    } else {
        cfg.slice_times = {cfg.t0};
    }
    if (has("h_tolerance_c")) cfg.h_tolerance_c = num("h_tolerance_c");
    if (cfg.h_tolerance_c < 0.0)
        throw std::invalid_argument("validation-error: h_tolerance_c must be >= 0");
    if (has("dual_box")) cfg.dual_box = num("dual_box");
    if (cfg.dual_box < 0.0)
        throw std::invalid_argument("validation-error: dual_box must be >= 0");
    if (has("dual_resolution")) cfg.dual_resolution = int(integer("dual_resolution"));
    if (cfg.dual_resolution < 0)
        throw std::invalid_argument("validation-error: dual_resolution must be >= 0");
    if (has("theta")) cfg.theta = num("theta");
    if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0))
        throw std::invalid_argument("validation-error: theta must lie in [0,1]");
    if (has("perturb")) cfg.perturb = raw("perturb").value;
    if (cfg.perturb != "none" && cfg.perturb != "delay" && cfg.perturb != "eager" &&
        cfg.perturb != "mix")
        throw std::invalid_argument("validation-error: perturb must be one of "
                                    "none, delay, eager, mix");
    if (has("opponent")) cfg.opponent = raw("opponent").value;
    if (cfg.opponent != "all" && cfg.opponent != "posterior_best_response" &&
        cfg.opponent != "constant" && cfg.opponent != "uniform_random" &&
        cfg.opponent != "i_clairvoyant")
        throw std::invalid_argument(
            "validation-error: opponent must be one of all, posterior_best_response, "
            "constant, uniform_random, i_clairvoyant");
    if (has("constant_v")) cfg.constant_v = num("constant_v");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("parse-error: cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace vexgame
