#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "roughlab/config.hpp"
#include "roughlab/errors.hpp"

#ifndef ROUGHLAB_VERSION
#define ROUGHLAB_VERSION "0.0.0"
#endif

namespace roughlab {

/// Sweep and verification settings that live next to the problem in a config file.
struct StudyConfig {
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    /// Multiplies the mesh resolution of every sweep row (top edge, bulk edge, cylinder).
    double refine = 1.0;
    int threads = 1;
    /// Refinement factors of the resolution study; empty skips it.
    std::vector<double> levels;

    /// Closed-form test fields for verify concentration.
    std::string u = "cos_exp";
    std::string phi = "one";
    bool compose_f = false;
    std::vector<double> verify_eps_list{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
    /// Random smooth fields per epsilon for verify bounds / lipschitz.
    int samples = 4;
    std::uint64_t seed = 12345;

    bool operator==(const StudyConfig&) const = default;
};

struct RunConfig {
    ProblemConfig problem;
    StudyConfig study;
    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    }
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size()) throw ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
    const double v = parse_double(key, text);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return static_cast<long long>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

} // namespace detail

/// Comma-separated list of numbers; empty entries are rejected.
inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError(key + ": empty list entry");
        out.push_back(detail::parse_double(key, item.substr(b, e - b + 1)));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

namespace detail {

/// Typed binding of one INI key to a field.
struct Binding {
    std::function<void(const std::string&)> read;
    std::function<std::string()> write;
};

inline std::map<std::string, std::map<std::string, Binding>> bindings(RunConfig& rc) {
    auto& p = rc.problem;
    auto& s = rc.study;
    auto num = [](const std::string& k, double& ref) {
        return Binding{[&ref, k](const std::string& t) { ref = parse_double(k, t); },
                       [&ref] { return format_double(ref); }};
    };
    auto integer = [](const std::string& k, int& ref) {
        return Binding{[&ref, k](const std::string& t) { ref = static_cast<int>(parse_integer(k, t)); },
                       [&ref] { return std::to_string(ref); }};
    };
    auto flag = [](const std::string& k, bool& ref) {
        return Binding{[&ref, k](const std::string& t) { ref = parse_bool(k, t); },
                       [&ref] { return std::string(ref ? "true" : "false"); }};
    };
    auto text = [](std::string& ref) {
        return Binding{[&ref](const std::string& t) { ref = t; }, [&ref] { return ref; }};
    };
    auto list = [](const std::string& k, std::vector<double>& ref) {
        return Binding{[&ref, k](const std::string& t) { ref = t.empty() ? std::vector<double>{} : parse_list(k, t); },
                       [&ref] { return format_list(ref); }};
    };
    std::map<std::string, std::map<std::string, Binding>> m;
    m["problem"] = {{"epsilon", num("problem.epsilon", p.epsilon)},
                    {"gamma", num("problem.gamma", p.gamma)},
                    {"beta", num("problem.beta", p.beta)},
                    {"p", num("problem.p", p.p)}};
    m["functions"] = {{"g", text(p.functions.g)},
                      {"psi", text(p.functions.psi)},
                      {"h", text(p.functions.h)},
                      {"f", text(p.functions.f)},
                      {"h_constant", num("functions.h_constant", p.functions.h_constant)}};
    m["mesh"] = {{"target_edge", num("mesh.target_edge", p.mesh.target_edge)},
                 {"top_edge", num("mesh.top_edge", p.mesh.top_edge)},
                 {"strip_layers", integer("mesh.strip_layers", p.mesh.strip_layers)},
                 {"grading", num("mesh.grading", p.mesh.grading)},
                 {"cylinder_resolution", integer("mesh.cylinder_resolution", p.mesh.cylinder_resolution)}};
    m["solver"] = {{"rtol", num("solver.rtol", p.solver.rtol)},
                   {"atol", num("solver.atol", p.solver.atol)},
                   {"max_iterations", integer("solver.max_iterations", p.solver.max_iterations)},
                   {"max_halvings", integer("solver.max_halvings", p.solver.max_halvings)},
                   {"delta_factor", num("solver.delta_factor", p.solver.delta_factor)},
                   {"delta_floor", num("solver.delta_floor", p.solver.delta_floor)},
                   {"p_step", num("solver.p_step", p.solver.p_step)},
                   {"picard_fallback", flag("solver.picard_fallback", p.solver.picard_fallback)},
                   {"use_cg", flag("solver.use_cg", p.solver.use_cg)},
                   {"cg_tol", num("solver.cg_tol", p.solver.cg_tol)},
                   {"mu_cells", integer("solver.mu_cells", p.solver.mu_cells)}};
    m["sweep"] = {{"eps_list", list("sweep.eps_list", s.eps_list)},
                  {"refine", num("sweep.refine", s.refine)},
                  {"threads", integer("sweep.threads", s.threads)},
                  {"levels", list("sweep.levels", s.levels)}};
    m["verify"] = {{"u", text(s.u)},
                   {"phi", text(s.phi)},
                   {"compose_f", flag("verify.compose_f", s.compose_f)},
                   {"eps_list", list("verify.eps_list", s.verify_eps_list)},
                   {"samples", integer("verify.samples", s.samples)},
                   {"seed", Binding{[&s](const std::string& t) {
                                        const auto v = parse_integer("verify.seed", t);
                                        if (v < 0) throw ConfigError("verify.seed must be >= 0");
                                        s.seed = static_cast<std::uint64_t>(v);
                                    },
                                    [&s] { return std::to_string(s.seed); }}}};
    return m;
}

} // namespace detail

inline void validate(const StudyConfig& s) {
    for (double e : s.eps_list)
        if (!(e > 0.0)) throw ConfigError("sweep.eps_list entries must be > 0");
    for (std::size_t k = 1; k < s.eps_list.size(); ++k)
        if (!(s.eps_list[k] < s.eps_list[k - 1])) throw ConfigError("sweep.eps_list must be strictly decreasing");
    if (s.eps_list.empty()) throw ConfigError("sweep.eps_list is empty");
    for (std::size_t k = 1; k < s.verify_eps_list.size(); ++k)
        if (!(s.verify_eps_list[k] < s.verify_eps_list[k - 1]))
            throw ConfigError("verify.eps_list must be strictly decreasing");
    if (!(s.refine >= 1.0)) throw ConfigError("sweep.refine must be >= 1");
    if (s.threads < 1) throw ConfigError("sweep.threads must be >= 1");
    if (!s.levels.empty() && s.levels.size() < 3) throw ConfigError("sweep.levels needs at least 3 entries");
    for (double l : s.levels)
        if (!(l > 0.0)) throw ConfigError("sweep.levels entries must be > 0");
    if (s.samples < 1) throw ConfigError("verify.samples must be >= 1");
}

/**
 * @brief Reads an INI config. Unknown sections or keys, malformed values, and
 * unknown registry keys raise ConfigError. Missing keys keep their defaults.
 */
inline RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) +
                          ")");
    }
    RunConfig rc;
    auto table = detail::bindings(rc);
    for (const auto& [section, body] : tree) {
        auto sec = table.find(section);
        if (sec == table.end()) {
            if (!body.data().empty()) throw ConfigError("malformed config: key '" + section + "' outside a section");
            throw ConfigError("unknown config section [" + section + "]");
        }
        for (const auto& [key, value] : body) {
            auto b = sec->second.find(key);
            if (b == sec->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            b->second.read(value.get_value<std::string>());
        }
    }
    validate(rc.problem);
    make_model(rc.problem.functions);
    validate(rc.study);
    return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in);
}

/// Canonical INI text of a resolved config: fixed section and key order, %.17g numbers.
inline std::string canonical_text(const RunConfig& rc) {
    RunConfig copy = rc;
    auto table = detail::bindings(copy);
    std::string out;
    for (const char* section : {"problem", "functions", "mesh", "solver", "sweep", "verify"}) {
        out += "[" + std::string(section) + "]\n";
        for (const auto& [key, b] : table.at(section)) out += key + " = " + b.write() + "\n";
    }
    return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const RunConfig& rc) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(rc))));
    return buf;
}

struct RunManifest {
    std::string command;
    std::string config_path;
    RunConfig config;
    std::filesystem::path output_dir;
    std::string hash;
    std::string version = ROUGHLAB_VERSION;
};

inline RunManifest make_manifest(const std::string& command, const std::string& config_path, const RunConfig& rc,
                                 const std::filesystem::path& root) {
    RunManifest m;
    m.command = command;
    m.config_path = config_path;
    m.config = rc;
    m.hash = config_hash(rc);
    m.output_dir = root / command / m.hash;
    return m;
}

inline void write_manifest(std::ostream& os, const RunManifest& m) {
    os << "[run]\n"
       << "command = " << m.command << "\n"
       << "config_path = " << m.config_path << "\n"
       << "output_dir = " << m.output_dir.generic_string() << "\n"
       << "hash = " << m.hash << "\n"
       << "version = " << m.version << "\n"
       << canonical_text(m.config);
}

} // namespace roughlab
