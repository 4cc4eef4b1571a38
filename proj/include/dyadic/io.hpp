#pragma once

#include <chrono>
#include <fstream>
#include <iomanip>

#include "dyadic/lab.hpp"

namespace dyadic {

// Function file: header "d L", then 2^{Ld} cell values row-major, one per line.
inline void write_function(std::ostream& os, const GridFunction& f) {
    os << f.domain().dim << " " << f.domain().max_level << "\n";
    os << std::setprecision(17);
    for (std::int64_t c = 0; c < f.size(); ++c) os << f[c] << "\n";
}

inline GridFunction read_function(std::istream& is) {
    int d = 0, L = 0;
    if (!(is >> d >> L)) throw std::runtime_error("function file: bad header (want 'd L')");
    Domain dom(d, L);
    std::vector<double> v(dom.cell_count());
    for (auto& x : v)
        if (!(is >> x)) throw std::runtime_error("function file: too few values");
    return GridFunction(dom, std::move(v));
}

inline void write_function_file(const std::string& path, const GridFunction& f) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_function(os, f);
}

inline GridFunction read_function_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_function(is);
}

namespace detail {
inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, sep)) out.push_back(tok);
    return out;
}
inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (auto& t : split(s, ',')) out.push_back(std::stod(t));
    return out;
}
}  // namespace detail

// Power weight dist(x, center)^a on cell midpoints, distance clamped below at
// half a cell so negative exponents stay finite.
inline GridFunction power_weight(const Domain& dom, double a, const std::vector<double>& center) {
    if (static_cast<int>(center.size()) != dom.dim)
        throw std::invalid_argument("power weight: center dimension mismatch");
    std::int64_t n = dom.cells_per_side();
    double clamp = 0.5 / static_cast<double>(n);
    std::vector<double> v(dom.cell_count());
    std::array<std::int64_t, kMaxDim> k{};
    for (std::int64_t c = 0; c < dom.cell_count(); ++c) {
        std::int64_t rest = c;
        for (int i = dom.dim - 1; i >= 0; --i) {
            k[i] = rest % n;
            rest /= n;
        }
        double d2 = 0.0;
        for (int i = 0; i < dom.dim; ++i) {
            double x = (static_cast<double>(k[i]) + 0.5) / static_cast<double>(n);
            d2 += (x - center[i]) * (x - center[i]);
        }
        v[c] = std::pow(std::max(std::sqrt(d2), clamp), a);
    }
    return GridFunction(dom, std::move(v));
}

// Mini-language: const:c | power:a:c1,...,cd | cells:v1,v2,... |
// random-lognormal:seed:sigma | file:path
inline GridFunction weight_from_spec(const Domain& dom, const std::string& spec) {
    auto pos = spec.find(':');
    std::string kind = spec.substr(0, pos);
    std::string rest = pos == std::string::npos ? "" : spec.substr(pos + 1);
    if (kind == "const") {
        return GridFunction::constant(dom, std::stod(rest));
    }
    if (kind == "power") {
        auto parts = detail::split(rest, ':');
        if (parts.size() != 2) throw std::invalid_argument("power weight spec: want power:a:center");
        return power_weight(dom, std::stod(parts[0]), detail::parse_double_list(parts[1]));
    }
    if (kind == "cells") {
        auto vals = detail::parse_double_list(rest);
        if (static_cast<std::int64_t>(vals.size()) != dom.cell_count())
            throw std::invalid_argument("cells weight spec: wrong value count");
        return GridFunction(dom, std::move(vals));
    }
    if (kind == "random-lognormal") {
        auto parts = detail::split(rest, ':');
        if (parts.size() != 2) throw std::invalid_argument("random-lognormal spec: want seed:sigma");
        Rng rng(static_cast<std::uint64_t>(std::stoull(parts[0])));
        double sigma = std::stod(parts[1]);
        std::vector<double> v(dom.cell_count());
        for (auto& x : v) x = rng.lognormal(sigma);
        return GridFunction(dom, std::move(v));
    }
    if (kind == "file") {
        GridFunction f = read_function_file(rest);
        if (f.domain().dim != dom.dim || f.domain().max_level != dom.max_level)
            throw std::invalid_argument("file weight spec: domain mismatch in " + rest);
        return f;
    }
    throw std::invalid_argument("unknown weight spec '" + spec + "'");
}

// Sparse collection file: one cube per line in the cube text form.
inline void write_collection(std::ostream& os, const DyadicTree& tree, const std::vector<std::int64_t>& nodes) {
    for (auto n : nodes) os << tree.cube_of(n).text() << "\n";
}

inline std::vector<std::int64_t> read_collection(std::istream& is, const DyadicTree& tree) {
    std::vector<std::int64_t> nodes;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        nodes.push_back(tree.node_of(Cube::parse(line)));
    }
    return nodes;
}

inline std::vector<std::int64_t> read_collection_file(const std::string& path, const DyadicTree& tree) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_collection(is, tree);
}

// Plain key=value config, '#' comments.
inline std::map<std::string, std::string> read_config(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

inline void write_csv(std::ostream& os, const ExperimentReport& rep, bool timestamp) {
    if (timestamp) {
        auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        os << "# generated " << std::put_time(std::gmtime(&t), "%F %T UTC") << "\n";
    }
    os << "# " << rep.summary() << "\n";
    // run timing is nondeterministic, so it rides with the timestamp flag
    if (timestamp && rep.runtime_s > 0.0) os << "# runtime_s = " << rep.runtime_s << "\n";
    for (auto& [k, v] : rep.stats) os << "# " << k << " = " << std::setprecision(17) << v << "\n";
    if (!rep.note.empty()) os << "# " << rep.note << "\n";
    for (std::size_t i = 0; i < rep.columns.size(); ++i) os << (i ? "," : "") << rep.columns[i];
    os << "\n";
    os << std::setprecision(17);
    for (auto& row : rep.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
}

}  // namespace dyadic
