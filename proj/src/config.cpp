#include "netident/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "netident/errors.hpp"

namespace netident {

namespace {

[[noreturn]] void fail(const std::string& origin, int lineno, const std::string& msg) {
    throw ConfigParseError(origin + ":" + std::to_string(lineno) + ": " + msg);
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) {
        if (t[0] == '#') break;
        toks.push_back(t);
    }
    return toks;
}

double parse_num(const std::string& origin, int lineno, const std::string& tok) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        fail(origin, lineno, "expected a number, got '" + tok + "'");
    }
    if (pos != tok.size()) fail(origin, lineno, "trailing characters in number '" + tok + "'");
    return v;
}

int parse_node(const std::string& origin, int lineno, const std::string& tok, int L) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        fail(origin, lineno, "expected a node index, got '" + tok + "'");
    }
    if (pos != tok.size() || v < 1 || v > L)
        fail(origin, lineno, "node index '" + tok + "' out of range 1.." + std::to_string(L));
    return static_cast<int>(v - 1);
}

/// Parse "num <...> den <...> [delay <k>]" starting at toks[start].
TransferFunction parse_tf(const std::string& origin, int lineno,
                          const std::vector<std::string>& toks, std::size_t start) {
    std::vector<double> num, den;
    int delay = 0;
    std::size_t k = start;
    enum class Field { none, num, den } field = Field::none;
    while (k < toks.size()) {
        const std::string& t = toks[k];
        if (t == "num") {
            field = Field::num;
            ++k;
        } else if (t == "den") {
            field = Field::den;
            ++k;
        } else if (t == "delay") {
            if (k + 1 >= toks.size()) fail(origin, lineno, "'delay' needs a value");
            delay = static_cast<int>(parse_num(origin, lineno, toks[k + 1]));
            k += 2;
        } else {
            const double v = parse_num(origin, lineno, t);
            if (field == Field::num)
                num.push_back(v);
            else if (field == Field::den)
                den.push_back(v);
            else
                fail(origin, lineno, "coefficient before 'num'/'den' keyword");
            ++k;
        }
    }
    if (num.empty()) fail(origin, lineno, "missing 'num' coefficients");
    if (den.empty()) den.push_back(1.0);
    if (den[0] != 1.0) fail(origin, lineno, "denominator must start with 1");
    if (delay < 0) fail(origin, lineno, "delay must be nonnegative");
    return TransferFunction(std::move(num), std::move(den), delay);
}

} // namespace

NetworkModel load_config(std::istream& is, const std::string& origin) {
    std::string line;
    int lineno = 0;
    bool version_seen = false;
    int L = 0;
    NetworkModel model;
    bool nodes_seen = false;

    while (std::getline(is, line)) {
        ++lineno;
        const auto toks = tokenize(line);
        if (toks.empty()) continue;
        const std::string& key = toks[0];

        if (key == "version") {
            if (toks.size() != 2 || toks[1] != "1")
                fail(origin, lineno, "unsupported schema version (expected 'version 1')");
            version_seen = true;
            continue;
        }
        if (!version_seen) fail(origin, lineno, "file must start with 'version 1'");

        if (key == "nodes") {
            if (toks.size() != 2) fail(origin, lineno, "'nodes' needs a count");
            L = static_cast<int>(parse_num(origin, lineno, toks[1]));
            if (L < 1 || L > 1000) fail(origin, lineno, "node count out of range");
            model = NetworkModel::empty(L);
            nodes_seen = true;
            continue;
        }
        if (!nodes_seen) fail(origin, lineno, "'nodes' must come before '" + key + "'");

        if (key == "label") {
            if (toks.size() != 3) fail(origin, lineno, "'label' needs node and name");
            const int j = parse_node(origin, lineno, toks[1], L);
            model.labels[static_cast<std::size_t>(j)] = toks[2];
        } else if (key == "r") {
            if (toks.size() != 2) fail(origin, lineno, "'r' needs a node index");
            model.r_present[static_cast<std::size_t>(parse_node(origin, lineno, toks[1], L))] = true;
        } else if (key == "module" || key == "noise") {
            if (toks.size() < 4) fail(origin, lineno, "'" + key + "' needs row, column and coefficients");
            const int j = parse_node(origin, lineno, toks[1], L);
            const int k = parse_node(origin, lineno, toks[2], L);
            TransferFunction tf = parse_tf(origin, lineno, toks, 3);
            if (key == "module") {
                if (j == k) fail(origin, lineno, "modules on the diagonal are not allowed");
                model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = std::move(tf);
            } else {
                model.H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = std::move(tf);
            }
        } else if (key == "lambda") {
            if (toks.size() != 4) fail(origin, lineno, "'lambda' needs row, column and value");
            const int j = parse_node(origin, lineno, toks[1], L);
            const int k = parse_node(origin, lineno, toks[2], L);
            const double v = parse_num(origin, lineno, toks[3]);
            model.lambda(j, k) = v;
            model.lambda(k, j) = v;
        } else {
            fail(origin, lineno, "unknown keyword '" + key + "'");
        }
    }
    if (!version_seen) fail(origin, lineno == 0 ? 1 : lineno, "empty config: missing 'version 1'");
    if (!nodes_seen) fail(origin, lineno, "missing 'nodes' declaration");
    return model;
}

NetworkModel load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigParseError("cannot open config file '" + path + "'");
    return load_config(is, path);
}

namespace {
std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_tf(std::ostream& os, const TransferFunction& tf) {
    os << "num";
    for (double c : tf.numerator()) os << " " << fmt17(c);
    os << " den";
    for (double c : tf.denominator()) os << " " << fmt17(c);
    if (tf.dead_time() > 0) os << " delay " << tf.dead_time();
}
} // namespace

void save_config(const NetworkModel& model, std::ostream& os) {
    os << "version 1\n";
    os << "nodes " << model.L << "\n";
    for (int j = 0; j < model.L; ++j) {
        const std::string& lbl = model.labels[static_cast<std::size_t>(j)];
        if (!lbl.empty() && lbl != "w" + std::to_string(j + 1))
            os << "label " << (j + 1) << " " << lbl << "\n";
    }
    for (int j = 0; j < model.L; ++j)
        if (model.r_present[static_cast<std::size_t>(j)]) os << "r " << (j + 1) << "\n";
    for (int j = 0; j < model.L; ++j)
        for (int k = 0; k < model.L; ++k) {
            const auto& tf = model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            if (tf.is_zero()) continue;
            os << "module " << (j + 1) << " " << (k + 1) << " ";
            write_tf(os, tf);
            os << "\n";
        }
    for (int j = 0; j < model.L; ++j)
        for (int k = 0; k < model.L; ++k) {
            const auto& tf = model.H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            if (j == k && tf.is_monic() && tf.numerator().size() == 1 && tf.denominator().size() == 1)
                continue; // identity default
            if (tf.is_zero()) continue;
            os << "noise " << (j + 1) << " " << (k + 1) << " ";
            write_tf(os, tf);
            os << "\n";
        }
    for (int j = 0; j < model.L; ++j)
        for (int k = j; k < model.L; ++k) {
            const double v = model.lambda(j, k);
            const double dflt = (j == k) ? 1.0 : 0.0;
            if (v != dflt) os << "lambda " << (j + 1) << " " << (k + 1) << " " << fmt17(v) << "\n";
        }
}

void save_config_file(const NetworkModel& model, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    save_config(model, os);
}

} // namespace netident
