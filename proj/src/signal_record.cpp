#include "netident/signal_record.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "netident/errors.hpp"

namespace netident {

bool SignalRecord::has(const std::string& name) const {
    for (const auto& n : names)
        if (n == name) return true;
    return false;
}

int SignalRecord::column_index(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return static_cast<int>(k);
    throw Error("signal record has no channel named '" + name + "'");
}

Eigen::VectorXd SignalRecord::column(const std::string& name) const {
    return data.col(column_index(name));
}

void SignalRecord::validate() const {
    if (data.rows() != N || data.cols() != static_cast<Eigen::Index>(names.size()))
        throw Error("signal record shape mismatch");
    if (!data.allFinite()) throw Error("signal record contains non-finite values");
}

namespace {
std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

void SignalRecord::write(std::ostream& os) const {
    os << "# netident-signals v1\n";
    os << "# N " << N << "\n";
    os << "# channels t";
    for (const auto& n : names) os << " " << n;
    os << "\n";
    for (int t = 0; t < N; ++t) {
        os << t;
        for (Eigen::Index c = 0; c < data.cols(); ++c) os << " " << fmt17(data(t, c));
        os << "\n";
    }
}

void SignalRecord::write_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    write(os);
}

SignalRecord SignalRecord::read(std::istream& is) {
    SignalRecord rec;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            if (key == "channels") {
                std::string tcol;
                ls >> tcol;
                if (tcol != "t")
                    throw Error("signals file line " + std::to_string(lineno) +
                                ": first channel must be 't'");
                std::string name;
                while (ls >> name) rec.names.push_back(name);
                header_seen = true;
            }
            continue;
        }
        if (!header_seen)
            throw Error("signals file line " + std::to_string(lineno) + ": data before header");
        std::istringstream ls(line);
        long t = 0;
        if (!(ls >> t))
            throw Error("signals file line " + std::to_string(lineno) + ": bad sample index");
        std::vector<double> row;
        row.reserve(rec.names.size());
        double v = 0.0;
        while (ls >> v) row.push_back(v);
        if (row.size() != rec.names.size())
            throw Error("signals file line " + std::to_string(lineno) + ": expected " +
                        std::to_string(rec.names.size()) + " values, got " +
                        std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    rec.N = static_cast<int>(rows.size());
    rec.data.resize(rec.N, static_cast<Eigen::Index>(rec.names.size()));
    for (int t = 0; t < rec.N; ++t)
        for (std::size_t c = 0; c < rec.names.size(); ++c)
            rec.data(t, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(t)][c];
    rec.validate();
    return rec;
}

SignalRecord SignalRecord::read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open signals file '" + path + "'");
    return read(is);
}

} // namespace netident
