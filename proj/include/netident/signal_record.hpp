#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace netident {

/// Multichannel time series from simulation: node signals w plus retained
/// diagnostics (e, v, r). All channels share the same length; values finite.
struct SignalRecord {
    int N = 0;
    std::vector<std::string> names; // e.g. "w1".."wL", "e1".., "v1".., "r1"..
    Eigen::MatrixXd data;           // N x channels

    bool has(const std::string& name) const;
    int column_index(const std::string& name) const; // throws Error if absent
    Eigen::VectorXd column(const std::string& name) const;

    void validate() const; // throws Error on shape/NaN problems

    /// Flat columnar text with a header naming channels; stable layout.
    void write(std::ostream& os) const;
    void write_file(const std::string& path) const;
    static SignalRecord read(std::istream& is);
    static SignalRecord read_file(const std::string& path);
};

} // namespace netident
