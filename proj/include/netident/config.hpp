#pragma once

#include <iosfwd>
#include <string>

#include "netident/network_model.hpp"

namespace netident {

/// Network config file, schema v1. Line oriented, '#' comments:
///
///   version 1
///   nodes 6
///   label 2 boiler            # optional node names
///   r 4                       # external excitation present at node 4
///   module 2 1 num 0 0.8 den 1 -0.5 delay 0     # G_{2,1}
///   noise 2 2 num 1 den 1 -0.3                  # H_{2,2}; diagonal defaults to 1
///   lambda 2 4 0.8            # Lambda entries, symmetric; diagonal defaults to 1
///
/// Node indices are 1-based in the file. load/save round-trip losslessly on
/// canonical files.
NetworkModel load_config(std::istream& is, const std::string& origin = "<stream>");
NetworkModel load_config_file(const std::string& path);

void save_config(const NetworkModel& model, std::ostream& os);
void save_config_file(const NetworkModel& model, const std::string& path);

} // namespace netident
