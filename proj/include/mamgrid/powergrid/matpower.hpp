#pragma once

#include <string>
#include <string_view>

#include "mamgrid/powergrid/case.hpp"

namespace mamgrid::powergrid {

/// Converts a MATPOWER version-2 case (`mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
/// `mpc.branch`, optional `mpc.gencost`) into a validated GridCase.
///
/// Out-of-service generators and branches are dropped, each bus with nonzero
/// Pd/Qd becomes one Load, and polynomial cost rows map onto CostCurve. A
/// generator is marked controllable when it sits off the slack bus, has a
/// non-degenerate P range, and produces a positive P set-point.
GridCase parse_matpower(std::string_view text, std::string name = {});

GridCase load_matpower_file(const std::string& path);

}  // namespace mamgrid::powergrid
