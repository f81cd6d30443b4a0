#pragma once

#include <string>
#include <vector>

#include "binagree/agreement.hpp"
#include "binagree/simulation.hpp"

namespace binagree {

/// Bland-Altman scatter: one circle per subject, dashed mean-difference line,
/// dotted limits of agreement. 640x480, 5% padding around the data range.
std::string render_ba_svg(const BASummary& ba);

/// Rejection rate against beta_1, one polyline per spec, with a dotted
/// reference line at alpha.
std::string render_power_svg(const PowerTable& table);

}  // namespace binagree
