#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spdelq::csv {

/// Shortest text that is still 17 significant digits: "%.17g" without locale effects.
std::string format(double v);

void write_header(std::ostream& os, const std::vector<std::string>& columns);
void write_row(std::ostream& os, std::span<const double> values);

}  // namespace spdelq::csv
