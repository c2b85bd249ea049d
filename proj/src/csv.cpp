#include "spdelq/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace spdelq::csv {

std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

void write_header(std::ostream& os, const std::vector<std::string>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i > 0) os << ',';
        os << columns[i];
    }
    os << '\n';
}

void write_row(std::ostream& os, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) os << ',';
        os << format(values[i]);
    }
    os << '\n';
}

}  // namespace spdelq::csv
