#pragma once

#include <string>

namespace biasci {

/// Number formatting for CSV cells: 15 significant digits, '.' decimal
/// separator, locale-free.
std::string fmt_csv(double v);

/// Number formatting for human-readable summaries: 6 significant digits.
std::string fmt_human(double v);

} // namespace biasci
