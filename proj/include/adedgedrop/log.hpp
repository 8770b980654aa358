#ifndef ADEDGEDROP_LOG_HPP
#define ADEDGEDROP_LOG_HPP

#include <string_view>

namespace adedgedrop::log {

/// Writes "warning: <msg>" to stderr unless warnings are silenced.
void warn(std::string_view msg);

void set_quiet(bool quiet);
bool quiet();

}  // namespace adedgedrop::log

#endif  // ADEDGEDROP_LOG_HPP
