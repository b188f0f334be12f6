#pragma once

#include <string_view>

namespace spatialdiar {

void log_warning(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace spatialdiar
