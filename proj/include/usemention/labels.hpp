#pragma once

#include <string_view>

namespace usemention {

/// Task 1: positive = use. Task 2: positive = hateful / misinformation.
enum class Label { positive, negative, unparseable };

std::string_view to_string(Label l);
Label parse_label_name(std::string_view s);

} // namespace usemention
