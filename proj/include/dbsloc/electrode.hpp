#pragma once

#include <optional>
#include <string_view>

namespace dbs {

/// Hemisphere of an electrode; left is world x below the sagittal midline.
enum class ElectrodeLabel { Left, Right, Unassigned };

std::string_view to_string(ElectrodeLabel label) noexcept;
std::optional<ElectrodeLabel> parse_label(std::string_view text) noexcept;

}  // namespace dbs
