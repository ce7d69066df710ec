#pragma once

#include <array>
#include <string>
#include <string_view>

namespace epf {

// The five NEM regions, in report order.
enum class Region { QLD, NSW, VIC, SA, TAS };

inline constexpr std::array<Region, 5> kAllRegions{Region::QLD, Region::NSW, Region::VIC,
                                                   Region::SA, Region::TAS};

[[nodiscard]] std::string_view to_string(Region r);

// Accepts "QLD" (any case) as well as AEMO's region ids ("QLD1").
[[nodiscard]] Region parse_region(std::string_view text);

// AEMO REGIONID column value, e.g. "QLD1".
[[nodiscard]] std::string aemo_region_id(Region r);

}  // namespace epf
