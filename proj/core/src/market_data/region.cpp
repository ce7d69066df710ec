#include "epf/market_data/region.hpp"

#include <algorithm>
#include <cctype>

#include "epf/error.hpp"

namespace epf {

std::string_view to_string(Region r) {
    switch (r) {
        case Region::QLD: return "QLD";
        case Region::NSW: return "NSW";
        case Region::VIC: return "VIC";
        case Region::SA: return "SA";
        case Region::TAS: return "TAS";
    }
    return "?";
}

Region parse_region(std::string_view text) {
    std::string key(text);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (key.size() > 1 && key.back() == '1') key.pop_back();
    for (Region r : kAllRegions) {
        if (to_string(r) == key) return r;
    }
    throw ConfigError("unknown region '" + std::string(text) + "'");
}

std::string aemo_region_id(Region r) { return std::string(to_string(r)) + "1"; }

}  // namespace epf
