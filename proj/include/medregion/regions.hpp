#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace medregion {

// The six anatomical regions, ids 1..6, in canonical order.
inline constexpr int kNumRegions = 6;

struct RegionInfo {
  int id;
  std::string_view key;      // manifest / file-name key
  std::string_view name;     // human-readable, used in attribute text
  std::string_view header;   // section header in merged reports
};

inline constexpr std::array<RegionInfo, kNumRegions> kRegions{{
    {1, "lung", "lung", "Lungs:"},
    {2, "large_airways", "large airways", "Large airways:"},
    {3, "mediastinum", "mediastinum", "Mediastinum:"},
    {4, "heart_great_vessels", "heart and great vessels", "Heart and great vessels:"},
    {5, "osseous", "osseous structures", "Osseous structures:"},
    {6, "upper_abdomen", "upper abdomen", "Upper abdomen:"},
}};

inline constexpr bool is_valid_region(int id) { return id >= 1 && id <= kNumRegions; }

// Throws InvalidArgument for ids outside 1..6.
const RegionInfo& region_info(int id);

std::optional<int> region_id_from_key(std::string_view key);

}  // namespace medregion
