#pragma once

#include <array>
#include <string>
#include <string_view>

namespace topo {

// Label order is fixed for the lifetime of a trained model: O=0, B-LOC=1, I-LOC=2.
inline constexpr int kLabelO = 0;
inline constexpr int kLabelBLoc = 1;
inline constexpr int kLabelILoc = 2;
inline constexpr int kNumLabels = 3;

// Marker for positions excluded from loss and metrics (specials, padding).
inline constexpr int kIgnoreLabel = -1;

const std::array<std::string, 3>& unified_labels();

const std::string& label_name(int id);          // throws on out-of-range id
int label_id(std::string_view name);            // -1 if not a unified label

inline bool is_location_label(int id) { return id == kLabelBLoc || id == kLabelILoc; }

}  // namespace topo
