#pragma once

#include <algorithm>
#include <vector>

#include <nlohmann/json.hpp>

namespace duet {

// Axis-aligned word rectangle covering pixels [x1, x2) x [y1, y2).
// Width is x2 - x1, so (0,0,10,10) has area 100.
struct WordBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }
  bool contains(int x, int y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }

  WordBox translated(int dx, int dy) const { return {x1 + dx, y1 + dy, x2 + dx, y2 + dy}; }
  WordBox clipped(int width, int height) const {
    return {std::clamp(x1, 0, width), std::clamp(y1, 0, height),
            std::clamp(x2, 0, width), std::clamp(y2, 0, height)};
  }

  friend bool operator==(const WordBox&, const WordBox&) = default;
};

using BoxList = std::vector<WordBox>;

// [x1,y1,x2,y2] arrays, the on-disk form used by manifests and box files.
inline void to_json(nlohmann::json& j, const WordBox& b) { j = {b.x1, b.y1, b.x2, b.y2}; }
inline void from_json(const nlohmann::json& j, WordBox& b) {
  b = {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

}  // namespace duet
