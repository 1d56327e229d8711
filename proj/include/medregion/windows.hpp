#pragma once

#include <cstddef>

namespace medregion {

// Adaptive-pooling window of output cell i when `in` cells are pooled to
// `out`: [floor(i*in/out), ceil((i+1)*in/out)).
struct Window {
  std::size_t begin;
  std::size_t end;
};

inline Window adaptive_window(std::size_t i, std::size_t in, std::size_t out) {
  return {i * in / out, ((i + 1) * in + out - 1) / out};
}

}  // namespace medregion
