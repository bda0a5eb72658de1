#pragma once

#include <cstddef>
#include <vector>

#include "blaircomp/linalg.hpp"

namespace blaircomp {

/// Stacked variable z = (h_1, x_1, ..., h_s, x_s).
struct Iterate {
  std::vector<CVec> h;
  std::vector<CVec> x;
  std::size_t t = 0;

  std::size_t s() const { return h.size(); }
};

/// Wirtinger gradient blocks, one (grad_h, grad_x) pair per node.
struct GradientBlocks {
  std::vector<CVec> h;
  std::vector<CVec> x;

  std::size_t s() const { return h.size(); }
};

}  // namespace blaircomp
