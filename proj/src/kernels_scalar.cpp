// Scalar reference kernels. Compiled without extra target flags; this is the
// baseline every SIMD variant is checked against.

#include <cmath>

#include "kernels_exp.hpp"
#include "kernels_table.hpp"

namespace spg::kernels {
namespace {
#include "kernels_generic.inl"
}  // namespace

const KernelTable* scalar_table() {
  static const KernelTable table = generic_table();
  return &table;
}

}  // namespace spg::kernels
