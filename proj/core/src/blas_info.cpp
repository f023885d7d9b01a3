#include <cblas.h>

#include <array>
#include <string_view>

#include "bcnn/blas.hpp"

namespace bcnn {

std::string blas_kernel_name() { return openblas_get_corename(); }

std::optional<std::string> blas_coretype_hint() {
  constexpr std::array<std::string_view, 8> kGeneric{"Prescott", "Core2",   "Penryn", "Dunnington",
                                                     "Nehalem",  "Atom",    "Barcelona", "Unknown"};
  const std::string name = blas_kernel_name();
  bool generic = false;
  for (auto g : kGeneric) generic = generic || std::string_view(name) == g;
  if (!generic) return std::nullopt;
#if defined(__x86_64__) || defined(__i386__)
  if (__builtin_cpu_supports("avx512f")) return "SkylakeX";
  if (__builtin_cpu_supports("avx2")) return "Haswell";
#endif
  return std::nullopt;
}

}  // namespace bcnn
