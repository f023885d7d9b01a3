#pragma once

#include <optional>
#include <string>

namespace bcnn {

/// Kernel set the BLAS backend picked when it was loaded (e.g. "SkylakeX").
std::string blas_kernel_name();

/// A suggested OPENBLAS_CORETYPE when the backend fell back to pre-AVX2
/// kernels on a CPU that supports AVX2 or AVX-512; nullopt otherwise. The
/// variable is read at library load, so it has to be set before the process
/// starts.
std::optional<std::string> blas_coretype_hint();

}  // namespace bcnn
