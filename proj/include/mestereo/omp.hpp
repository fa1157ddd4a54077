#pragma once

// Include this instead of <omp.h> so kernels still build without OpenMP.
#if defined(_OPENMP)
#include <omp.h>
namespace mestereo {
inline constexpr bool kUseOpenMP = true;
}  // namespace mestereo
#else
namespace mestereo {
inline constexpr bool kUseOpenMP = false;
}  // namespace mestereo
inline int omp_get_max_threads() { return 1; }
inline int omp_get_thread_num() { return 0; }
inline void omp_set_num_threads(int) {}
#endif
