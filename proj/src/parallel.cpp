#include "pwmd/parallel.hpp"

#include <omp.h>

namespace pwmd {

int max_threads() noexcept { return omp_get_max_threads(); }

void set_threads(int count) noexcept {
  if (count > 0) omp_set_num_threads(count);
}

}  // namespace pwmd
