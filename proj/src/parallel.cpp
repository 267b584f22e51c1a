#include "zsncd/parallel.hpp"

#include <omp.h>

#include "zsncd/error.hpp"

namespace zsncd {

void set_thread_count(int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "thread count must be positive");
  omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace zsncd
