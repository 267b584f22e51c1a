#pragma once

namespace zsncd {

/// Caps the OpenMP worker count for subsequent parallel regions.
void set_thread_count(int n);
int thread_count();

}  // namespace zsncd
