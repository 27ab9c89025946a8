#pragma once

namespace voxclust {

/// Caps the worker count used by the parallel passes. Results never depend on it.
void set_thread_count(int n);
int thread_count();

}  // namespace voxclust
