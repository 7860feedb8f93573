#include "ifgf/common.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ifgf {

void ParallelErrors::capture(std::exception_ptr e) noexcept {
#ifdef _OPENMP
#pragma omp critical(ifgf_parallel_errors)
#endif
    {
        if (!failed_) {
            err_ = e;
            failed_ = true;
        }
    }
}

int resolve_workers(int requested) {
#ifdef _OPENMP
    if (requested > 0) return requested;
    return std::max(1, omp_get_max_threads());
#else
    (void)requested;
    return 1;
#endif
}

}  // namespace ifgf
