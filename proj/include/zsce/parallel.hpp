#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace zsce {

/// Number of workers to use when the caller passes jobs == 0 ("auto").
inline int hardware_jobs() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Data-parallel loop over [0, n). jobs <= 1 runs the serial reference path;
/// jobs > 1 uses OpenMP. Results must be written to per-index slots so that
/// the output is identical for any worker count. The first exception thrown
/// by a body is captured and rethrown after the loop.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
    if (jobs == 0) jobs = hardware_jobs();
#ifdef _OPENMP
    if (jobs > 1 && n > 1) {
        std::exception_ptr error;
        std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            try {
                fn(static_cast<size_t>(i));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        return;
    }
#endif
    (void)jobs;
    for (size_t i = 0; i < n; ++i) fn(i);
}

} // namespace zsce
