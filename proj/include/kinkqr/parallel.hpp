#pragma once

#include <cstddef>
#include <functional>

namespace kinkqr {

// Worker count used by parallel_for. Defaults to KINKQR_THREADS when set,
// otherwise the hardware concurrency.
int thread_count();
void set_thread_count(int threads);

// Calls body(i) for i in [0, count). Each index is processed exactly once,
// so results written to slot i do not depend on scheduling. Calls made from
// inside a running parallel_for execute serially. The first exception thrown
// by any body is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace kinkqr
