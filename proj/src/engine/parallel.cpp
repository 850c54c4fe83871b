#include "oprm/engine/parallel.hpp"

#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "oprm/errors.hpp"

namespace oprm::engine {

void rethrow_with_context(std::exception_ptr e, const std::string& context) {
  try {
    std::rethrow_exception(e);
  } catch (const UsageError& err) {
    throw UsageError(std::string(err.what()) + " [" + context + "]");
  } catch (const NumericError& err) {
    throw NumericError(std::string(err.what()) + " [" + context + "]");
  } catch (const std::exception& err) {
    throw std::runtime_error(std::string(err.what()) + " [" + context + "]");
  }
}

void parallel_for(std::size_t n, int workers, std::span<const std::size_t> order,
                  const std::function<void(std::size_t)>& job, const std::string& label) {
  if (!order.empty() && order.size() != n) throw UsageError("execution order must be a permutation of all indices");
  auto index_at = [&](std::size_t k) { return order.empty() ? k : order[k]; };

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  std::size_t failed_index = 0;
  auto run = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      const std::size_t i = index_at(k);
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure || i < failed_index) {
          failure = std::current_exception();
          failed_index = i;
        }
        next = n;
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(run);
  }
  if (failure) rethrow_with_context(failure, label + " " + std::to_string(failed_index));
}

}  // namespace oprm::engine
