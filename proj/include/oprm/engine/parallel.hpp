#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <string>

namespace oprm::engine {

/// Runs `job(i)` for every i in `order` (or 0..n-1 when `order` is empty)
/// on up to `workers` threads. The first failure is rethrown after all
/// threads stop, with `label` and the failing index appended to its message;
/// UsageError and NumericError keep their type.
void parallel_for(std::size_t n, int workers, std::span<const std::size_t> order,
                  const std::function<void(std::size_t)>& job, const std::string& label);

/// Rethrows `e` with `context` appended, preserving the library error types.
[[noreturn]] void rethrow_with_context(std::exception_ptr e, const std::string& context);

}  // namespace oprm::engine
