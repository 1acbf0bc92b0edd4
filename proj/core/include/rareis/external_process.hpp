#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <sys/types.h>
#include <vector>

#include "rareis/types.hpp"

namespace rareis {

/// A long-lived child process speaking the batch evaluation line protocol:
///
///   request:  "EVAL <n> <d>\n" followed by n lines of d reals
///   reply:    n lines, one real each, in request order
///
/// Reals are written with 17 significant digits. One process serves one
/// batch at a time; the child is killed when the object is destroyed.
class ExternalProcess {
 public:
  explicit ExternalProcess(const std::string& command,
                           std::chrono::milliseconds timeout = std::chrono::minutes(10));
  ~ExternalProcess();

  ExternalProcess(const ExternalProcess&) = delete;
  ExternalProcess& operator=(const ExternalProcess&) = delete;

  /// Evaluates rows [begin, end) of `points`. Throws SimulatorError carrying
  /// the global row indices that did not get a valid reply.
  std::vector<double> evaluate(const PointMatrix& points, std::size_t begin, std::size_t end);

  pid_t pid() const noexcept { return pid_; }

 private:
  void shutdown() noexcept;

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::chrono::milliseconds timeout_;
  std::string pending_;  // bytes read past the last complete reply line
};

/// Serializes one request exactly as sent on the wire.
std::string encode_eval_request(const PointMatrix& points, std::size_t begin, std::size_t end);

/// SIGKILLs every live child started by ExternalProcess. Async-signal-safe.
void kill_all_external_processes() noexcept;

}  // namespace rareis
