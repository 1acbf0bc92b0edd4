#include "rareis/external_process.hpp"

#include <array>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "rareis/errors.hpp"

extern char** environ;

namespace rareis {
namespace {

constexpr std::size_t kMaxChildren = 256;
std::array<std::atomic<pid_t>, kMaxChildren> g_children{};

void register_child(pid_t pid) noexcept {
  for (auto& slot : g_children) {
    pid_t empty = 0;
    if (slot.compare_exchange_strong(empty, pid)) return;
  }
}

void unregister_child(pid_t pid) noexcept {
  for (auto& slot : g_children) {
    pid_t expected = pid;
    if (slot.compare_exchange_strong(expected, 0)) return;
  }
}

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> args;
  std::istringstream in(command);
  std::string token;
  while (in >> token) args.push_back(token);
  return args;
}

std::vector<std::size_t> index_range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(i);
  return out;
}

void append_real(std::string& out, double value) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

std::string encode_eval_request(const PointMatrix& points, std::size_t begin, std::size_t end) {
  std::string out = "EVAL " + std::to_string(end - begin) + " " + std::to_string(points.cols()) + "\n";
  for (std::size_t i = begin; i < end; ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j > 0) out.push_back(' ');
      append_real(out, points(static_cast<Eigen::Index>(i), j));
    }
    out.push_back('\n');
  }
  return out;
}

void kill_all_external_processes() noexcept {
  for (auto& slot : g_children) {
    const pid_t pid = slot.load();
    if (pid > 0) ::kill(pid, SIGKILL);
  }
}

ExternalProcess::ExternalProcess(const std::string& command, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  const auto args = split_command(command);
  if (args.empty()) throw SimulatorError("empty external model command", {});

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw SimulatorError("pipe() failed", {});
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw SimulatorError("pipe() failed", {});
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  const int rc = ::posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw SimulatorError("cannot start external model '" + command + "': " + std::strerror(rc), {});
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  register_child(pid_);
}

ExternalProcess::~ExternalProcess() { shutdown(); }

void ExternalProcess::shutdown() noexcept {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin asks a well-behaved child to exit; give it a moment.
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 50 && !reaped; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        reaped = true;
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    }
    if (!reaped) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    unregister_child(pid_);
    pid_ = -1;
  }
}

std::vector<double> ExternalProcess::evaluate(const PointMatrix& points, std::size_t begin,
                                              std::size_t end) {
  if (pid_ <= 0) throw SimulatorError("external model is not running", index_range(begin, end));

  const std::string request = encode_eval_request(points, begin, end);
  std::size_t written = 0;
  std::vector<double> values;
  values.reserve(end - begin);
  const auto deadline = std::chrono::steady_clock::now() + timeout_;

  auto failed_from = [&](std::size_t answered) { return index_range(begin + answered, end); };

  while (values.size() < end - begin) {
    std::array<pollfd, 2> fds{};
    nfds_t nfds = 0;
    fds[nfds++] = pollfd{from_child_, POLLIN, 0};
    if (written < request.size()) fds[nfds++] = pollfd{to_child_, POLLOUT, 0};

    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0)
      throw SimulatorError("external model timed out", failed_from(values.size()));
    const int ready = ::poll(fds.data(), nfds, static_cast<int>(std::min<long long>(remaining.count(), 60000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw SimulatorError("poll() failed", failed_from(values.size()));
    }

    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = ::write(to_child_, request.data() + written, request.size() - written);
      if (n < 0) {
        if (errno != EINTR && errno != EAGAIN)
          throw SimulatorError("external model closed its input", failed_from(values.size()));
      } else {
        written += static_cast<std::size_t>(n);
      }
    }

    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[8192];
      const ssize_t n = ::read(from_child_, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw SimulatorError("read from external model failed", failed_from(values.size()));
      }
      if (n == 0) throw SimulatorError("external model exited mid-batch", failed_from(values.size()));
      pending_.append(buf, static_cast<std::size_t>(n));

      std::size_t line_start = 0;
      for (std::size_t nl; (nl = pending_.find('\n', line_start)) != std::string::npos;
           line_start = nl + 1) {
        if (values.size() == end - begin)
          throw SimulatorError("external model sent more replies than requested", {});
        std::string_view line(pending_.data() + line_start, nl - line_start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
        if (ec != std::errc() || ptr != line.data() + line.size() || !std::isfinite(value)) {
          throw SimulatorError("malformed reply '" + std::string(line) + "' for row " +
                                   std::to_string(begin + values.size()),
                               {begin + values.size()});
        }
        values.push_back(value);
      }
      pending_.erase(0, line_start);
    }
  }
  return values;
}

}  // namespace rareis
