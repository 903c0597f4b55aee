#include <fcntl.h>
#include <linux/landlock.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>

#include "optira/sandbox.hpp"

namespace optira {

namespace {

// The distro header predates the network and truncate rights.
struct RulesetAttr {
  std::uint64_t handled_access_fs;
  std::uint64_t handled_access_net;
};
constexpr std::uint64_t kAccessRefer = 1ULL << 13;
constexpr std::uint64_t kAccessTruncate = 1ULL << 14;
constexpr std::uint64_t kNetBindTcp = 1ULL << 0;
constexpr std::uint64_t kNetConnectTcp = 1ULL << 1;

std::atomic<bool> g_landlock{false};

int landlock_abi() {
  const long v = syscall(SYS_landlock_create_ruleset, nullptr, 0, LANDLOCK_CREATE_RULESET_VERSION);
  return v < 0 ? 0 : static_cast<int>(v);
}

/// Ruleset allowing writes only beneath `scratch` and /dev. -1 when unsupported.
int make_ruleset(const std::string& scratch) {
  const int abi = landlock_abi();
  if (abi < 1) return -1;
  std::uint64_t write_rights = LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_REMOVE_DIR |
                               LANDLOCK_ACCESS_FS_REMOVE_FILE | LANDLOCK_ACCESS_FS_MAKE_CHAR |
                               LANDLOCK_ACCESS_FS_MAKE_DIR | LANDLOCK_ACCESS_FS_MAKE_REG |
                               LANDLOCK_ACCESS_FS_MAKE_SOCK | LANDLOCK_ACCESS_FS_MAKE_FIFO |
                               LANDLOCK_ACCESS_FS_MAKE_BLOCK | LANDLOCK_ACCESS_FS_MAKE_SYM;
  if (abi >= 2) write_rights |= kAccessRefer;
  if (abi >= 3) write_rights |= kAccessTruncate;
  RulesetAttr attr{write_rights, abi >= 4 ? kNetBindTcp | kNetConnectTcp : 0};
  const std::size_t size = abi >= 4 ? sizeof(RulesetAttr) : sizeof(std::uint64_t);
  const int fd = static_cast<int>(syscall(SYS_landlock_create_ruleset, &attr, size, 0));
  if (fd < 0) return -1;

  auto allow = [&](const char* path, std::uint64_t rights) {
    const int dir = open(path, O_PATH | O_CLOEXEC);
    if (dir < 0) return false;
    landlock_path_beneath_attr rule{};
    rule.allowed_access = rights;
    rule.parent_fd = dir;
    const long rc = syscall(SYS_landlock_add_rule, fd, LANDLOCK_RULE_PATH_BENEATH, &rule, 0);
    close(dir);
    return rc == 0;
  };
  const std::uint64_t dev_rights =
      LANDLOCK_ACCESS_FS_WRITE_FILE | (abi >= 3 ? kAccessTruncate : 0);
  if (!allow(scratch.c_str(), write_rights) || !allow("/dev", dev_rights)) {
    close(fd);
    return -1;
  }
  fcntl(fd, F_SETFD, FD_CLOEXEC);
  return fd;
}

void ignore_sigpipe() {
  static const bool once = [] {
    signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

bool landlock_supported() { return g_landlock.load(); }

ChildResult run_child(const std::vector<std::string>& argv, const std::string& input,
                      const Limits& limits) {
  ignore_sigpipe();
  ChildResult result;
  if (argv.empty()) throw Error("run_child: empty argv");

  std::string pattern = (std::filesystem::temp_directory_path() / "optira-run-XXXXXX").string();
  if (mkdtemp(pattern.data()) == nullptr) throw Error("cannot create scratch directory");
  result.scratch_dir = pattern;

  std::vector<std::string> env{"PATH=/usr/local/bin:/usr/bin:/bin", "HOME=" + pattern,
                               "TMPDIR=" + pattern, "LANG=C.UTF-8"};
  std::vector<char*> c_argv, c_env;
  for (const auto& a : argv) c_argv.push_back(const_cast<char*>(a.c_str()));
  c_argv.push_back(nullptr);
  for (const auto& e : env) c_env.push_back(const_cast<char*>(e.c_str()));
  c_env.push_back(nullptr);

  int in[2], out[2], err[2];
  if (pipe2(in, O_CLOEXEC) != 0 || pipe2(out, O_CLOEXEC) != 0 || pipe2(err, O_CLOEXEC) != 0) {
    throw Error(std::string("pipe: ") + std::strerror(errno));
  }
  const int ruleset = make_ruleset(pattern);
  g_landlock = ruleset >= 0;
  const rlim_t memory = static_cast<rlim_t>(limits.memory_bytes);

  const auto started = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    // Child: async-signal-safe calls only.
    setpgid(0, 0);
    dup2(in[0], STDIN_FILENO);
    dup2(out[1], STDOUT_FILENO);
    dup2(err[1], STDERR_FILENO);
    if (chdir(c_env[1] + 5) != 0) _exit(126);
    const rlimit as{memory, memory};
    setrlimit(RLIMIT_AS, &as);
    const rlimit core{0, 0};
    setrlimit(RLIMIT_CORE, &core);
    if (ruleset >= 0) {
      prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0);
      syscall(SYS_landlock_restrict_self, ruleset, 0);
    }
    execve(c_argv[0], c_argv.data(), c_env.data());
    _exit(127);
  }
  if (ruleset >= 0) close(ruleset);
  close(in[0]);
  close(out[1]);
  close(err[1]);
  fcntl(in[1], F_SETFL, O_NONBLOCK);

  const auto deadline =
      started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(limits.wall_seconds));
  std::size_t written = 0;
  int in_fd = in[1];
  if (input.empty()) {
    close(in_fd);
    in_fd = -1;
  }
  bool out_open = true, err_open = true;
  char buffer[65536];
  while (out_open || err_open) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      break;
    }
    const int wait_ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count()) + 1;
    pollfd fds[3];
    int n = 0;
    int out_slot = -1, err_slot = -1, in_slot = -1;
    if (out_open) { fds[n] = {out[0], POLLIN, 0}; out_slot = n++; }
    if (err_open) { fds[n] = {err[0], POLLIN, 0}; err_slot = n++; }
    if (in_fd >= 0) { fds[n] = {in_fd, POLLOUT, 0}; in_slot = n++; }
    const int rc = poll(fds, n, std::min(wait_ms, 100));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (in_slot >= 0 && fds[in_slot].revents != 0) {
      if (fds[in_slot].revents & (POLLERR | POLLHUP)) {
        close(in_fd);
        in_fd = -1;
      } else {
        const ssize_t w = write(in_fd, input.data() + written, input.size() - written);
        if (w > 0) written += static_cast<std::size_t>(w);
        if (w < 0 && errno != EAGAIN) written = input.size();
        if (written >= input.size()) {
          close(in_fd);
          in_fd = -1;
        }
      }
    }
    auto drain = [&](int slot, int fd, std::string& sink, bool& open) {
      if (slot < 0 || fds[slot].revents == 0) return;
      const ssize_t r = read(fd, buffer, sizeof buffer);
      if (r > 0) {
        sink.append(buffer, static_cast<std::size_t>(r));
      } else if (r == 0 || (errno != EAGAIN && errno != EINTR)) {
        open = false;
      }
    };
    drain(out_slot, out[0], result.out, out_open);
    drain(err_slot, err[0], result.err, err_open);
  }
  if (in_fd >= 0) close(in_fd);
  close(out[0]);
  close(err[0]);

  int status = 0;
  for (;;) {
    const pid_t w = waitpid(pid, &status, result.timed_out ? 0 : WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) break;
    if (w == 0 && std::chrono::steady_clock::now() >= deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      continue;
    }
    if (w == 0) usleep(2000);
  }
  // Reap anything the child left in its process group.
  kill(-pid, SIGKILL);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) result.signal = WTERMSIG(status);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::error_code ec;
  std::filesystem::remove_all(pattern, ec);
  return result;
}

}  // namespace optira
