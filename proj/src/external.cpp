#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <string_view>
#include <thread>

#include "safe/error.hpp"
#include "safe/surrogate.hpp"
#include "safe/util.hpp"

namespace safe {

namespace {

// A child that exits before consuming its input must not kill us.
void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fds, O_CLOEXEC) != 0)
      throw Error(ErrorCode::ExternalProtocolError, std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
  int read_end() const { return fds[0]; }
  int write_end() const { return fds[1]; }
  void close_read() {
    if (fds[0] >= 0) ::close(fds[0]);
    fds[0] = -1;
  }
  void close_write() {
    if (fds[1] >= 0) ::close(fds[1]);
    fds[1] = -1;
  }
};

struct ProcessOutput {
  int status = 0;
  std::string out;
};

ProcessOutput run_shell(const std::string& command, const std::filesystem::path& cwd,
                        const std::string& input) {
  ignore_sigpipe();
  Pipe to_child, from_child;
  const std::string dir = cwd.string();

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::ExternalProtocolError, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child.read_end(), STDIN_FILENO);
    ::dup2(from_child.write_end(), STDOUT_FILENO);
    if (!dir.empty() && ::chdir(dir.c_str()) != 0) ::_exit(127);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  to_child.close_read();
  from_child.close_write();

  std::thread writer([&] {
    std::string_view rest(input);
    while (!rest.empty()) {
      const ssize_t written = ::write(to_child.write_end(), rest.data(), rest.size());
      if (written < 0) {
        if (errno == EINTR) continue;
        break;  // EPIPE: the child stopped reading; the row count check reports it
      }
      rest.remove_prefix(static_cast<std::size_t>(written));
    }
    to_child.close_write();
  });

  ProcessOutput result;
  char buffer[1 << 16];
  for (;;) {
    const ssize_t got = ::read(from_child.read_end(), buffer, sizeof(buffer));
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) break;
    result.out.append(buffer, static_cast<std::size_t>(got));
  }
  writer.join();
  while (::waitpid(pid, &result.status, 0) < 0 && errno == EINTR) {
  }
  return result;
}

}  // namespace

ExternalSurrogate::ExternalSurrogate(std::string command, std::filesystem::path working_directory)
    : command_(std::move(command)), working_directory_(std::move(working_directory)) {
  if (command_.empty()) throw Error(ErrorCode::InvalidArgument, "external surrogate command is empty");
}

std::vector<double> ExternalSurrogate::score(const Dataset& rows) const {
  const std::string input = features_to_csv(rows);
  ProcessOutput result;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    result = run_shell(command_, working_directory_, input);
  }
  if (!WIFEXITED(result.status) || WEXITSTATUS(result.status) != 0)
    throw Error(ErrorCode::ExternalProtocolError,
                "command '" + command_ + "' failed (status " + std::to_string(result.status) + ")");

  std::vector<double> scores;
  scores.reserve(rows.n_rows());
  std::string_view text(result.out);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t end = std::min(text.find('\n'), text.size());
    std::string_view line = text.substr(0, end);
    text.remove_prefix(std::min(end + 1, text.size()));
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() && text.empty()) break;  // trailing newline
    double value = 0.0;
    if (!parse_double(line, value))
      throw Error(ErrorCode::ExternalProtocolError,
                  "output line " + std::to_string(line_no) + " is not a finite number: '" +
                      std::string(line) + "'");
    scores.push_back(value);
  }
  if (scores.size() != rows.n_rows())
    throw Error(ErrorCode::ExternalProtocolError,
                "command returned " + std::to_string(scores.size()) + " scores for " +
                    std::to_string(rows.n_rows()) + " rows");
  return scores;
}

std::string ExternalSurrogate::describe() const { return "external: " + command_; }

SurrogateHandle make_external(std::string command, std::filesystem::path working_directory) {
  return std::make_shared<const ExternalSurrogate>(std::move(command), std::move(working_directory));
}

}  // namespace safe
