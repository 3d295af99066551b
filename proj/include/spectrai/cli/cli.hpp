#pragma once

#include <atomic>
#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace spectrai::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kTrainingAborted = 4,
  kInterrupted = 130,
};

/// Config, gate, parse and shape failures -> 2; I/O -> 3; numeric aborts and
/// unexpected failures -> 4; honored stop requests -> 130.
int exit_code_for(std::exception_ptr error);

/// Raised by the SIGINT handler; training flushes a checkpoint and returns 130.
std::atomic<bool>& interrupt_flag();

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spectrai::cli
