#include <csignal>
#include <iostream>

#include "spectrai/cli/cli.hpp"

namespace {

extern "C" void on_interrupt(int) {
  // A second interrupt terminates immediately.
  spectrai::cli::interrupt_flag().store(true);
  std::signal(SIGINT, SIG_DFL);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  return spectrai::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
