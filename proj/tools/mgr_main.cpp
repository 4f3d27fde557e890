#include <string>
#include <vector>

#include "mgr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mgr::cli::dispatch(args);
}
