#include <string>
#include <vector>

#include "aor/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return aor::cli::run(args);
}
