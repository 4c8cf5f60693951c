#include <vector>
#include <string>

#include "jsr/cli.hpp"

int main(int argc, char** argv) {
  return jsr::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
