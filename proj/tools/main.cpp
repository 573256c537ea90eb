#include <vector>

#include "tlforecast/cli.hpp"

int main(int argc, char** argv) {
  return tlf::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
