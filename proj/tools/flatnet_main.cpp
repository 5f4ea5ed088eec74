#include <iostream>
#include <string>
#include <vector>

#include "flatnet/cli.h"

int main(int argc, char** argv) {
  return flatnet::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
