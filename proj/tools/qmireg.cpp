#include <iostream>
#include <string>
#include <vector>

#include "qmireg/cli.hpp"

int main(int argc, char** argv) {
    return qmireg::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
