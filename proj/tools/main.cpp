#include <iostream>
#include <string>
#include <vector>

#include "lytnet/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lytnet::cli::run(args, std::cout, std::cerr);
}
