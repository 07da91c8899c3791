#include <iostream>
#include <string>
#include <vector>

#include "saeprobe/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return saeprobe::cli::run(args, std::cout, std::cerr);
}
