#include <iostream>
#include <string>
#include <vector>

#include "oculab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return oculab::cli_dispatch(args, std::cout, std::cerr);
}
