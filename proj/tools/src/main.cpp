#include "corrdef_cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return corrdef::cli::run(args, std::cout, std::cerr);
}
