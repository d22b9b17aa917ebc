#include "cli.hpp"

#include "efbench/allocator.hpp"

#include <iostream>

int main(int argc, char** argv) {
    efbench::tune_allocator();
    std::vector<std::string> args(argv + 1, argv + argc);
    return efbench::cli::run(args, std::cout, std::cerr);
}
