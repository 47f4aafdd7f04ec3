#include <iostream>

#include "evmopf/cli.hpp"

int main(int argc, char** argv) {
    return evmopf::run_cli(argc, argv, std::cout, std::cerr);
}
