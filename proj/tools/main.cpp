#include <iostream>

#include "biasci/cli.hpp"

int main(int argc, char** argv) {
    return biasci::run_cli(argc, argv, std::cout, std::cerr);
}
