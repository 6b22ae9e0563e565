#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
    return counterpools::cli::run(argc, argv, std::cout, std::cerr);
}
