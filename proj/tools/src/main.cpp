#include <iostream>

#include "covsteer/cli.hpp"

int main(int argc, char** argv) {
    return covsteer::cli::run(argc, argv, std::cout, std::cerr);
}
