#include <iostream>

#include "fpc/cli.hpp"

int main(int argc, char** argv) { return fpc::cli_main(argc, argv, std::cout, std::cerr); }
