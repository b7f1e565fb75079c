#include <iostream>

#include "roughlab/cli.hpp"

int main(int argc, char** argv) { return roughlab::cli::run(argc, argv, std::cout, std::cerr); }
