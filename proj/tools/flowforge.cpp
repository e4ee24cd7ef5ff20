#include <iostream>

#include "flowforge/cli.hpp"

int main(int argc, char** argv) { return flowforge::cli::run(argc, argv, std::cout, std::cerr); }
