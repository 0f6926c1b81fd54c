#include <iostream>

#include "reorient/cli.hpp"

int main(int argc, char** argv) { return reorient::run_cli(argc, argv, std::cout, std::cerr); }
