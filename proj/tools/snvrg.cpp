#include "snvrg/harness/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return snvrg::harness::cli_main(argc, argv, std::cout, std::cerr); }
