#include <iostream>

#include "crnq/cli.hpp"

int main(int argc, char** argv) { return crnq::cli::run_cli(argc, argv, std::cout, std::cerr); }
