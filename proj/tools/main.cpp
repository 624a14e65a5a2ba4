#include <iostream>

#include "dtsl/cli.hpp"

int main(int argc, char** argv) { return dtsl::run_cli(argc, argv, std::cout, std::cerr); }
