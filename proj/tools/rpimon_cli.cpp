#include <iostream>

#include "rpimon/cli.hpp"

int main(int argc, char** argv) { return rpimon::run_cli(argc, argv, std::cout, std::cerr); }
