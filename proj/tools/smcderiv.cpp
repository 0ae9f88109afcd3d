#include <iostream>

#include "smcd/cli.hpp"

int main(int argc, char** argv) { return smcd::run_cli(argc, argv, std::cout, std::cerr); }
