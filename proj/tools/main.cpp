#include <iostream>

#include "contjump/cli.hpp"

int main(int argc, char** argv) { return contjump::run_cli(argc, argv, std::cout, std::cerr); }
