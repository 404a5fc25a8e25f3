#include <iostream>

#include "courtsim/cli.hpp"

int main(int argc, char** argv) { return courtsim::run_cli(argc, argv, std::cout, std::cerr); }
