#include <iostream>

#include "locfuse/cli.hpp"

int main(int argc, char** argv) { return locfuse::run_cli(argc, argv, std::cout, std::cerr); }
