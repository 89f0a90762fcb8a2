#include <iostream>

#include "metacp/cli.hpp"

int main(int argc, char** argv) { return metacp::run_cli(argc, argv, std::cout, std::cerr); }
