#include "trifem/scenario.hpp"

#include <iostream>

int main(int argc, char** argv) { return trifem::run_cli(argc, argv, std::cout, std::cerr); }
