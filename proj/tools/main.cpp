#include <iostream>

#include "ai4ef/cli.hpp"

int main(int argc, char** argv) { return ai4ef::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
