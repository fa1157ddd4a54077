#include <iostream>

#include "mestereo/cli.hpp"

int main(int argc, char** argv) { return mestereo::cli::run(argc, argv, std::cout, std::cerr); }
