#include <iostream>

#include "sincfb/cli.hpp"

int main(int argc, char** argv) { return sincfb::cli_dispatch(argc, argv, std::cout, std::cerr); }
