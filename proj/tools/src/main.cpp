#include <iostream>

#include "lpp_cli/cli.hpp"

int main(int argc, char** argv) { return lpp::cli::run(argc, argv, std::cout, std::cerr); }
