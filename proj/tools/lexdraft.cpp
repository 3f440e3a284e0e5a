#include <iostream>

#include "lexdraft/cli.hpp"

int main(int argc, char** argv) { return lexdraft::cli_main(argc, argv, std::cout, std::cerr); }
