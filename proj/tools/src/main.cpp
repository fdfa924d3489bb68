#include <iostream>

#include "dossim_cli/cli.hpp"

int main(int argc, char** argv) { return dossim::cli::run(argc, argv, std::cout, std::cerr); }
