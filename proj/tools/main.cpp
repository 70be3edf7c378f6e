#include "layersep/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return layersep::run_cli(argc, argv, std::cout, std::cerr); }
