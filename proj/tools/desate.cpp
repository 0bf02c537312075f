#include <iostream>

#include "desate/cli.hpp"

int main(int argc, char** argv) { return desate::cli::run(argc, argv, std::cout, std::cerr); }
