#include <iostream>

#include "scq/cli.hpp"

int main(int argc, char** argv) { return scq::run_cli(argc, argv, std::cout, std::cerr); }
