#include "sea/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sea::run_cli(argc, argv, std::cerr); }
