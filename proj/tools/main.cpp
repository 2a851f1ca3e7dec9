#include <iostream>

#include "chorrnn/cli.hpp"

int main(int argc, char** argv) { return chorrnn::run_cli(argc, argv, std::cout, std::cerr); }
