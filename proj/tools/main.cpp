#include <iostream>

#include "pjfnn/cli.hpp"

int main(int argc, char** argv) { return pjfnn::run_cli(argc, argv, std::cout, std::cerr); }
