#include <iostream>

#include "hjm/cli.hpp"

int main(int argc, char** argv) { return hjm::run_cli(argc, argv, std::cout, std::cerr); }
