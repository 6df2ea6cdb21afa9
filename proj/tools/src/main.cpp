#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return aedtool::run(argc, argv, std::cout, std::cerr); }
