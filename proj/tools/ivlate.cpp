#include "ivlate/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ivlate::cli::run(argc, argv, std::cout, std::cerr); }
