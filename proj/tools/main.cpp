#include "narrowline/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return narrowline::cli::run(argc, argv, std::cout, std::cerr);
}
