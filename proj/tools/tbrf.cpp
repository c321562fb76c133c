#include <iostream>
#include <string>
#include <vector>

#include "tbrf/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return tbrf::cli::run(args, std::cout, std::cerr);
}
