#include <string>
#include <vector>

#include "neatboost/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return neatboost::run_cli(args);
}
