#include <vector>

#include "rankhaz/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rankhaz::cli::run_cli(args);
}
