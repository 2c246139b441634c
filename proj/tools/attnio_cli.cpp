#include <vector>
#include <string>

#include "attnio/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return attnio::dispatch(args);
}
