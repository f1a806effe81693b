// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "nsk/cli.hpp"

int main(int argc, char** argv) {
    return nsk::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
