// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace nsk {

int run_command(const std::vector<std::string>& args);

}  // namespace nsk

#include "nsk/cli_impl.hpp"
