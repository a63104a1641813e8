// Copyright 2026 The optofluid Authors
// SPDX-License-Identifier: Apache-2.0

#include "optofluid/cli/app.hpp"

int main(int argc, char** argv)
{
    return optofluid::cli::main_entry(std::vector<std::string>(argv + 1, argv + argc));
}
