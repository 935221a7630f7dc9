// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/cli.hpp"

int main(int argc, char** argv) { return cdft::cli::main(argc, argv); }
