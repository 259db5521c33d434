// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/cli.hpp"

int main(int argc, char** argv) { return moeprobe::cli_dispatch(argc, argv); }
