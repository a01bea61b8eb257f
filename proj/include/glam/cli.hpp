#pragma once

namespace glam {

/// Entry point of the `glam` tool. Returns 0 on success, 1 on usage or
/// configuration errors and 2 on numerical failure.
int run_cli(int argc, char** argv);

}  // namespace glam
