#include "glam/cli.hpp"

int main(int argc, char** argv) { return glam::run_cli(argc, argv); }
