#include "zsncd/cli.hpp"

int main(int argc, char** argv) { return zsncd::cli::run(argc, argv); }
