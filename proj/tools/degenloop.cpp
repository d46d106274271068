#include "degenloop/cli.hpp"

int main(int argc, char** argv) { return degenloop::cli_main(argc, argv); }
