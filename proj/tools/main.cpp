#include "fairlab/cli.hpp"

int main(int argc, char** argv) { return fairlab::cli_main(argc, argv); }
