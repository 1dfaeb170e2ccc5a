#include "scanpath/cli.hpp"

int main(int argc, char** argv) { return scanpath::run_cli(argc, argv); }
