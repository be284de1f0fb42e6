#include "faser/cli.hpp"

int main(int argc, char** argv) { return faser::run_cli(argc, argv); }
