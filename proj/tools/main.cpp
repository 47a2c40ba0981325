#include "bise/cli.hpp"

int main(int argc, char** argv) { return bise::run_cli(argc, argv); }
