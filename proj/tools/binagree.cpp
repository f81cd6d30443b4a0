#include "binagree/cli.hpp"

int main(int argc, char** argv) { return binagree::run_cli(argc, argv); }
