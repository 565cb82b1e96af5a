#include "mans/cli.hpp"

int main(int argc, char** argv) { return mans::run_cli(argc, argv); }
