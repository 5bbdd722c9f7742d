#include "labelrefine/cli.hpp"

int main(int argc, char** argv) { return labelrefine::run_cli(argc, argv); }
