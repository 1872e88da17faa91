#include "oscidiff/cli.hpp"

int main(int argc, char** argv) { return oscidiff::cli_main(argc, argv); }
