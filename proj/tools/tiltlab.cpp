#include "tiltlab/shell.hpp"

int main(int argc, char** argv) { return tiltlab::shell::cli_run(argc, argv); }
