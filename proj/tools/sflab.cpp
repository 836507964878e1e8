#include "sflab/cli.hpp"

int main(int argc, char** argv) { return sflab::cli::main_entry(argc, argv); }
