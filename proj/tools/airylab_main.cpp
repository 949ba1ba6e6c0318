#include "airylab/cli.hpp"

int main(int argc, char** argv) { return airylab::run_cli(argc, argv); }
