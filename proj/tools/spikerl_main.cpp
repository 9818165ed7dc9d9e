#include "spikerl/cli.hpp"

int main(int argc, char** argv) { return spikerl::run_cli(argc, argv); }
