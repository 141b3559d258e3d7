#include "marketpulse/cli.hpp"

int main(int argc, char** argv) { return marketpulse::cli::run(argc, argv); }
