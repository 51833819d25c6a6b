#include "fosr/commands.hpp"

int main(int argc, char** argv) { return fosr::run_cli(argc, argv); }
