#include "kopa/cli.hpp"

int main(int argc, char** argv) { return kopa::cli_main(argc, argv); }
