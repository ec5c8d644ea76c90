#include "pgee/cli.hpp"

int main(int argc, char** argv) { return pgee::cli_main(argc, argv); }
