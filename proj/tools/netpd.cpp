#include "netpd/commands.hpp"

int main(int argc, char** argv) { return netpd::cli_main(argc, argv); }
