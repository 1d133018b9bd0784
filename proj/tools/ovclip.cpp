#include "ovclip/cli.hpp"

int main(int argc, char** argv) { return ovclip::cli_main(argc, argv); }
