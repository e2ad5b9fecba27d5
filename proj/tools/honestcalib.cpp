#include "honestcalib/cli.hpp"

int main(int argc, char** argv) { return honestcalib::cli::run(argc, argv); }
