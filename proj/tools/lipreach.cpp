#include "lipreach/cli.hpp"

int main(int argc, char** argv) { return lipreach::cli::main_entry(argc, argv); }
