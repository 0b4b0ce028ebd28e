#include "berrystack/cli.hpp"

int main(int argc, char** argv) { return berrystack::cli::main_entry(argc, argv); }
